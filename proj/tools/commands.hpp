#pragma once

namespace CLI {
class App;
}

namespace slotfill::cli {

void register_commands(CLI::App& app);

}  // namespace slotfill::cli
