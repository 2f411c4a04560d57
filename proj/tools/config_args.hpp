#pragma once

#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace slotfill::cli {

/// Expands `--config FILE` for the subcommand named in args[0]: each
/// `key = value` entry whose `--key` is an option of that subcommand and is
/// not given explicitly on the command line is inserted as `--key value`.
/// Keys that the subcommand does not know are ignored, so one file can hold
/// settings for several subcommands.
std::vector<std::string> inject_config(const CLI::App& app, std::vector<std::string> args);

}  // namespace slotfill::cli
