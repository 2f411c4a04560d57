#include "config_args.hpp"

#include <algorithm>

#include <CLI11.hpp>

#include "slotfill/config.hpp"
#include "slotfill/error.hpp"

namespace slotfill::cli {

namespace {

bool given(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

bool truthy(const std::string& v) { return v == "1" || v == "true" || v == "yes" || v == "on"; }

}  // namespace

std::vector<std::string> inject_config(const CLI::App& app, std::vector<std::string> args) {
  if (args.empty()) return args;
  const auto path = config_path(args);
  if (path.empty()) return args;
  const CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[0]);
  } catch (const CLI::OptionNotFound&) {
    return args;  // let the parser report the unknown subcommand
  }
  const RunConfig config = RunConfig::load(path);

  std::vector<std::string> injected;
  for (const auto& [key, value] : config.values()) {
    const std::string flag = "--" + key;
    if (key == "config" || given(args, flag)) continue;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr) continue;
    if (opt->get_expected_min() == 0) {
      if (truthy(value)) injected.push_back(flag);
      continue;
    }
    injected.push_back(flag);
    injected.push_back(value);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

}  // namespace slotfill::cli
