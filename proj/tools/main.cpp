// slotfill: command-line front end.
//
// Exit status: 0 success, 1 usage or configuration error, 2 data error.

#include <algorithm>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config_args.hpp"
#include "slotfill/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Slot filling over passage corpora: retrieval, reading and evaluation.", "slotfill"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  slotfill::cli::register_commands(app);

  if (argc < 2) {
    std::cerr << app.help();
    return 1;
  }

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = slotfill::cli::inject_config(app, std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);  // prints help, or the error and a hint
    return status == 0 ? 0 : 1;
  } catch (const slotfill::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 1;
  } catch (const slotfill::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
