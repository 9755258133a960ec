#pragma once

// argv -> RunConfig. Every config key is a --flag; --config names a file whose
// values the flags then override.

#include <CLI11.hpp>

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"

namespace tssrbm {

/// Thrown by parse_run_config when --help is given; carries the help text.
struct HelpRequested {
  std::string text;
};

inline RunConfig parse_run_config(const std::vector<std::string>& args) {
  CLI::App app{"Tiled-convolutional spike-and-slab RBM texture models", "tssrbm"};
  app.get_formatter()->column_width(34);
  std::string command, config_path;
  app.add_option("command", command, "one of: prepare, train, sample, inpaint, eval-tss, eval-mssim, mixing")
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "flat 'key = value' file with [section] headers");

  const RunConfig defaults;
  std::vector<std::string> values(config_keys().size());
  std::vector<CLI::Option*> opts;
  for (std::size_t i = 0; i < config_keys().size(); ++i) {
    const ConfigKey& k = config_keys()[i];
    std::string help = k.help + " (default: " + (k.get(defaults).empty() ? "none" : k.get(defaults)) + ")";
    if (k.protocol) help += " [published protocol value]";
    opts.push_back(app.add_option("--" + k.name, values[i], help)
                       ->group("[" + k.section + "]")
                       ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast));
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  RunConfig cfg;
  if (!config_path.empty()) apply_config_file(cfg, config_path);
  for (std::size_t i = 0; i < opts.size(); ++i) {
    if (opts[i]->count() > 0) {
      try {
        config_keys()[i].set(cfg, values[i]);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("--") + config_keys()[i].name + ": " + e.what());
      }
    }
  }
  cfg.command = command;
  if (cfg.command.empty()) throw ConfigError("no command given (try --help)");
  cfg.validate();
  return cfg;
}

/// Entry point shared by the executable and the tests.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(parse_run_config(args), out);
  } catch (const HelpRequested& h) {
    out << h.text;
    return 0;
  } catch (const ConfigError& e) {
    err << "tssrbm: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "tssrbm: error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace tssrbm
