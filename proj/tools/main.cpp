#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynbool/runner.hpp"

int main(int argc, char** argv) {
  // `dynbool run detect ...` and `dynbool detect ...` are the same command.
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args.front() == "run") args.erase(args.begin());

  CLI::App app{"Dynamic Boolean model simulation labs"};
  app.set_version_flag("--version", dynbool::tool_version());
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  struct Sub {
    std::string config;
    std::string out = ".";
    std::map<std::string, std::string> values;
  };
  const std::map<std::string, std::string> about{
      {"sample-path", "one stable skeleton"},
      {"sausage", "expected sausage volume rate E|B_R(path)|/T"},
      {"detect", "detection survival P(T_det > t) and its decay rate"},
      {"cover", "coverage-time proxies over a k-ladder"},
      {"percolate", "percolation time against detection time"},
      {"goodbox", "good-box fraction against the Poisson tail"},
      {"lambda-c", "critical intensity bracket of the static Boolean model"},
      {"plan-window", "truncation window for a horizon"},
      {"calibrate", "fit escape and hitting bound constants"},
      {"report-data", "cloud and trajectories for plotting"},
  };
  std::map<std::string, Sub> subs;
  for (const auto& lab : dynbool::lab_names()) {
    auto& sub = subs[lab];
    const auto it = about.find(lab);
    auto* cmd = app.add_subcommand(lab, it == about.end() ? "" : it->second);
    cmd->add_option("--config", sub.config, "INI file with [common] and [" + lab + "] sections");
    cmd->add_option("--out", sub.out, "output directory")->capture_default_str();
    for (const auto& f : dynbool::lab_schema(lab)) {
      std::string help = f.help;
      if (!f.fallback.empty()) help += " [" + f.fallback + "]";
      cmd->add_option("--" + f.name, sub.values[f.name], help);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto* cmd : app.get_subcommands()) {
    const std::string lab = cmd->get_name();
    const auto& sub = subs[lab];
    std::map<std::string, std::string> overrides;
    for (const auto& f : dynbool::lab_schema(lab))
      if (cmd->count("--" + f.name) > 0) overrides[f.name] = sub.values.at(f.name);
    std::optional<std::filesystem::path> config;
    if (!sub.config.empty()) config = sub.config;
    const auto outcome = dynbool::run(lab, config, overrides, sub.out, std::cerr);
    if (outcome.exit_code == 0)
      for (const auto& f : outcome.files) std::cout << f.string() << '\n';
    return outcome.exit_code;
  }
  return 2;
}
