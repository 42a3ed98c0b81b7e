#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "geocon/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Geometric optimal-control analysis of scenario files"};
  std::string command;
  std::string scenario_path;
  std::string out_path;
  std::string covector;
  double time = 0.0;
  double step = 0.0;
  std::uint64_t seed = 0;
  app.add_option("command", command, "bracket | flow | variation | cone | pca | extremal | audit | mech-check")
      ->required()
      ->check(CLI::IsMember(geocon::command_names()));
  app.add_option("scenario", scenario_path, "scenario JSON file")->required();
  app.add_option("--out", out_path, "write the report or CSV here instead of stdout");
  auto* cov_opt = app.add_option("--covector", covector, "initial covector c0,c1,...");
  auto* time_opt = app.add_option("--time", time, "analysis time");
  auto* step_opt = app.add_option("--step", step, "integration step");
  app.add_option("--seed", seed, "seed echoed into the report");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? geocon::kExitOk : geocon::kExitError;
  }

  try {
    geocon::CliOptions opt;
    if (cov_opt->count()) opt.covector = geocon::parse_number_list(covector);
    if (time_opt->count()) opt.time = time;
    if (step_opt->count()) opt.step = step;
    opt.seed = seed;
    geocon::log(geocon::LogLevel::Info, "loading " + scenario_path);
    const geocon::Scenario sc = geocon::load_scenario(scenario_path);
    geocon::log(geocon::LogLevel::Info, "running " + command + " on " + sc.name);
    const geocon::CommandResult res = geocon::run_command(command, sc, opt);
    if (out_path.empty()) {
      std::cout << res.text;
    } else {
      std::ofstream out(out_path);
      if (!out) throw geocon::InvalidArgument("cannot write '" + out_path + "'");
      out << res.text;
    }
    if (res.exit_code == geocon::kExitVerdict)
      geocon::log(geocon::LogLevel::Warn, command + ": analysis verdict failed");
    return res.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "geocon " << command << ": error: " << e.what() << "\n";
    return geocon::kExitError;
  }
}
