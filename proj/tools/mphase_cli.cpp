// mphase <scenario> --config path.json [--output-dir dir]
//
// Exit codes: 0 success, 2 invalid configuration, 1 runtime failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "mphase/io/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Material-phase simulation scenarios"};
  app.set_version_flag("--version", std::string(MPHASE_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> output_dir;
  for (const char* name : mphase::io::scenario_names) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " scenario");
    sub->add_option("--config", config_path, "scenario configuration (JSON)")->required();
    sub->add_option("--output-dir", output_dir,
                    std::string("output directory (default: $") + mphase::io::output_dir_env + " or .)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string scenario = app.get_subcommands().front()->get_name();

  mphase::io::ScenarioConfig cfg;
  try {
    cfg = mphase::io::load_config(config_path);
    if (cfg.scenario != scenario) {
      throw mphase::io::ValidationError(config_path + ": config describes scenario \"" + cfg.scenario +
                                        "\" but \"" + scenario + "\" was requested");
    }
  } catch (const mphase::io::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  }

  try {
    const auto dir = mphase::io::resolve_output_dir(output_dir);
    const auto manifest = mphase::io::run_scenario(cfg, dir);
    std::cout << (dir / manifest.outputs.back()).string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
