// egocomm: staged pipeline driver.
//
//   egocomm <stage> [--config FILE] [--seed N] [--jobs N] [--stage-dir DIR] [--data-root DIR]
//   egocomm all     runs gen through report in order
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "egocomm/config.hpp"
#include "egocomm/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
  using namespace egocomm;
  CLI::App app{"Egocentric speech pipeline: synthetic data, diarizer training, behavior and arousal analysis"};
  app.require_subcommand(1);

  std::string config_path, stage_dir, data_root;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--seed", seed, "Seed (overrides [run] seed)");
  app.add_option("--jobs", jobs, "Worker threads (overrides [run] jobs)");
  app.add_option("--stage-dir", stage_dir, "Output root holding one directory per stage");
  app.add_option("--data-root", data_root, "Data root (overrides [paths] data_root and $EGOCOMM_DATA_ROOT)");
  app.fallthrough();

  for (auto name : pipeline::kStages) app.add_subcommand(std::string(name), "Run the " + std::string(name) + " stage");
  app.add_subcommand("all", "Run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::Config);
  }

  try {
    PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (!data_root.empty())
      config.data_root = data_root;
    else if (config.data_root.empty())
      config.data_root = std::getenv(kDataRootEnv) ? std::getenv(kDataRootEnv) : "data";
    if (!stage_dir.empty())
      config.output_root = stage_dir;
    else if (config.output_root.empty())
      config.output_root = config.data_root / "runs";
    if (seed) config.seed = *seed;
    if (jobs) config.jobs = *jobs;

    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "all") {
      for (auto stage : pipeline::kStages) {
        std::cerr << "egocomm: " << stage << '\n';
        pipeline::run_stage(stage, config);
      }
    } else {
      pipeline::run_stage(name, config);
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "egocomm: " << e.what() << '\n';
    return static_cast<int>(exit_code_for(e.code()));
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "egocomm: IoError: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Data);
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
