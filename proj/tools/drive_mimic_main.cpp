// drive-mimic: rule-based demo generation, adversarial imitation training,
// evaluation and report merging for the 2D highway/racetrack laboratory.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dm/commands.hpp"

namespace {

dm::io::RunConfig load_config(const std::string& path) {
  return dm::io::RunConfig::load_file(path);
}

int run(int argc, char** argv) {
  CLI::App app{"drive-mimic: multi-agent driving imitation laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed = 0;
  std::string out_dir = "runs/out";

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    if (needs_config)
      cmd->add_option("--config", config_path, "run configuration JSON")
          ->required();
    cmd->add_option("--seed", seed, "master seed (default 0)");
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* gen = app.add_subcommand("gen-demos",
                                     "simulate rule-based experts and write "
                                     "train/val trajectory files");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "train a driving policy");
  add_common(train);
  std::string algorithm;
  std::string demos_path;
  bool resume = false;
  train->add_option("--algo", algorithm,
                    "bc|gail|psgail|rail|infogail|burn|sg")
      ->required();
  train->add_option("--demos", demos_path, "trajectory csv")->required();
  train->add_flag("--resume", resume, "continue from the latest saved state");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  std::string checkpoint;
  std::string eval_demos;
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
  eval->add_option("--demos", eval_demos, "trajectory csv")->required();

  CLI::App* report =
      app.add_subcommand("report", "merge evaluation reports side by side");
  std::vector<std::string> run_dirs;
  report->add_option("dirs", run_dirs, "evaluation run directories")
      ->required();
  report->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      dm::io::cmd_gen_demos(load_config(config_path), out_dir, seed);
    } else if (train->parsed()) {
      dm::io::cmd_train(load_config(config_path), algorithm, demos_path,
                        out_dir, seed, resume);
    } else if (eval->parsed()) {
      dm::io::cmd_eval(load_config(config_path), checkpoint, eval_demos,
                       out_dir, seed);
    } else if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(),
                                              run_dirs.end());
      dm::io::cmd_report(dirs, out_dir);
    }
  } catch (const dm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
