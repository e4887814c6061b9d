#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fedsim/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fedsim: deterministic federated-learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config_path, "key = value config file")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out_dir, "Output directory")->required();

  std::string spec_path;
  auto* sweep = app.add_subcommand("sweep", "Run a one-axis sweep over seeds");
  sweep->add_option("--spec", spec_path, "Sweep spec file")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();

  std::string labels_dir;
  auto* stats = app.add_subcommand("stats", "Summarize a directory of YOLO label files");
  stats->add_option("--labels", labels_dir, "Directory of .txt label files")->required();
  stats->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : fedsim::cli::kUsage;
  }

  const std::size_t threads = fedsim::cli::worker_threads_from_env();
  if (*run) return fedsim::cli::cmd_run(config_path, seed, out_dir, threads, std::cerr);
  if (*sweep) return fedsim::cli::cmd_sweep(spec_path, out_dir, threads, std::cerr);
  return fedsim::cli::cmd_stats(labels_dir, out_dir, std::cerr);
}
