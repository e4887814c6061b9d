#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/orchestrator.hpp"

namespace fedsim::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInvalid = 2, kIoError = 3 };

enum class SweepAxis { kRounds, kLocalEpochs, kFraction, kAggregator, kDistribution };

// A base config plus one varied axis. Sweep files are config files with three
// extra keys: `sweep.axis`, `sweep.values` and `sweep.seeds` (comma lists).
struct SweepSpec {
  ExperimentConfig base;
  SweepAxis axis = SweepAxis::kRounds;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
};

SweepSpec parse_sweep_spec(std::string_view text);

// `base` with the axis field set to `value` and the seed replaced; nothing
// else changes. Throws ConfigError if the value is invalid for the axis.
ExperimentConfig apply_sweep_cell(const ExperimentConfig& base, SweepAxis axis,
                                  std::string_view value, std::uint64_t seed);

const char* to_string(SweepAxis axis);

// FEDSIM_THREADS if set to a positive integer, else hardware concurrency.
std::size_t worker_threads_from_env();

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            const std::string& out_dir, std::size_t threads, std::ostream& err);
int cmd_sweep(const std::string& spec_path, const std::string& out_dir, std::size_t threads,
              std::ostream& err);
int cmd_stats(const std::string& labels_dir, const std::string& out_dir, std::ostream& err);

}  // namespace fedsim::cli
