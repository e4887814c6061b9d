#include "fedsim/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fedsim/config.hpp"
#include "fedsim/error.hpp"
#include "fedsim/format.hpp"
#include "fedsim/yolo.hpp"

namespace fedsim::cli {
namespace {

namespace fs = std::filesystem;

// Raised for filesystem problems so commands can map them to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void write_atomic(const fs::path& path, const std::string& contents) {
  try {
    write_file_atomic(path.string(), contents);
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = s.find(',');
    std::string_view item = s.substr(0, comma);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

struct RunOutput {
  std::vector<RoundMetrics> metrics;
  double wall_clock_s = 0.0;
};

RunOutput run_and_write(const ExperimentConfig& config, const fs::path& out_dir,
                        std::size_t threads) {
  const auto started = std::chrono::steady_clock::now();
  RunOutput result;
  result.metrics = run_experiment(config, RunOptions{threads});
  result.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  ensure_dir(out_dir);
  std::ostringstream csv;
  write_metrics_csv(csv, result.metrics, config.record_wall_clock);
  write_atomic(out_dir / "metrics.csv", csv.str());

  double total_sim = 0.0;
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& m : result.metrics) {
    total_sim += m.simulated_duration_s;
    rounds.push_back({{"round", m.round_index + 1},
                      {"participants", m.participants},
                      {"accuracy", m.global_accuracy},
                      {"wall_clock_s", m.wall_clock_s}});
  }
  nlohmann::json summary = {
      {"config", config_to_json(config)},
      {"config_text", config_to_text(config)},
      {"rounds", rounds},
      {"final_accuracy", result.metrics.back().global_accuracy},
      {"total_sim_duration_s", total_sim},
      {"total_wall_clock_s", result.wall_clock_s},
      {"worker_threads", threads},
  };
  write_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
  return result;
}

}  // namespace

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kRounds:
      return "rounds";
    case SweepAxis::kLocalEpochs:
      return "local_epochs";
    case SweepAxis::kFraction:
      return "fraction";
    case SweepAxis::kAggregator:
      return "aggregator";
    case SweepAxis::kDistribution:
      return "distribution";
  }
  return "?";
}

SweepSpec parse_sweep_spec(std::string_view text) {
  SweepSpec spec;
  std::optional<ConfigEntry> axis_entry;
  std::optional<ConfigEntry> values_entry;
  std::optional<ConfigEntry> seeds_entry;
  for (const auto& entry : read_config_entries(text)) {
    if (entry.key == "sweep.axis") {
      axis_entry = entry;
    } else if (entry.key == "sweep.values") {
      values_entry = entry;
    } else if (entry.key == "sweep.seeds") {
      seeds_entry = entry;
    } else {
      apply_config_entry(spec.base, entry);
    }
  }
  if (!axis_entry) throw ConfigError("missing key 'sweep.axis'");
  if (!values_entry) throw ConfigError("missing key 'sweep.values'");
  if (!seeds_entry) throw ConfigError("missing key 'sweep.seeds'");

  bool known = false;
  for (auto axis : {SweepAxis::kRounds, SweepAxis::kLocalEpochs, SweepAxis::kFraction,
                    SweepAxis::kAggregator, SweepAxis::kDistribution}) {
    if (axis_entry->value == to_string(axis)) {
      spec.axis = axis;
      known = true;
    }
  }
  if (!known) {
    throw ConfigError(
        "sweep.axis: expected rounds, local_epochs, fraction, aggregator or distribution",
        axis_entry->line);
  }

  spec.values = split_list(values_entry->value);
  if (spec.values.empty()) throw ConfigError("sweep.values is empty", values_entry->line);
  for (const auto& s : split_list(seeds_entry->value)) {
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("sweep.seeds: bad seed '" + s + "'", seeds_entry->line);
    }
    spec.seeds.push_back(seed);
  }
  if (spec.seeds.empty()) throw ConfigError("sweep.seeds is empty", seeds_entry->line);

  // Every cell must produce a valid config.
  for (const auto& v : spec.values) {
    try {
      apply_sweep_cell(spec.base, spec.axis, v, spec.seeds.front());
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), values_entry->line);
    }
  }
  return spec;
}

ExperimentConfig apply_sweep_cell(const ExperimentConfig& base, SweepAxis axis,
                                  std::string_view value, std::uint64_t seed) {
  ExperimentConfig config = base;
  ConfigEntry entry{"", std::string(value), 0};
  switch (axis) {
    case SweepAxis::kRounds:
      entry.key = "rounds";
      break;
    case SweepAxis::kLocalEpochs:
      entry.key = "local_epochs";
      break;
    case SweepAxis::kFraction:
      entry.key = "fraction";
      break;
    case SweepAxis::kAggregator:
      entry.key = "aggregator";
      break;
    case SweepAxis::kDistribution:
      entry.key = "partition";
      break;
  }
  apply_config_entry(config, entry);
  config.seed = seed;
  return config;
}

std::size_t worker_threads_from_env() {
  if (const char* env = std::getenv("FEDSIM_THREADS")) {
    std::size_t n = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc() && ptr == s.data() + s.size() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            const std::string& out_dir, std::size_t threads, std::ostream& err) {
  try {
    ExperimentConfig config = parse_config(read_file(config_path));
    if (seed_override) config.seed = *seed_override;
    run_and_write(config, out_dir, threads);
    return kOk;
  } catch (const ConfigError& e) {
    err << config_path << ": " << e.what() << '\n';
    return kInvalid;
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return kIoError;
  }
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir, std::size_t threads,
              std::ostream& err) {
  try {
    const SweepSpec spec = parse_sweep_spec(read_file(spec_path));
    const fs::path root(out_dir);
    ensure_dir(root);
    std::ostringstream table;
    table << "axis_value,seed,final_accuracy,total_sim_duration_s\n";
    for (const auto& value : spec.values) {
      for (std::uint64_t seed : spec.seeds) {
        const ExperimentConfig config = apply_sweep_cell(spec.base, spec.axis, value, seed);
        const fs::path cell =
            root / (std::string(to_string(spec.axis)) + "_" + value + "_seed" + std::to_string(seed));
        const RunOutput out = run_and_write(config, cell, threads);
        double total_sim = 0.0;
        for (const auto& m : out.metrics) total_sim += m.simulated_duration_s;
        table << value << ',' << seed << ',' << format_shortest(out.metrics.back().global_accuracy)
              << ',' << format_shortest(total_sim) << '\n';
      }
    }
    write_atomic(root / "sweep.csv", table.str());
    return kOk;
  } catch (const ConfigError& e) {
    err << spec_path << ": " << e.what() << '\n';
    return kInvalid;
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return kIoError;
  }
}

int cmd_stats(const std::string& labels_dir, const std::string& out_dir, std::ostream& err) {
  try {
    const fs::path dir(labels_dir);
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + labels_dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());

    std::vector<yolo::AnnotationRecord> records;
    for (const auto& file : files) {
      yolo::AnnotationRecord rec;
      rec.image_path = file.stem().string();
      try {
        rec.boxes = yolo::parse_label_file(read_file(file));
      } catch (const ParseError& e) {
        err << file.string() << ':' << e.line() << ": " << e.what() << '\n';
        return kInvalid;
      }
      records.push_back(std::move(rec));
    }

    const yolo::CorpusStats stats = yolo::corpus_stats(records);
    const fs::path out(out_dir);
    ensure_dir(out);
    std::ostringstream hist;
    yolo::write_class_histogram_csv(hist, stats);
    write_atomic(out / "class_histogram.csv", hist.str());
    std::ostringstream boxes;
    yolo::write_box_points_csv(boxes, stats);
    write_atomic(out / "boxes.csv", boxes.str());
    return kOk;
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << e.what() << '\n';
    return kIoError;
  }
}

}  // namespace fedsim::cli
