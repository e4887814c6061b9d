#include "fedsim/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fedsim/config.hpp"
#include "fedsim/error.hpp"

namespace fedsim::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kSmallConfig = R"(rounds = 3
num_clients = 4
fraction = 0.5
local_epochs = 2
local_lr = 0.05
model.hidden_dim = 4
data.num_classes = 4
data.input_dim = 3
data.examples_per_class = 20
seed = 5
)";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fedsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path Write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
    return p;
  }
  static std::string Read(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  static std::size_t Lines(const fs::path& p) {
    const std::string s = Read(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
  }

  fs::path dir_;
};

TEST_F(CliTest, RunWritesMetricsAndSummary) {
  const auto cfg = Write("exp.cfg", kSmallConfig);
  std::ostringstream err;
  ASSERT_EQ(cmd_run(cfg.string(), std::nullopt, (dir_ / "out").string(), 1, err), kOk) << err.str();
  EXPECT_EQ(Lines(dir_ / "out" / "metrics.csv"), 4u);  // header + 3 rounds
  const auto summary = nlohmann::json::parse(Read(dir_ / "out" / "summary.json"));
  EXPECT_EQ(summary["config"]["rounds"], 3);
  EXPECT_EQ(summary["rounds"].size(), 3u);
  EXPECT_EQ(parse_config(summary["config_text"].get<std::string>()), parse_config(kSmallConfig));
}

TEST_F(CliTest, RunIsByteReproducibleAndSeedOverrideApplies) {
  const auto cfg = Write("exp.cfg", kSmallConfig);
  std::ostringstream err;
  ASSERT_EQ(cmd_run(cfg.string(), std::nullopt, (dir_ / "a").string(), 1, err), kOk);
  ASSERT_EQ(cmd_run(cfg.string(), std::nullopt, (dir_ / "b").string(), 3, err), kOk);
  ASSERT_EQ(cmd_run(cfg.string(), 6, (dir_ / "c").string(), 1, err), kOk);
  EXPECT_EQ(Read(dir_ / "a" / "metrics.csv"), Read(dir_ / "b" / "metrics.csv"));
  EXPECT_NE(Read(dir_ / "a" / "metrics.csv"), Read(dir_ / "c" / "metrics.csv"));
  const auto summary = nlohmann::json::parse(Read(dir_ / "c" / "summary.json"));
  EXPECT_EQ(summary["config"]["seed"], 6);
}

TEST_F(CliTest, RunRejectsInvalidConfig) {
  const auto cfg = Write("bad.cfg", "rounds = 2\nfraction = 0\n");
  std::ostringstream err;
  EXPECT_EQ(cmd_run(cfg.string(), std::nullopt, (dir_ / "out").string(), 1, err), kInvalid);
  EXPECT_NE(err.str().find("line 2"), std::string::npos) << err.str();
  EXPECT_FALSE(fs::exists(dir_ / "out" / "metrics.csv"));
}

TEST_F(CliTest, RunReportsIoErrors) {
  std::ostringstream err;
  EXPECT_EQ(cmd_run((dir_ / "missing.cfg").string(), std::nullopt, (dir_ / "out").string(), 1, err),
            kIoError);
  const auto cfg = Write("exp.cfg", kSmallConfig);
  Write("blocker", "not a directory");
  EXPECT_EQ(cmd_run(cfg.string(), std::nullopt, (dir_ / "blocker" / "out").string(), 1, err),
            kIoError);
}

TEST_F(CliTest, SweepRoundsAxis) {
  const auto spec = Write("sweep.cfg", std::string(kSmallConfig) +
                                           "sweep.axis = rounds\nsweep.values = 2,5,10,20\n"
                                           "sweep.seeds = 1, 2, 3\n");
  std::ostringstream err;
  ASSERT_EQ(cmd_sweep(spec.string(), (dir_ / "sw").string(), 1, err), kOk) << err.str();
  EXPECT_EQ(Lines(dir_ / "sw" / "sweep.csv"), 13u);
  EXPECT_EQ(Read(dir_ / "sw" / "sweep.csv").substr(0, 52),
            "axis_value,seed,final_accuracy,total_sim_duration_s\n");
  EXPECT_EQ(Lines(dir_ / "sw" / "rounds_20_seed3" / "metrics.csv"), 21u);
}

TEST_F(CliTest, SweepFractionRecordsParticipantCounts) {
  const auto spec = Write("sweep.cfg",
                          "rounds = 1\nnum_clients = 20\nlocal_epochs = 1\n"
                          "sweep.axis = fraction\nsweep.values = 0.1,0.5,1.0\nsweep.seeds = 4\n");
  std::ostringstream err;
  ASSERT_EQ(cmd_sweep(spec.string(), (dir_ / "sw").string(), 1, err), kOk) << err.str();
  const std::map<std::string, std::size_t> expected{{"0.1", 2}, {"0.5", 10}, {"1.0", 20}};
  for (const auto& [value, count] : expected) {
    const auto summary =
        nlohmann::json::parse(Read(dir_ / "sw" / ("fraction_" + value + "_seed4") / "summary.json"));
    EXPECT_EQ(summary["rounds"][0]["participants"].size(), count) << value;
  }
}

TEST(SweepCells, AggregatorAxisChangesOnlyAggregator) {
  const auto spec = parse_sweep_spec(
      "sweep.axis = aggregator\nsweep.values = fedavg,fedadam,fedprox\nsweep.seeds = 9\n");
  ASSERT_EQ(spec.values.size(), 3u);
  for (const auto& v : spec.values) {
    ExperimentConfig cell = apply_sweep_cell(spec.base, spec.axis, v, 9);
    EXPECT_EQ(to_string(cell.aggregator), v);
    cell.aggregator = spec.base.aggregator;
    cell.seed = spec.base.seed;
    EXPECT_EQ(cell, spec.base);
  }
}

TEST(SweepCells, DistributionAxis) {
  const auto spec =
      parse_sweep_spec("sweep.axis = distribution\nsweep.values = iid,label_shard\nsweep.seeds = 1,2\n");
  EXPECT_EQ(apply_sweep_cell(spec.base, spec.axis, "iid", 1).partition, PartitionScheme::kIid);
  EXPECT_EQ(spec.seeds, (std::vector<std::uint64_t>{1, 2}));
}

TEST(SweepCells, InvalidSpecs) {
  EXPECT_THROW(parse_sweep_spec("sweep.values = 1\nsweep.seeds = 1\n"), ConfigError);
  EXPECT_THROW(parse_sweep_spec("sweep.axis = rounds\nsweep.seeds = 1\n"), ConfigError);
  EXPECT_THROW(parse_sweep_spec("sweep.axis = rounds\nsweep.values = 2\n"), ConfigError);
  EXPECT_THROW(parse_sweep_spec("sweep.axis = lr\nsweep.values = 2\nsweep.seeds = 1\n"), ConfigError);
  EXPECT_THROW(parse_sweep_spec("sweep.axis = rounds\nsweep.values = \nsweep.seeds = 1\n"),
               ConfigError);
  EXPECT_THROW(parse_sweep_spec("sweep.axis = fraction\nsweep.values = 0.5,0\nsweep.seeds = 1\n"),
               ConfigError);
  EXPECT_THROW(parse_sweep_spec("sweep.axis = rounds\nsweep.values = 2\nsweep.seeds = x\n"),
               ConfigError);
}

TEST_F(CliTest, StatsEmptyDirectory) {
  fs::create_directories(dir_ / "labels");
  std::ostringstream err;
  ASSERT_EQ(cmd_stats((dir_ / "labels").string(), (dir_ / "out").string(), err), kOk);
  EXPECT_EQ(Read(dir_ / "out" / "class_histogram.csv"), "class_id,count\n");
  EXPECT_EQ(Read(dir_ / "out" / "boxes.csv"), "x_center,y_center,width,height\n");
}

TEST_F(CliTest, StatsSingleFile) {
  Write("labels/img1.txt", "3 0.5 0.5 0.2 0.1");
  Write("labels/notes.md", "ignored");
  std::ostringstream err;
  ASSERT_EQ(cmd_stats((dir_ / "labels").string(), (dir_ / "out").string(), err), kOk);
  EXPECT_EQ(Read(dir_ / "out" / "class_histogram.csv"), "class_id,count\n3,1\n");
  EXPECT_EQ(Read(dir_ / "out" / "boxes.csv"), "x_center,y_center,width,height\n0.5,0.5,0.2,0.1\n");
}

TEST_F(CliTest, StatsMalformedLineCitesFileAndLine) {
  Write("labels/a.txt", "0 0.5 0.5 0.1 0.1\n");
  const auto bad = Write("labels/b.txt", "1 0.5 0.5 0.1 0.1\n1 0.5 0.5\n");
  std::ostringstream err;
  EXPECT_EQ(cmd_stats((dir_ / "labels").string(), (dir_ / "out").string(), err), kInvalid);
  EXPECT_NE(err.str().find(bad.string() + ":2"), std::string::npos) << err.str();
}

TEST_F(CliTest, StatsMissingDirectory) {
  std::ostringstream err;
  EXPECT_EQ(cmd_stats((dir_ / "nope").string(), (dir_ / "out").string(), err), kIoError);
}

TEST_F(CliTest, BinaryExitCodesAndThreadEnv) {
  const auto cfg = Write("exp.cfg", kSmallConfig);
  const auto bad = Write("bad.cfg", "fraction = 0\n");
  const std::string bin = FEDSIM_BINARY;
  auto run = [](const std::string& cmd) {
    const int status = std::system((cmd + " 2>/dev/null").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(run("FEDSIM_THREADS=1 " + bin + " run --config " + cfg.string() + " --out " +
                (dir_ / "t1").string()),
            0);
  EXPECT_EQ(run("FEDSIM_THREADS=8 " + bin + " run --config " + cfg.string() + " --out " +
                (dir_ / "t8").string()),
            0);
  EXPECT_EQ(Read(dir_ / "t1" / "metrics.csv"), Read(dir_ / "t8" / "metrics.csv"));
  EXPECT_EQ(run(bin + " run --config " + bad.string() + " --out " + (dir_ / "x").string()), 2);
  EXPECT_EQ(run(bin + " run --config " + (dir_ / "nope.cfg").string() + " --out " +
                (dir_ / "x").string()),
            3);
  EXPECT_NE(run(bin + " frobnicate"), 0);
}

TEST(WorkerThreads, EnvOverride) {
  setenv("FEDSIM_THREADS", "3", 1);
  EXPECT_EQ(worker_threads_from_env(), 3u);
  setenv("FEDSIM_THREADS", "zero", 1);
  EXPECT_GE(worker_threads_from_env(), 1u);
  unsetenv("FEDSIM_THREADS");
  EXPECT_GE(worker_threads_from_env(), 1u);
}

}  // namespace
}  // namespace fedsim::cli
