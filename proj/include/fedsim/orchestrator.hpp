#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

// Linear cost model for simulated round duration.
struct CostModel {
  double t_example_s = 0.001;  // one example, one epoch, on one client
  double t_round_s = 1.0;      // fixed per-round overhead (broadcast, collection)

  bool operator==(const CostModel&) const = default;
};

struct ExperimentConfig {
  std::size_t rounds = 10;
  std::size_t num_clients = 20;
  double fraction = 0.5;
  std::size_t local_epochs = 8;
  std::size_t batch_size = 4;
  double local_lr = 0.001;
  AggregatorKind aggregator = AggregatorKind::kFedAdam;
  AggregatorOptions aggregator_options;
  PartitionScheme partition = PartitionScheme::kLabelShard;
  std::size_t classes_per_client = 2;
  double eval_fraction = 1.0;
  // Share of each client's data held out for global evaluation.
  double holdout_fraction = 0.2;
  ModelKind model = ModelKind::kMlp1;
  std::size_t hidden_dim = 16;
  // data.seed is ignored; the dataset seed is derived from `seed`.
  SyntheticSpec data{8, 8, 200, 0.05, 0};
  CostModel cost;
  // When false, metrics.csv carries 0 in wall_clock_s so reruns are byte-identical.
  bool record_wall_clock = false;
  std::uint64_t seed = 1;

  ModelSpec model_spec() const;
  // Throws ConfigError.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

struct RoundMetrics {
  std::size_t round_index = 0;  // 0-based
  std::vector<std::size_t> participants;
  double global_accuracy = 0.0;
  double mean_client_loss = 0.0;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  double simulated_duration_s = 0.0;
  double wall_clock_s = 0.0;
};

struct RunOptions {
  std::size_t num_threads = 1;
};

// max(1, round_half_even(fraction * num_clients)).
std::size_t participants_per_round(std::size_t num_clients, double fraction);

// Uniform sample without replacement, deterministic in (seed, round_index),
// returned in ascending id order.
std::vector<std::size_t> sample_clients(std::size_t num_clients, double fraction,
                                        std::size_t round_index, std::uint64_t seed);

struct ByteCounts {
  std::uint64_t down = 0;
  std::uint64_t up = 0;
};

// Full weights are broadcast to and returned by each of the m participants.
ByteCounts communication_bytes(std::uint64_t participants, std::uint64_t param_count,
                               std::uint64_t bytes_per_value);

// t_round + max_k (epochs * |train_k| * t_example) over the participants.
double simulated_duration(const CostModel& cost, std::size_t epochs,
                          std::span<const std::size_t> participant_train_sizes);

// Server-round state machine over one synthetic federation. Owns the dataset,
// partition, global model and aggregator state.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config, RunOptions options = {});

  // Runs the next round: sample, train locally (possibly in parallel),
  // aggregate in client-id order, evaluate on the hold-out pool.
  RoundMetrics run_round();

  const ExperimentConfig& config() const { return config_; }
  const ModelSpec& model_spec() const { return spec_; }
  const ModelParameters& global() const { return global_; }
  const AggregatorState& aggregator() const { return aggregator_; }
  const Partition& partition() const { return partition_; }
  std::size_t rounds_completed() const { return next_round_; }

  std::span<const LabeledExample> train_data(std::size_t client) const { return train_[client]; }
  std::span<const LabeledExample> holdout_data(std::size_t client) const {
    return holdout_[client];
  }

  // Seeds used for sampling and for a client's local training in a round.
  std::uint64_t sampling_seed() const;
  std::uint64_t local_train_seed(std::size_t round_index, std::size_t client) const;

 private:
  double evaluate(std::size_t round_index) const;

  ExperimentConfig config_;
  RunOptions options_;
  ModelSpec spec_;
  Partition partition_;
  std::vector<std::vector<LabeledExample>> train_;
  std::vector<std::vector<LabeledExample>> holdout_;
  ModelParameters global_;
  AggregatorState aggregator_;
  std::size_t next_round_ = 0;
};

std::vector<RoundMetrics> run_experiment(const ExperimentConfig& config,
                                         const RunOptions& options = {});

// Header `round,participants,accuracy,mean_loss,bytes_up,bytes_down,
// sim_duration_s,wall_clock_s`; participants are ';'-separated; round is 1-based.
void write_metrics_csv(std::ostream& out, std::span<const RoundMetrics> metrics,
                       bool include_wall_clock);

}  // namespace fedsim
