#include "fedsim/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "fedsim/error.hpp"
#include "fedsim/format.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

// Stream tags for derive_seed.
enum : std::uint64_t {
  kDataStream = 1,
  kPartitionStream = 2,
  kHoldoutStream = 3,
  kSamplingStream = 4,
  kLocalTrainStream = 5,
  kInitStream = 6,
  kEvalStream = 7,
};

bool in_unit_interval(double v) { return v > 0.0 && v <= 1.0; }

// Runs fn(i) for i in [0, n) on up to `threads` workers. Rethrows the first
// exception after all workers have joined.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

ModelSpec ExperimentConfig::model_spec() const {
  return ModelSpec{model, data.input_dim, data.num_classes, hidden_dim};
}

void ExperimentConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (!in_unit_interval(fraction)) throw ConfigError("fraction must be in (0, 1]");
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(local_lr > 0.0 && std::isfinite(local_lr))) throw ConfigError("local_lr must be positive");
  if (!in_unit_interval(eval_fraction)) throw ConfigError("eval_fraction must be in (0, 1]");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must be in (0, 1)");
  }
  if (partition == PartitionScheme::kLabelShard && classes_per_client < 1) {
    throw ConfigError("partition.classes_per_client must be >= 1");
  }
  if (!(cost.t_example_s >= 0.0 && std::isfinite(cost.t_example_s)) ||
      !(cost.t_round_s >= 0.0 && std::isfinite(cost.t_round_s))) {
    throw ConfigError("cost parameters must be non-negative");
  }
  try {
    data.validate();
    model_spec().validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  make_aggregator(aggregator, aggregator_options, 0);
}

std::size_t participants_per_round(std::size_t num_clients, double fraction) {
  // nearbyint honours the default FE_TONEAREST mode: ties go to even.
  const double m = std::nearbyint(fraction * static_cast<double>(num_clients));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(m, 0.0)), 1, num_clients);
}

std::vector<std::size_t> sample_clients(std::size_t num_clients, double fraction,
                                        std::size_t round_index, std::uint64_t seed) {
  if (num_clients == 0) throw ContractError("sample_clients: no clients");
  if (!in_unit_interval(fraction)) throw ContractError("sample_clients: fraction outside (0,1]");
  const std::size_t m = participants_per_round(num_clients, fraction);
  std::vector<std::size_t> ids(num_clients);
  for (std::size_t i = 0; i < num_clients; ++i) ids[i] = i;
  // Partial Fisher-Yates: the first m slots are a uniform m-subset.
  Rng rng(derive_seed(seed, {round_index}));
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(num_clients - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ByteCounts communication_bytes(std::uint64_t participants, std::uint64_t param_count,
                               std::uint64_t bytes_per_value) {
  const std::uint64_t b = participants * param_count * bytes_per_value;
  return {b, b};
}

double simulated_duration(const CostModel& cost, std::size_t epochs,
                          std::span<const std::size_t> participant_train_sizes) {
  double slowest = 0.0;
  for (std::size_t n : participant_train_sizes) {
    slowest = std::max(slowest, static_cast<double>(epochs) * static_cast<double>(n) *
                                    cost.t_example_s);
  }
  return cost.t_round_s + slowest;
}

Experiment::Experiment(ExperimentConfig config, RunOptions options)
    : config_(std::move(config)), options_(options) {
  config_.validate();
  spec_ = config_.model_spec();

  SyntheticSpec data_spec = config_.data;
  data_spec.seed = derive_seed(config_.seed, {kDataStream});
  const auto dataset = generate_synthetic(data_spec);

  const std::uint64_t partition_seed = derive_seed(config_.seed, {kPartitionStream});
  try {
    if (config_.partition == PartitionScheme::kIid) {
      partition_ = partition_iid(dataset.size(), config_.num_clients, partition_seed);
    } else {
      std::vector<std::size_t> labels;
      labels.reserve(dataset.size());
      for (const auto& ex : dataset) labels.push_back(ex.label);
      partition_ = partition_label_shard(labels, config_.num_clients,
                                         config_.classes_per_client, partition_seed);
    }
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }

  // Seeded per-client hold-out split; both halves keep assignment order.
  train_.resize(config_.num_clients);
  holdout_.resize(config_.num_clients);
  for (std::size_t k = 0; k < config_.num_clients; ++k) {
    const auto local = client_dataset(partition_, dataset, k);
    const auto n_hold = static_cast<std::size_t>(
        std::floor(config_.holdout_fraction * static_cast<double>(local.size())));
    if (n_hold == 0 || n_hold >= local.size()) {
      throw ConfigError("client " + std::to_string(k) + " has " + std::to_string(local.size()) +
                        " examples; too few for a train/hold-out split");
    }
    const auto order = shuffled_indices(local.size(), derive_seed(config_.seed, {kHoldoutStream, k}));
    std::vector<bool> held(local.size(), false);
    for (std::size_t i = 0; i < n_hold; ++i) held[order[i]] = true;
    for (std::size_t i = 0; i < local.size(); ++i) {
      (held[i] ? holdout_[k] : train_[k]).push_back(local[i]);
    }
  }

  global_ = init_params(spec_, derive_seed(config_.seed, {kInitStream}));
  aggregator_ = make_aggregator(config_.aggregator, config_.aggregator_options, global_.size());
}

std::uint64_t Experiment::sampling_seed() const {
  return derive_seed(config_.seed, {kSamplingStream});
}

std::uint64_t Experiment::local_train_seed(std::size_t round_index, std::size_t client) const {
  return derive_seed(config_.seed, {kLocalTrainStream, round_index, client});
}

double Experiment::evaluate(std::size_t round_index) const {
  std::vector<std::size_t> evaluators;
  if (config_.eval_fraction >= 1.0) {
    evaluators.resize(config_.num_clients);
    for (std::size_t k = 0; k < evaluators.size(); ++k) evaluators[k] = k;
  } else {
    evaluators = sample_clients(config_.num_clients, config_.eval_fraction, round_index,
                                derive_seed(config_.seed, {kEvalStream}));
  }
  std::vector<LabeledExample> pool;
  for (std::size_t k : evaluators) pool.insert(pool.end(), holdout_[k].begin(), holdout_[k].end());
  return evaluate_classifier(spec_, global_, pool);
}

RoundMetrics Experiment::run_round() {
  const auto started = std::chrono::steady_clock::now();
  const std::size_t round = next_round_;

  RoundMetrics metrics;
  metrics.round_index = round;
  metrics.participants =
      sample_clients(config_.num_clients, config_.fraction, round, sampling_seed());
  const auto& participants = metrics.participants;

  LocalTrainOptions base;
  base.epochs = config_.local_epochs;
  base.batch_size = config_.batch_size;
  base.lr = config_.local_lr;
  base.prox_mu = aggregator_.client_prox_mu();

  std::vector<ClientUpdate> updates(participants.size());
  parallel_for(participants.size(), options_.num_threads, [&](std::size_t i) {
    const std::size_t k = participants[i];
    LocalTrainOptions opts = base;
    opts.seed = local_train_seed(round, k);
    TrainResult trained = local_train(spec_, global_, train_[k], opts, global_);
    updates[i] = ClientUpdate{k, std::move(trained.params), train_[k].size(), trained.final_loss};
  });

  AggregationResult next = aggregate(aggregator_, global_, updates);
  global_ = std::move(next.global);
  aggregator_ = std::move(next.state);

  double loss_sum = 0.0;
  std::vector<std::size_t> sizes;
  for (const auto& u : updates) {
    loss_sum += u.train_loss;
    sizes.push_back(u.num_examples);
  }
  metrics.mean_client_loss = loss_sum / static_cast<double>(updates.size());
  metrics.global_accuracy = evaluate(round);
  const ByteCounts bytes = communication_bytes(participants.size(), global_.size(), sizeof(double));
  metrics.bytes_up = bytes.up;
  metrics.bytes_down = bytes.down;
  metrics.simulated_duration_s = simulated_duration(config_.cost, config_.local_epochs, sizes);
  metrics.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  ++next_round_;
  return metrics;
}

std::vector<RoundMetrics> run_experiment(const ExperimentConfig& config,
                                         const RunOptions& options) {
  Experiment experiment(config, options);
  std::vector<RoundMetrics> out;
  out.reserve(config.rounds);
  for (std::size_t r = 0; r < config.rounds; ++r) out.push_back(experiment.run_round());
  return out;
}

void write_metrics_csv(std::ostream& out, std::span<const RoundMetrics> metrics,
                       bool include_wall_clock) {
  out << "round,participants,accuracy,mean_loss,bytes_up,bytes_down,sim_duration_s,wall_clock_s\n";
  for (const auto& m : metrics) {
    out << (m.round_index + 1) << ',';
    for (std::size_t i = 0; i < m.participants.size(); ++i) {
      out << (i == 0 ? "" : ";") << m.participants[i];
    }
    out << ',' << format_shortest(m.global_accuracy) << ',' << format_shortest(m.mean_client_loss)
        << ',' << m.bytes_up << ',' << m.bytes_down << ','
        << format_shortest(m.simulated_duration_s) << ','
        << format_shortest(include_wall_clock ? m.wall_clock_s : 0.0) << '\n';
  }
}

}  // namespace fedsim
