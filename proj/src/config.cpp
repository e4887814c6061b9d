#include "fedsim/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fedsim/error.hpp"
#include "fedsim/format.hpp"

namespace fedsim {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(const ConfigEntry& e) {
  T v{};
  const char* begin = e.value.data();
  const char* end = begin + e.value.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (e.value.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(e.key + ": cannot parse '" + e.value + "' as a number", e.line);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw ConfigError(e.key + ": value must be finite", e.line);
  }
  return v;
}

bool parse_bool(const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ConfigError(e.key + ": expected true or false", e.line);
}

using Setter = std::function<void(ExperimentConfig&, const ConfigEntry&)>;

template <typename T>
Setter number_setter(T ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const ConfigEntry& e) { c.*field = parse_number<T>(e); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const auto* table = new std::map<std::string, Setter, std::less<>>{
      {"rounds", number_setter(&ExperimentConfig::rounds)},
      {"num_clients", number_setter(&ExperimentConfig::num_clients)},
      {"fraction", number_setter(&ExperimentConfig::fraction)},
      {"local_epochs", number_setter(&ExperimentConfig::local_epochs)},
      {"batch_size", number_setter(&ExperimentConfig::batch_size)},
      {"local_lr", number_setter(&ExperimentConfig::local_lr)},
      {"eval_fraction", number_setter(&ExperimentConfig::eval_fraction)},
      {"holdout_fraction", number_setter(&ExperimentConfig::holdout_fraction)},
      {"seed", number_setter(&ExperimentConfig::seed)},
      {"record_wall_clock",
       [](ExperimentConfig& c, const ConfigEntry& e) { c.record_wall_clock = parse_bool(e); }},
      {"aggregator",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         const auto kind = parse_aggregator_kind(e.value);
         if (!kind) throw ConfigError("aggregator: expected fedavg, fedprox or fedadam", e.line);
         c.aggregator = *kind;
       }},
      {"aggregator.mu",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.aggregator_options.prox_mu = parse_number<double>(e);
       }},
      {"aggregator.server_lr",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.aggregator_options.server_lr = parse_number<double>(e);
       }},
      {"aggregator.beta1",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.aggregator_options.beta1 = parse_number<double>(e);
       }},
      {"aggregator.beta2",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.aggregator_options.beta2 = parse_number<double>(e);
       }},
      {"aggregator.tau",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.aggregator_options.tau = parse_number<double>(e);
       }},
      {"partition",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         if (e.value == "iid") {
           c.partition = PartitionScheme::kIid;
         } else if (e.value == "label_shard") {
           c.partition = PartitionScheme::kLabelShard;
         } else {
           throw ConfigError("partition: expected iid or label_shard", e.line);
         }
       }},
      {"partition.classes_per_client", number_setter(&ExperimentConfig::classes_per_client)},
      {"model",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         if (e.value == "logreg") {
           c.model = ModelKind::kLogisticRegression;
         } else if (e.value == "mlp1") {
           c.model = ModelKind::kMlp1;
         } else {
           throw ConfigError("model: expected logreg or mlp1", e.line);
         }
       }},
      {"model.hidden_dim", number_setter(&ExperimentConfig::hidden_dim)},
      {"data.num_classes",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.data.num_classes = parse_number<std::size_t>(e);
       }},
      {"data.input_dim",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.data.input_dim = parse_number<std::size_t>(e);
       }},
      {"data.examples_per_class",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.data.examples_per_class = parse_number<std::size_t>(e);
       }},
      {"data.cluster_spread",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.data.cluster_spread = parse_number<double>(e);
       }},
      {"cost.t_example_s",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.cost.t_example_s = parse_number<double>(e);
       }},
      {"cost.t_round_s",
       [](ExperimentConfig& c, const ConfigEntry& e) {
         c.cost.t_round_s = parse_number<double>(e);
       }},
  };
  return *table;
}

}  // namespace

std::vector<ConfigEntry> read_config_entries(std::string_view text) {
  std::vector<ConfigEntry> entries;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    ConfigEntry e{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))),
                  line_no};
    if (e.key.empty()) throw ConfigError("missing key", line_no);
    if (!seen.insert(e.key).second) throw ConfigError("duplicate key '" + e.key + "'", line_no);
    entries.push_back(std::move(e));
  }
  return entries;
}

void apply_config_entry(ExperimentConfig& config, const ConfigEntry& entry) {
  const auto& table = setters();
  const auto it = table.find(entry.key);
  if (it == table.end()) throw ConfigError("unknown key '" + entry.key + "'", entry.line);
  it->second(config, entry);
  // Every constraint is on a single field and the defaults are valid, so a
  // failure here is attributable to this entry.
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), entry.line);
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  for (const auto& entry : read_config_entries(text)) apply_config_entry(config, entry);
  return config;
}

std::string config_to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  const auto& a = c.aggregator_options;
  out << "rounds = " << c.rounds << '\n'
      << "num_clients = " << c.num_clients << '\n'
      << "fraction = " << format_shortest(c.fraction) << '\n'
      << "local_epochs = " << c.local_epochs << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "local_lr = " << format_shortest(c.local_lr) << '\n'
      << "eval_fraction = " << format_shortest(c.eval_fraction) << '\n'
      << "holdout_fraction = " << format_shortest(c.holdout_fraction) << '\n'
      << "seed = " << c.seed << '\n'
      << "record_wall_clock = " << (c.record_wall_clock ? "true" : "false") << '\n'
      << "aggregator = " << to_string(c.aggregator) << '\n'
      << "aggregator.mu = " << format_shortest(a.prox_mu) << '\n'
      << "aggregator.server_lr = " << format_shortest(a.server_lr) << '\n'
      << "aggregator.beta1 = " << format_shortest(a.beta1) << '\n'
      << "aggregator.beta2 = " << format_shortest(a.beta2) << '\n'
      << "aggregator.tau = " << format_shortest(a.tau) << '\n'
      << "partition = " << to_string(c.partition) << '\n'
      << "partition.classes_per_client = " << c.classes_per_client << '\n'
      << "model = " << to_string(c.model) << '\n'
      << "model.hidden_dim = " << c.hidden_dim << '\n'
      << "data.num_classes = " << c.data.num_classes << '\n'
      << "data.input_dim = " << c.data.input_dim << '\n'
      << "data.examples_per_class = " << c.data.examples_per_class << '\n'
      << "data.cluster_spread = " << format_shortest(c.data.cluster_spread) << '\n'
      << "cost.t_example_s = " << format_shortest(c.cost.t_example_s) << '\n'
      << "cost.t_round_s = " << format_shortest(c.cost.t_round_s) << '\n';
  return out.str();
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  const auto& a = c.aggregator_options;
  nlohmann::json aggregator = {{"kind", to_string(c.aggregator)}};
  switch (c.aggregator) {
    case AggregatorKind::kFedAvg:
      break;
    case AggregatorKind::kFedProx:
      aggregator["mu"] = a.prox_mu;
      break;
    case AggregatorKind::kFedAdam:
      aggregator["server_lr"] = a.server_lr;
      aggregator["beta1"] = a.beta1;
      aggregator["beta2"] = a.beta2;
      aggregator["tau"] = a.tau;
      aggregator["bias_correction"] = false;
      break;
  }
  nlohmann::json partition = {{"scheme", to_string(c.partition)}};
  if (c.partition == PartitionScheme::kLabelShard) {
    partition["classes_per_client"] = c.classes_per_client;
    partition["construction"] = "label-sorted single-label shards, classes_per_client per client";
  }
  nlohmann::json model = {{"kind", to_string(c.model)},
                          {"input_dim", c.data.input_dim},
                          {"num_classes", c.data.num_classes}};
  if (c.model == ModelKind::kMlp1) {
    model["hidden_dim"] = c.hidden_dim;
    model["activation"] = "tanh";
  }
  return {
      {"rounds", c.rounds},
      {"num_clients", c.num_clients},
      {"fraction", c.fraction},
      {"participants_per_round", participants_per_round(c.num_clients, c.fraction)},
      {"local_epochs", c.local_epochs},
      {"batch_size", c.batch_size},
      {"local_lr", c.local_lr},
      {"local_optimizer", "sgd"},
      {"eval_fraction", c.eval_fraction},
      {"evaluation", {{"pool", "union of per-client hold-out splits"},
                      {"holdout_fraction", c.holdout_fraction}}},
      {"seed", c.seed},
      {"aggregator", aggregator},
      {"partition", partition},
      {"model", model},
      {"data", {{"generator", "gaussian blobs around unit-sphere centroids"},
                {"num_classes", c.data.num_classes},
                {"input_dim", c.data.input_dim},
                {"examples_per_class", c.data.examples_per_class},
                {"cluster_spread", c.data.cluster_spread}}},
      {"cost_model", {{"t_example_s", c.cost.t_example_s}, {"t_round_s", c.cost.t_round_s}}},
      {"record_wall_clock", c.record_wall_clock},
  };
}

}  // namespace fedsim
