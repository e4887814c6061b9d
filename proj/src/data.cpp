#include "fedsim/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

constexpr std::uint64_t kCentroidStream = 0xc3;
constexpr std::uint64_t kNoiseStream = 0x5e;

std::vector<double> unit_centroid(std::size_t dim, std::uint64_t seed, std::size_t label) {
  Rng rng(derive_seed(seed, {kCentroidStream, label}));
  std::vector<double> v(dim);
  double norm2 = 0.0;
  while (norm2 == 0.0) {
    norm2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

// Splits `shards` across classes proportionally to class size (largest
// remainder), with every class getting at least one shard and no class
// getting more shards than it has examples.
std::vector<std::size_t> shards_per_class(const std::vector<std::size_t>& class_sizes,
                                          std::size_t shards) {
  const std::size_t k = class_sizes.size();
  const std::size_t n = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  std::vector<std::size_t> alloc(k, 1);
  std::size_t remaining = shards - k;
  // Quotas for the shards beyond the first per class.
  std::vector<std::pair<double, std::size_t>> remainders;
  for (std::size_t c = 0; c < k && remaining > 0; ++c) {
    const double quota = static_cast<double>(class_sizes[c]) * static_cast<double>(shards) /
                         static_cast<double>(n);
    const std::size_t whole = static_cast<std::size_t>(quota);
    const std::size_t extra = std::min({whole > 0 ? whole - 1 : 0, class_sizes[c] - 1, remaining});
    alloc[c] += extra;
    remaining -= extra;
  }
  for (std::size_t c = 0; c < k; ++c) {
    const double quota = static_cast<double>(class_sizes[c]) * static_cast<double>(shards) /
                         static_cast<double>(n);
    remainders.emplace_back(quota - static_cast<double>(alloc[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  while (remaining > 0) {
    bool placed = false;
    for (const auto& [_, c] : remainders) {
      if (remaining == 0) break;
      if (alloc[c] < class_sizes[c]) {
        ++alloc[c];
        --remaining;
        placed = true;
      }
    }
    if (!placed) throw ContractError("partition_label_shard: more shards than examples");
  }
  return alloc;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ContractError("synthetic data needs at least 2 classes");
  if (input_dim < 1) throw ContractError("synthetic input_dim must be >= 1");
  if (examples_per_class < 1) throw ContractError("examples_per_class must be >= 1");
  if (!(cluster_spread > 0.0) || !std::isfinite(cluster_spread)) {
    throw ContractError("cluster_spread must be positive");
  }
}

bool Partition::is_disjoint_cover(std::size_t n) const {
  std::vector<bool> seen(n, false);
  std::size_t count = 0;
  for (const auto& client : assignments) {
    for (std::size_t idx : client) {
      if (idx >= n || seen[idx]) return false;
      seen[idx] = true;
      ++count;
    }
  }
  return count == n;
}

std::vector<LabeledExample> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<LabeledExample> out;
  out.reserve(spec.total_examples());
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const auto centroid = unit_centroid(spec.input_dim, spec.seed, c);
    Rng rng(derive_seed(spec.seed, {kNoiseStream, c}));
    for (std::size_t i = 0; i < spec.examples_per_class; ++i) {
      LabeledExample ex{centroid, c};
      for (double& x : ex.features) x += spec.cluster_spread * rng.normal();
      out.push_back(std::move(ex));
    }
  }
  return out;
}

Partition partition_iid(std::size_t n_examples, std::size_t num_clients, std::uint64_t seed) {
  if (num_clients == 0) throw ContractError("partition_iid: need at least one client");
  if (num_clients > n_examples) {
    throw ContractError("partition_iid: more clients (" + std::to_string(num_clients) +
                        ") than examples (" + std::to_string(n_examples) + ")");
  }
  Partition p;
  p.scheme = PartitionScheme::kIid;
  p.assignments.resize(num_clients);
  const auto order = shuffled_indices(n_examples, seed);
  for (std::size_t i = 0; i < order.size(); ++i) {
    p.assignments[i % num_clients].push_back(order[i]);
  }
  return p;
}

Partition partition_label_shard(std::span<const std::size_t> labels, std::size_t num_clients,
                                std::size_t classes_per_client, std::uint64_t seed) {
  if (num_clients == 0) throw ContractError("partition_label_shard: need at least one client");
  if (classes_per_client == 0) {
    throw ContractError("partition_label_shard: classes_per_client must be >= 1");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

  const std::size_t num_shards = num_clients * classes_per_client;
  if (num_shards < by_label.size()) {
    throw ContractError("partition_label_shard: " + std::to_string(num_shards) +
                        " shards cannot cover " + std::to_string(by_label.size()) + " labels");
  }
  if (num_shards > labels.size()) {
    throw ContractError("partition_label_shard: more shards than examples");
  }

  std::vector<std::size_t> class_sizes;
  for (const auto& [_, idx] : by_label) class_sizes.push_back(idx.size());
  const auto alloc = shards_per_class(class_sizes, num_shards);

  // Label-sorted order cut into contiguous single-label shards.
  std::vector<std::vector<std::size_t>> shards;
  shards.reserve(num_shards);
  std::size_t c = 0;
  for (const auto& [_, idx] : by_label) {
    const std::size_t s = alloc[c++];
    for (std::size_t j = 0; j < s; ++j) {
      const std::size_t lo = j * idx.size() / s;
      const std::size_t hi = (j + 1) * idx.size() / s;
      shards.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                          idx.begin() + static_cast<std::ptrdiff_t>(hi));
    }
  }

  const auto order = shuffled_indices(num_shards, seed);
  Partition p;
  p.scheme = PartitionScheme::kLabelShard;
  p.classes_per_client = classes_per_client;
  p.assignments.resize(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) {
    for (std::size_t j = 0; j < classes_per_client; ++j) {
      const auto& shard = shards[order[k * classes_per_client + j]];
      p.assignments[k].insert(p.assignments[k].end(), shard.begin(), shard.end());
    }
  }
  return p;
}

std::vector<LabeledExample> client_dataset(const Partition& partition,
                                           std::span<const LabeledExample> dataset,
                                           std::size_t client) {
  if (client >= partition.num_clients()) {
    throw ContractError("client " + std::to_string(client) + " out of range");
  }
  std::vector<LabeledExample> out;
  out.reserve(partition.assignments[client].size());
  for (std::size_t idx : partition.assignments[client]) {
    if (idx >= dataset.size()) {
      throw ContractError("partition index " + std::to_string(idx) + " outside dataset");
    }
    out.push_back(dataset[idx]);
  }
  return out;
}

void write_partition_manifest(std::ostream& out, const Partition& partition) {
  out << "# scheme=" << to_string(partition.scheme);
  if (partition.scheme == PartitionScheme::kLabelShard) {
    out << " classes_per_client=" << partition.classes_per_client;
  }
  out << '\n';
  for (std::size_t k = 0; k < partition.num_clients(); ++k) {
    out << k << ':';
    const auto& idx = partition.assignments[k];
    for (std::size_t i = 0; i < idx.size(); ++i) out << (i == 0 ? " " : ",") << idx[i];
    out << '\n';
  }
}

Partition read_partition_manifest(std::istream& in) {
  auto parse_size = [](std::string_view tok, std::size_t line_no) {
    std::size_t v = 0;
    const auto* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (tok.empty() || ec != std::errc() || ptr != end) {
      throw ParseError("bad integer '" + std::string(tok) + "'", line_no);
    }
    return v;
  };
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };

  Partition p;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (view.find("scheme=label_shard") != std::string_view::npos) {
        p.scheme = PartitionScheme::kLabelShard;
        const auto pos = view.find("classes_per_client=");
        if (pos != std::string_view::npos) {
          p.classes_per_client =
              parse_size(trim(view.substr(pos + std::string_view("classes_per_client=").size())),
                         line_no);
        }
      }
      continue;
    }
    const auto colon = view.find(':');
    if (colon == std::string_view::npos) throw ParseError("missing ':'", line_no);
    const std::size_t client = parse_size(trim(view.substr(0, colon)), line_no);
    if (client != p.assignments.size()) {
      throw ParseError("client ids must be consecutive from 0", line_no);
    }
    auto& idx = p.assignments.emplace_back();
    std::string_view rest = trim(view.substr(colon + 1));
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      idx.push_back(parse_size(trim(rest.substr(0, comma)), line_no));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  return p;
}

const char* to_string(PartitionScheme scheme) {
  return scheme == PartitionScheme::kIid ? "iid" : "label_shard";
}

}  // namespace fedsim
