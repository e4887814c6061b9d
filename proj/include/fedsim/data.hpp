#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

struct SyntheticSpec {
  std::size_t num_classes = 2;
  std::size_t input_dim = 1;
  std::size_t examples_per_class = 1;
  double cluster_spread = 0.1;  // std-dev of each Gaussian blob
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t total_examples() const { return num_classes * examples_per_class; }

  bool operator==(const SyntheticSpec&) const = default;
};

enum class PartitionScheme { kIid, kLabelShard };

struct Partition {
  PartitionScheme scheme = PartitionScheme::kIid;
  // assignments[k] lists the dataset indices owned by client k.
  std::vector<std::vector<std::size_t>> assignments;
  std::size_t classes_per_client = 0;  // LabelShard only

  std::size_t num_clients() const { return assignments.size(); }
  // True iff the assignments are pairwise disjoint and cover 0..n-1.
  bool is_disjoint_cover(std::size_t n) const;

  bool operator==(const Partition&) const = default;
};

// Gaussian blobs, one per class, around centroids on the unit hypersphere.
// Output is class-major: examples [c*epc, (c+1)*epc) carry label c.
std::vector<LabeledExample> generate_synthetic(const SyntheticSpec& spec);

// Seeded global shuffle, then round-robin to clients.
Partition partition_iid(std::size_t n_examples, std::size_t num_clients, std::uint64_t seed);

// Label-sorted shard scheme. Every shard holds a single label, so a client
// that receives `classes_per_client` shards sees at most that many classes.
Partition partition_label_shard(std::span<const std::size_t> labels, std::size_t num_clients,
                                std::size_t classes_per_client, std::uint64_t seed);

std::vector<LabeledExample> client_dataset(const Partition& partition,
                                           std::span<const LabeledExample> dataset,
                                           std::size_t client);

// Text manifest, one line per client: `client_id: idx,idx,...`. Lines starting
// with '#' are comments; the writer records the scheme in one.
void write_partition_manifest(std::ostream& out, const Partition& partition);
Partition read_partition_manifest(std::istream& in);

const char* to_string(PartitionScheme scheme);

}  // namespace fedsim
