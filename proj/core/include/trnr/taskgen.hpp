#pragma once

// N-frequency-K-shot task sampling over a clustered patch universe.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "trnr/cluster.hpp"
#include "trnr/rng.hpp"

namespace trnr::taskgen {

struct TaskConfig {
  int n_clusters = 12;  // N
  int k_shots = 1;      // K
  int val_shots = 1;
  /// Allow clusters smaller than K + val_shots, drawing members with replacement.
  bool allow_replacement = false;

  void validate() const;
};

struct Task {
  std::uint64_t task_id = 0;
  std::vector<int> cluster_ids;        // N distinct clusters
  std::vector<std::size_t> train_ids;  // N*K patch indices, cluster-major
  std::vector<std::size_t> val_ids;    // N*val_shots patch indices
  bool with_replacement = false;       // some cluster was drawn with replacement
};

Task sample_task(const cluster::ClusterSet& set, const TaskConfig& cfg, Rng& rng, std::uint64_t task_id = 0);

/// R independent tasks; ids are first_task_id, first_task_id+1, ...
std::vector<Task> sample_task_batch(const cluster::ClusterSet& set, const TaskConfig& cfg, int count, Rng& rng,
                                    std::uint64_t first_task_id = 0);

/// Writes one `iter,task_id,cluster_ids,train_ids,val_ids` line per task;
/// list fields are ';'-separated.
void write_task_trace(std::ostream& out, std::int64_t iter, const std::vector<Task>& tasks);

}  // namespace trnr::taskgen
