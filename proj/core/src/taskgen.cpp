#include "trnr/taskgen.hpp"

#include <ostream>

#include "trnr/error.hpp"
#include "trnr/sampler.hpp"

namespace trnr::taskgen {

void TaskConfig::validate() const {
  require(n_clusters >= 1, "invalid task config", "N must be >= 1");
  require(k_shots >= 1, "invalid task config", "K must be >= 1");
  require(val_shots >= 1, "invalid task config", "val_shots must be >= 1");
}

Task sample_task(const cluster::ClusterSet& set, const TaskConfig& cfg, Rng& rng, std::uint64_t task_id) {
  cfg.validate();
  const std::size_t C = set.cluster_count();
  require(static_cast<std::size_t>(cfg.n_clusters) <= C, "N exceeds cluster count",
          "N=" + std::to_string(cfg.n_clusters) + ", C=" + std::to_string(C));
  const auto per_cluster = static_cast<std::size_t>(cfg.k_shots + cfg.val_shots);

  Task task;
  task.task_id = task_id;
  task.train_ids.reserve(static_cast<std::size_t>(cfg.n_clusters * cfg.k_shots));
  task.val_ids.reserve(static_cast<std::size_t>(cfg.n_clusters * cfg.val_shots));
  for (std::size_t j : sampler::choose_distinct(C, static_cast<std::size_t>(cfg.n_clusters), rng)) {
    const auto& members = set.clusters[j];
    task.cluster_ids.push_back(static_cast<int>(j));
    std::vector<std::size_t> picked;
    if (members.size() >= per_cluster) {
      for (std::size_t i : sampler::choose_distinct(members.size(), per_cluster, rng)) picked.push_back(members[i]);
    } else {
      require(cfg.allow_replacement, "insufficient patches",
              "cluster " + std::to_string(j) + " has " + std::to_string(members.size()) + " < " +
                  std::to_string(per_cluster) + " patches");
      task.with_replacement = true;
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      for (std::size_t i = 0; i < per_cluster; ++i) picked.push_back(members[pick(rng)]);
    }
    task.train_ids.insert(task.train_ids.end(), picked.begin(), picked.begin() + cfg.k_shots);
    task.val_ids.insert(task.val_ids.end(), picked.begin() + cfg.k_shots, picked.end());
  }
  return task;
}

std::vector<Task> sample_task_batch(const cluster::ClusterSet& set, const TaskConfig& cfg, int count, Rng& rng,
                                    std::uint64_t first_task_id) {
  require(count >= 1, "invalid task count", "R must be >= 1");
  std::vector<Task> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  for (int r = 0; r < count; ++r) tasks.push_back(sample_task(set, cfg, rng, first_task_id + static_cast<std::uint64_t>(r)));
  return tasks;
}

namespace {

template <class T>
void join(std::ostream& out, const std::vector<T>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ";" : "") << v[i];
}

}  // namespace

void write_task_trace(std::ostream& out, std::int64_t iter, const std::vector<Task>& tasks) {
  for (const auto& t : tasks) {
    out << iter << ',' << t.task_id << ',';
    join(out, t.cluster_ids);
    out << ',';
    join(out, t.train_ids);
    out << ',';
    join(out, t.val_ids);
    out << '\n';
  }
}

}  // namespace trnr::taskgen
