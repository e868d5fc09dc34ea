#pragma once

// Task-driven (two-loop) training and the data-driven baseline.
//
// One outer iteration samples R tasks. Each task adapts theta on its train
// split by plain gradient descent,
//     theta_j = theta - alpha * grad L_j(theta; train_j)        (inner_steps times)
// and the outer step moves theta along the averaged validation gradient,
//     theta~  = theta - beta * grad_theta (1/R) sum_j L_j(theta_j; val_j).
// In first-order mode grad_theta is replaced by grad_theta_j; in second-order
// mode it is (prod_t (I - alpha H_t)) grad_theta_j L_j, with H_t the train
// Hessian along the inner trajectory.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trnr/cluster.hpp"
#include "trnr/nn/optim.hpp"
#include "trnr/rng.hpp"
#include "trnr/sampler.hpp"
#include "trnr/taskgen.hpp"
#include "trnr/train/objective.hpp"
#include "trnr/train/run_record.hpp"

namespace trnr::train {

enum class Order { first, second };
enum class OuterOptimizer { sgd, adam };
enum class Strategy { trnr, ris, rps, rcs };

std::string to_string(Order o);
Order order_from_string(const std::string& s);
std::string to_string(OuterOptimizer o);
OuterOptimizer outer_optimizer_from_string(const std::string& s);
std::string to_string(Strategy s);
Strategy training_strategy_from_string(const std::string& s);

struct TrainConfig {
  double alpha = 1e-3;  // inner step size
  double beta = 1e-3;   // outer step size (Adam learning rate in adam mode)
  int inner_steps = 1;
  int tasks_per_iteration = 5;  // R
  taskgen::TaskConfig task{12, 1, 1, false};
  double lambda = 5.0;
  std::int64_t iterations = 1000;
  OuterOptimizer outer_optimizer = OuterOptimizer::adam;
  Order order = Order::first;
  std::uint64_t seed = 0;
  int threads = 1;
  int batch_size = 16;  // B, baseline only
  /// Evaluate L(theta_j; train_j) after adaptation for the run record.
  bool log_post_adapt = true;
  double divergence_factor = 1e3;

  void validate() const;
};

struct AdaptResult {
  ParamSet params;                   // theta_j
  std::vector<ParamSet> trajectory;  // theta before each inner step (second order only)
  double loss_before = 0.0;          // L(theta; train)
  std::optional<double> loss_after;  // L(theta_j; train)
};

/// Inner loop for one task. `params` is not modified.
AdaptResult inner_adapt(const Objective& obj, const ParamSet& params, std::span<const std::size_t> train_ids,
                        double alpha, int inner_steps, bool keep_trajectory = false, bool eval_after = false);

struct MetaGradient {
  double loss = 0.0;  // (1/R) sum_j L_j(theta_j; val_j)
  ParamSet grad;
};

/// Averaged validation gradient over tasks. Tasks are evaluated independently
/// (optionally on `threads` workers) and summed in task order.
MetaGradient meta_gradient(const Objective& obj, const ParamSet& params, const std::vector<taskgen::Task>& tasks,
                           const std::vector<AdaptResult>& adapted, Order order, double alpha, int threads = 1);

/// theta~ = theta - beta * meta_gradient (plain SGD form of the outer step).
ParamSet outer_update(const Objective& obj, const ParamSet& params, const std::vector<taskgen::Task>& tasks,
                      const std::vector<AdaptResult>& adapted, double beta, Order order, double alpha,
                      int threads = 1);

struct TrainHooks {
  std::ostream* task_trace = nullptr;
  /// Called every `checkpoint_every` iterations and after the last one.
  std::function<void(std::int64_t iter, const ParamSet&, const nn::AdamState&, const Rng&)> checkpoint;
  std::int64_t checkpoint_every = 0;
  /// Called once per iteration after logging.
  std::function<void(const IterationLog&)> on_iteration;
  /// Baseline only: receives every sampled batch.
  std::function<void(std::int64_t iter, const std::vector<std::size_t>&)> on_batch;
};

struct TrainResult {
  ParamSet params;
  nn::AdamState adam;
  RunRecord record;
  Rng rng;
};

/// Task-driven training over the clustered patch universe.
TrainResult trnr_train(const TrainConfig& cfg, const Objective& obj, const ParamSet& initial,
                       const cluster::ClusterSet& clusters, const TrainHooks& hooks = {});

/// Conventional loop: one Adam step (learning rate beta) on a sampled batch
/// of B patches per iteration. `images` groups patch indices by source image
/// (RIS, RPS); `clusters` is required for RCS.
TrainResult baseline_train(const TrainConfig& cfg, sampler::Strategy strategy, const Objective& obj,
                           const ParamSet& initial, const sampler::PatchGroups& images,
                           const cluster::ClusterSet* clusters, const TrainHooks& hooks = {});

}  // namespace trnr::train
