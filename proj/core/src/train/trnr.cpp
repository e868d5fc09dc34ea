#include <chrono>
#include <cmath>
#include <ostream>

#include "trnr/error.hpp"
#include "trnr/parallel.hpp"
#include "trnr/train/train.hpp"

namespace trnr::train {

std::string to_string(Order o) { return o == Order::first ? "first" : "second"; }

Order order_from_string(const std::string& s) {
  if (s == "first") return Order::first;
  if (s == "second") return Order::second;
  fail("invalid config", "unknown order '" + s + "'");
}

std::string to_string(OuterOptimizer o) { return o == OuterOptimizer::sgd ? "sgd" : "adam"; }

OuterOptimizer outer_optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OuterOptimizer::sgd;
  if (s == "adam") return OuterOptimizer::adam;
  fail("invalid config", "unknown outer optimizer '" + s + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::trnr: return "trnr";
    case Strategy::ris: return "ris";
    case Strategy::rps: return "rps";
    case Strategy::rcs: return "rcs";
  }
  return "trnr";
}

Strategy training_strategy_from_string(const std::string& s) {
  if (s == "trnr") return Strategy::trnr;
  if (s == "ris") return Strategy::ris;
  if (s == "rps") return Strategy::rps;
  if (s == "rcs") return Strategy::rcs;
  fail("invalid config", "unknown training strategy '" + s + "'");
}

void TrainConfig::validate() const {
  const std::string tag = "invalid config";
  require(alpha >= 0.0, tag, "alpha must be >= 0");
  require(beta > 0.0, tag, "beta must be > 0");
  require(inner_steps >= 1, tag, "inner_steps must be >= 1");
  require(tasks_per_iteration >= 1, tag, "R must be >= 1");
  require(lambda >= 0.0, tag, "lambda must be >= 0");
  require(iterations >= 0, tag, "iterations must be >= 0");
  require(batch_size >= 1, tag, "batch_size must be >= 1");
  require(divergence_factor > 1.0, tag, "divergence_factor must be > 1");
  task.validate();
}

AdaptResult inner_adapt(const Objective& obj, const ParamSet& params, std::span<const std::size_t> train_ids,
                        double alpha, int inner_steps, bool keep_trajectory, bool eval_after) {
  require(!train_ids.empty(), "empty batch", "task train set is empty");
  require(inner_steps >= 1, "invalid config", "inner_steps must be >= 1");
  AdaptResult out;
  out.params = params;
  ParamSet grad;
  for (int s = 0; s < inner_steps; ++s) {
    if (keep_trajectory) out.trajectory.push_back(out.params);
    const double l = obj.loss_and_grad(out.params, train_ids, grad);
    if (!std::isfinite(l) || !grad.all_finite()) throw DivergenceError("non-finite inner loss");
    if (s == 0) out.loss_before = l;
    nn::sgd_step(out.params, grad, alpha);
  }
  if (eval_after) {
    const double l = obj.loss(out.params, train_ids);
    if (!std::isfinite(l)) throw DivergenceError("non-finite inner loss after adaptation");
    out.loss_after = l;
  }
  return out;
}

MetaGradient meta_gradient(const Objective& obj, const ParamSet& params, const std::vector<taskgen::Task>& tasks,
                           const std::vector<AdaptResult>& adapted, Order order, double alpha, int threads) {
  require(!tasks.empty() && tasks.size() == adapted.size(), "invalid outer update",
          "adapted parameters must align with tasks");
  std::vector<double> losses(tasks.size());
  std::vector<ParamSet> grads(tasks.size());
  parallel_for(tasks.size(), threads, [&](std::size_t j) {
    const auto& val = tasks[j].val_ids;
    ParamSet g;
    losses[j] = obj.loss_and_grad(adapted[j].params, val, g);
    if (order == Order::second) {
      const auto& traj = adapted[j].trajectory;
      require(!traj.empty(), "invalid outer update", "second-order mode needs the inner trajectory");
      ParamSet hv;
      for (std::size_t t = traj.size(); t-- > 0;) {
        obj.hessian_vector(traj[t], tasks[j].train_ids, g, hv);
        g.axpy(-alpha, hv);
      }
    }
    grads[j] = std::move(g);
  });
  MetaGradient mg;
  mg.grad = params.zeros_like();
  const double inv = 1.0 / static_cast<double>(tasks.size());
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    mg.loss += losses[j] * inv;
    mg.grad.axpy(inv, grads[j]);
  }
  if (!std::isfinite(mg.loss) || !mg.grad.all_finite()) throw DivergenceError("non-finite outer gradient");
  return mg;
}

ParamSet outer_update(const Objective& obj, const ParamSet& params, const std::vector<taskgen::Task>& tasks,
                      const std::vector<AdaptResult>& adapted, double beta, Order order, double alpha, int threads) {
  const auto mg = meta_gradient(obj, params, tasks, adapted, order, alpha, threads);
  ParamSet out = params;
  nn::sgd_step(out, mg.grad, beta);
  return out;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

TrainResult trnr_train(const TrainConfig& cfg, const Objective& obj, const ParamSet& initial,
                       const cluster::ClusterSet& clusters, const TrainHooks& hooks) {
  cfg.validate();
  require(clusters.cluster_count() > 0, "invalid config", "cluster set is empty");
  TrainResult res{initial, nn::AdamState::for_params(initial), {}, make_rng(cfg.seed, 1)};
  res.record.mode = "trnr";
  res.record.seed = cfg.seed;
  if (cfg.order == Order::first) res.record.deviation_flags.push_back("first_order_meta_gradient");
  if (cfg.outer_optimizer == OuterOptimizer::adam) res.record.deviation_flags.push_back("adam_outer_update");

  const auto R = static_cast<std::size_t>(cfg.tasks_per_iteration);
  std::optional<double> initial_loss;
  for (std::int64_t iter = 1; iter <= cfg.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto tasks = taskgen::sample_task_batch(clusters, cfg.task, cfg.tasks_per_iteration, res.rng,
                                                  static_cast<std::uint64_t>(iter - 1) * R);
    if (hooks.task_trace) taskgen::write_task_trace(*hooks.task_trace, iter, tasks);

    std::vector<AdaptResult> adapted(R);
    parallel_for(R, cfg.threads, [&](std::size_t j) {
      adapted[j] = inner_adapt(obj, res.params, tasks[j].train_ids, cfg.alpha, cfg.inner_steps,
                               cfg.order == Order::second, cfg.log_post_adapt);
    });
    const auto mg = meta_gradient(obj, res.params, tasks, adapted, cfg.order, cfg.alpha, cfg.threads);

    if (!initial_loss) initial_loss = mg.loss;
    if (mg.loss > cfg.divergence_factor * *initial_loss) {
      throw DivergenceError("outer loss " + std::to_string(mg.loss) + " exceeds " +
                            std::to_string(cfg.divergence_factor) + "x initial " + std::to_string(*initial_loss) +
                            " at iteration " + std::to_string(iter));
    }

    if (cfg.outer_optimizer == OuterOptimizer::sgd) {
      nn::sgd_step(res.params, mg.grad, cfg.beta);
    } else {
      nn::adam_step(res.params, mg.grad, res.adam, {cfg.beta, 0.9, 0.999, 1e-8});
    }

    IterationLog log;
    log.iter = iter;
    log.outer_loss = mg.loss;
    for (const auto& a : adapted) {
      log.inner_before.push_back(a.loss_before);
      if (a.loss_after) log.inner_after.push_back(*a.loss_after);
    }
    log.wall_ms = elapsed_ms(t0);
    if (hooks.on_iteration) hooks.on_iteration(log);
    res.record.append(std::move(log));

    if (hooks.checkpoint &&
        ((hooks.checkpoint_every > 0 && iter % hooks.checkpoint_every == 0) || iter == cfg.iterations)) {
      hooks.checkpoint(iter, res.params, res.adam, res.rng);
    }
  }
  return res;
}

}  // namespace trnr::train
