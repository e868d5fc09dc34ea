#include <chrono>
#include <cmath>

#include "trnr/error.hpp"
#include "trnr/train/train.hpp"

namespace trnr::train {

TrainResult baseline_train(const TrainConfig& cfg, sampler::Strategy strategy, const Objective& obj,
                           const ParamSet& initial, const sampler::PatchGroups& images,
                           const cluster::ClusterSet* clusters, const TrainHooks& hooks) {
  cfg.validate();
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  TrainResult res{initial, nn::AdamState::for_params(initial), {}, make_rng(cfg.seed, 2)};
  res.record.mode = sampler::to_string(strategy);
  res.record.seed = cfg.seed;

  std::vector<std::size_t> universe;
  for (const auto& g : images) universe.insert(universe.end(), g.begin(), g.end());
  switch (strategy) {
    case sampler::Strategy::ris:
      require(B <= images.size(), "invalid sampler spec",
              "RIS requires B <= m (B=" + std::to_string(B) + ", m=" + std::to_string(images.size()) + ")");
      break;
    case sampler::Strategy::rps:
      require(B <= universe.size(), "invalid sampler spec", "RPS requires B <= mP");
      break;
    case sampler::Strategy::rcs:
      require(clusters != nullptr, "missing manifest", "RCS needs a cluster set");
      require(B <= clusters->cluster_count(), "invalid sampler spec",
              "RCS requires B <= C (B=" + std::to_string(B) + ", C=" + std::to_string(clusters->cluster_count()) + ")");
      break;
  }

  std::optional<sampler::RpsEpoch> epoch;
  std::optional<double> initial_loss;
  ParamSet grad;
  for (std::int64_t iter = 1; iter <= cfg.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> batch;
    switch (strategy) {
      case sampler::Strategy::ris: batch = sampler::ris_sample(images, B, res.rng); break;
      case sampler::Strategy::rps:
        if (!epoch || !epoch->can_draw(B)) epoch.emplace(universe, res.rng);
        batch = epoch->next(B);
        break;
      case sampler::Strategy::rcs: batch = sampler::rcs_sample(clusters->clusters, B, res.rng); break;
    }
    if (hooks.on_batch) hooks.on_batch(iter, batch);

    const double loss = obj.loss_and_grad(res.params, batch, grad);
    if (!std::isfinite(loss) || !grad.all_finite()) throw DivergenceError("non-finite loss at iteration " + std::to_string(iter));
    if (!initial_loss) initial_loss = loss;
    if (loss > cfg.divergence_factor * *initial_loss) {
      throw DivergenceError("loss " + std::to_string(loss) + " exceeds " + std::to_string(cfg.divergence_factor) +
                            "x initial at iteration " + std::to_string(iter));
    }
    nn::adam_step(res.params, grad, res.adam, {cfg.beta, 0.9, 0.999, 1e-8});

    IterationLog log;
    log.iter = iter;
    log.outer_loss = loss;
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
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
