#include "trnr/train/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "trnr/error.hpp"

namespace trnr::train {

PatchUniverse make_patch_universe(const std::vector<imageio::PairedSample>& samples, int size, int stride) {
  PatchUniverse u;
  for (const auto& s : samples) {
    auto patches = imageio::extract_patches(s, size, stride);
    std::vector<std::size_t> ids(patches.size());
    std::iota(ids.begin(), ids.end(), u.patches.size());
    u.by_image.push_back(std::move(ids));
    std::move(patches.begin(), patches.end(), std::back_inserter(u.patches));
  }
  return u;
}

double full_loss(const PatchObjective& obj, const ParamSet& params, std::size_t chunk) {
  require(obj.size() > 0, "empty batch", "no patches to evaluate");
  require(chunk > 0, "invalid config", "chunk must be positive");
  double total = 0.0;
  std::vector<std::size_t> ids;
  for (std::size_t start = 0; start < obj.size(); start += chunk) {
    const std::size_t end = std::min(obj.size(), start + chunk);
    ids.resize(end - start);
    std::iota(ids.begin(), ids.end(), start);
    total += obj.loss(params, ids) * static_cast<double>(ids.size());
  }
  return total / static_cast<double>(obj.size());
}

ExperimentData synthetic_experiment_data(int n_train, int n_test, int size, int channels, double sigma,
                                         std::uint64_t seed) {
  ExperimentData d;
  d.train = imageio::synthetic_dataset(n_train, size, size, channels, sigma, derive_seed(seed, 10));
  d.test = imageio::synthetic_dataset(n_test, size, size, channels, sigma, derive_seed(seed, 11));
  for (auto& s : d.test) s.id = "test_" + s.id;
  return d;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data, const TrainHooks& hooks,
                                const cluster::ClusterSet* clusters) {
  require(!data.train.empty(), "invalid config", "no training images");
  const std::uint64_t seed = cfg.train.seed;
  auto universe = make_patch_universe(data.train, cfg.patch_size, cfg.patch_stride);
  require(!universe.patches.empty(), "invalid config", "no training patches");

  ExperimentResult res{};
  const bool needs_clusters = cfg.strategy == Strategy::trnr || cfg.strategy == Strategy::rcs;
  if (needs_clusters) {
    if (clusters) {
      require(clusters->total_patches() == universe.patches.size(), "partition violation",
              "cluster manifest covers " + std::to_string(clusters->total_patches()) + " patches, dataset has " +
                  std::to_string(universe.patches.size()));
      for (std::size_t i = 0; i < universe.patches.size(); ++i) {
        require(clusters->patch_ids[i] == universe.patches[i].id(), "partition violation",
                "manifest patch " + clusters->patch_ids[i] + " does not match " + universe.patches[i].id());
      }
      res.clusters = *clusters;
    } else {
      Rng crng = make_rng(seed, 4);
      res.clusters = cluster::cluster_patches(universe.patches, cfg.cluster, crng, nullptr, cfg.train.threads);
    }
  }

  Rng mrng = make_rng(seed, 3);
  const auto model = nn::build_model(cfg.model, mrng);
  const PatchObjective obj(cfg.model, universe.patches, cfg.train.lambda);

  switch (cfg.strategy) {
    case Strategy::trnr: res.train = trnr_train(cfg.train, obj, model.params, *res.clusters, hooks); break;
    case Strategy::ris:
      res.train = baseline_train(cfg.train, sampler::Strategy::ris, obj, model.params, universe.by_image, nullptr, hooks);
      break;
    case Strategy::rps:
      res.train = baseline_train(cfg.train, sampler::Strategy::rps, obj, model.params, universe.by_image, nullptr, hooks);
      break;
    case Strategy::rcs:
      res.train = baseline_train(cfg.train, sampler::Strategy::rcs, obj, model.params, universe.by_image,
                                 &*res.clusters, hooks);
      break;
  }

  if (!data.test.empty()) {
    const auto held = make_patch_universe(data.test, cfg.patch_size, cfg.patch_stride);
    const PatchObjective vobj(cfg.model, held.patches, cfg.train.lambda);
    res.val_loss = full_loss(vobj, res.train.params);
    res.eval = evaluate(cfg.model, res.train.params, data.test, cfg.tiles);
    res.noisy = evaluate_degraded(data.test);
  }
  return res;
}

}  // namespace trnr::train
