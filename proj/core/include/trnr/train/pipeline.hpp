#pragma once

// End-to-end experiment: patch extraction, clustering, training and scoring
// on held-out images.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "trnr/cluster.hpp"
#include "trnr/imageio.hpp"
#include "trnr/sampler.hpp"
#include "trnr/train/evaluate.hpp"
#include "trnr/train/train.hpp"

namespace trnr::train {

struct PatchUniverse {
  std::vector<imageio::Patch> patches;
  sampler::PatchGroups by_image;  // patch indices of each source image
};

PatchUniverse make_patch_universe(const std::vector<imageio::PairedSample>& samples, int size, int stride);

/// Mean objective over all of its patches, evaluated in chunks.
double full_loss(const PatchObjective& obj, const ParamSet& params, std::size_t chunk = 64);

struct ExperimentConfig {
  int patch_size = 16;
  int patch_stride = 8;
  cluster::ClusterConfig cluster;
  nn::ModelConfig model;
  TrainConfig train;
  Strategy strategy = Strategy::trnr;
  TileOptions tiles;
};

struct ExperimentData {
  std::vector<imageio::PairedSample> train;
  std::vector<imageio::PairedSample> test;
};

/// `n_train` + `n_test` synthetic images with Gaussian noise; the two sets
/// come from independent streams of `seed`.
ExperimentData synthetic_experiment_data(int n_train, int n_test, int size, int channels, double sigma,
                                         std::uint64_t seed);

struct ExperimentResult {
  TrainResult train;
  std::optional<cluster::ClusterSet> clusters;
  double val_loss = 0.0;  // training loss over every held-out patch
  EvalTable eval;         // restored held-out images
  EvalTable noisy;        // degraded held-out images as-is
};

/// Clusters the training patches (TRNR and RCS only, unless `clusters` is
/// given), initializes the model from the seed, trains and evaluates.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                const TrainHooks& hooks = {}, const cluster::ClusterSet* clusters = nullptr);

}  // namespace trnr::train
