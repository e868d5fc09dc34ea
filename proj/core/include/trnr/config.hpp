#pragma once

// Run configuration: one JSON document covering every module, plus presets
// and dotted-key overrides.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trnr/imageio.hpp"
#include "trnr/nn/checkpoint.hpp"
#include "trnr/sampler.hpp"
#include "trnr/train/pipeline.hpp"

namespace trnr::config {

struct DataConfig {
  /// Dataset manifests; when empty a synthetic set is generated instead.
  std::string train_manifest;
  std::string test_manifest;
  bool grayscale = true;
  imageio::NoiseSpec noise;
  int synthetic_train = 10;
  int synthetic_test = 4;
  int synthetic_size = 64;
};

struct SimulateConfig {
  std::vector<sampler::SamplerSpec> specs;
  std::vector<std::int64_t> k_grid;
  std::int64_t trials = 100000;
};

struct ReportConfig {
  std::vector<train::Strategy> strategies{train::Strategy::trnr, train::Strategy::ris, train::Strategy::rps,
                                          train::Strategy::rcs};
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::pair<int, int>> nr_grid;
  std::vector<double> lambdas;
  std::vector<int> dataset_sizes;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  DataConfig data;
  train::ExperimentConfig experiment;
  std::int64_t checkpoint_every = 0;
  nn::Dtype checkpoint_dtype = nn::Dtype::f64;
  SimulateConfig simulate;
  ReportConfig report;
  std::string out_dir = "out";
  /// Cluster manifest read by `train` and written by `cluster`; defaults to
  /// <out_dir>/clusters.tsv.
  std::string cluster_manifest;

  [[nodiscard]] std::filesystem::path cluster_manifest_path() const;
};

nlohmann::json to_json(const RunConfig& cfg);

/// Strict parse: every key must be known. Missing keys keep their defaults.
RunConfig from_json(const nlohmann::json& j);

/// Named starting points: "default", "derain", "denoise" and "desk".
RunConfig preset(const std::string& name);

/// Applies `a.b.c=value` to the JSON form. The value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Preset, then the file (if any), then overrides; returns the validated result.
RunConfig resolve(const std::string& preset_name, const std::filesystem::path& file,
                  const std::vector<std::string>& overrides);

/// FNV-1a of the canonical JSON dump, excluding the thread count.
std::string config_hash(const RunConfig& cfg);

}  // namespace trnr::config
