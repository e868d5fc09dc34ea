#pragma once

// Streaming patch clustering with momentum-updated centers.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trnr/imageio.hpp"
#include "trnr/rng.hpp"

namespace trnr::cluster {

enum class Metric { euclidean, kl_histogram, weighted_sum };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

struct ClusterConfig {
  int max_clusters = 100;          // C
  std::optional<double> threshold; // T; calibrated from the data when unset
  double rho = 0.05;               // center momentum
  Metric metric = Metric::euclidean;
  double w_euclidean = 1.0;        // weights for Metric::weighted_sum
  double w_kl = 1.0;
  int histogram_bins = 32;
  double epsilon = 1e-8;           // histogram smoothing
  /// Update the newest cluster's center instead of the matched one, exactly as
  /// the original pseudo-code is printed.
  bool update_newest_center = false;

  void validate() const;
};

/// Distance between a clean patch block and another block or a center.
double patch_distance(std::span<const double> a, std::span<const double> b, const ClusterConfig& cfg);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Symmetrized KL between epsilon-smoothed intensity histograms over [0,1].
double symmetric_kl_histogram(std::span<const double> a, std::span<const double> b, int bins,
                              double epsilon);

struct ClusterSet {
  int max_clusters = 0;
  double threshold = 0.0;
  double rho = 0.05;
  Metric metric = Metric::euclidean;
  int histogram_bins = 32;
  int patch_size = 0;
  int channels = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::vector<std::string> patch_ids;              // indexed by patch index
  std::vector<std::vector<std::size_t>> clusters;  // patch indices per cluster
  std::vector<std::vector<double>> centers;        // one per cluster

  [[nodiscard]] std::size_t cluster_count() const { return clusters.size(); }
  [[nodiscard]] std::size_t total_patches() const { return patch_ids.size(); }
  [[nodiscard]] std::vector<std::size_t> sizes() const;
  /// cluster index of every patch, derived from `clusters`.
  [[nodiscard]] std::vector<int> labels() const;

  /// Throws "partition violation" unless every patch index appears exactly once.
  void validate() const;
};

/// One step of the streaming pass, recorded for replay checks.
struct TraceStep {
  std::size_t patch = 0;
  int cluster = 0;
  bool opened = false;          // patch started a new cluster
  int updated_center = -1;      // index of the center moved by this step, or -1
};

/// 10th percentile of pairwise distances on a random subsample of at most
/// `subsample` patches.
double calibrate_threshold(std::span<const imageio::Patch> patches, const ClusterConfig& cfg,
                           Rng& rng, std::size_t subsample = 1000, double quantile = 0.10);

/// Streaming assignment of clean patches to at most C clusters. Sets
/// `cluster_id` on every patch. `threads` > 1 parallelizes the nearest-center
/// search; the result does not depend on it.
ClusterSet cluster_patches(std::span<imageio::Patch> patches, const ClusterConfig& cfg, Rng& rng,
                           std::vector<TraceStep>* trace = nullptr, int threads = 1);

struct ClusterStats {
  std::size_t cluster_count = 0;
  std::size_t total = 0;
  std::size_t min_size = 0;
  double mean_size = 0.0;
  std::size_t max_size = 0;
  /// clusters with N_j < N / C
  std::size_t rare_count = 0;
};

ClusterStats cluster_stats(const ClusterSet& set);

void save_cluster_manifest(const ClusterSet& set, const std::filesystem::path& path);
ClusterSet load_cluster_manifest(const std::filesystem::path& path);

}  // namespace trnr::cluster
