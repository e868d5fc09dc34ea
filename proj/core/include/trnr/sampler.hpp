#pragma once

// RIS / RPS / RCS batch samplers and their patch-utilization model.
//
// p_unuse(k) is the probability that a given patch has not been drawn after k
// iterations:
//   RIS  (1 - B/(mP))^k        k <= T_e = m/B,  B <= m
//   RPS  1 - kB/(mP)           k <= T_e = mP/B
//   RCS  (1 - B/(C N_j))^k     k <= T_e = N/B,  B <= C

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trnr/rng.hpp"

namespace trnr::sampler {

enum class Strategy { ris, rps, rcs };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct SamplerSpec {
  Strategy strategy = Strategy::ris;
  std::int64_t images = 0;            // m
  std::int64_t patches_per_image = 0; // P
  std::int64_t batch = 0;             // B
  std::vector<std::int64_t> cluster_sizes;  // N_j, RCS only; C = size()

  [[nodiscard]] std::int64_t clusters() const { return static_cast<std::int64_t>(cluster_sizes.size()); }
  /// N^(p): mP for RIS/RPS, sum N_j for RCS.
  [[nodiscard]] std::int64_t total_patches() const;
  /// Iterations per epoch (floor division; a trailing short batch is dropped).
  [[nodiscard]] std::int64_t iterations_per_epoch() const;
  void validate() const;
};

/// Patch ids grouped by source image; ids are arbitrary but unique.
using PatchGroups = std::vector<std::vector<std::size_t>>;

/// Draws B distinct images uniformly, then one patch uniformly within each.
std::vector<std::size_t> ris_sample(const PatchGroups& images, std::size_t batch, Rng& rng);

/// One shuffled pass over all patch ids, consumed B at a time without replacement.
class RpsEpoch {
 public:
  RpsEpoch(std::vector<std::size_t> ids, Rng& rng);
  RpsEpoch(std::size_t total, Rng& rng);

  /// Next B ids. Throws "epoch exhausted" when fewer than B remain.
  std::vector<std::size_t> next(std::size_t batch);

  [[nodiscard]] std::size_t consumed() const { return cursor_; }
  [[nodiscard]] std::size_t total() const { return order_.size(); }
  [[nodiscard]] bool can_draw(std::size_t batch) const { return cursor_ + batch <= order_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& order() const { return order_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Draws B distinct clusters uniformly, then one member of each uniformly
/// (with replacement across iterations).
std::vector<std::size_t> rcs_sample(const std::vector<std::vector<std::size_t>>& clusters,
                                    std::size_t batch, Rng& rng);

/// k distinct values from [0, n), Floyd's algorithm, in draw order.
std::vector<std::size_t> choose_distinct(std::size_t n, std::size_t k, Rng& rng);

/// Analytic p_unuse after k iterations. For RCS, `target_cluster` selects N_j.
double p_unuse_analytic(const SamplerSpec& spec, std::int64_t k, std::size_t target_cluster = 0);

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t trials = 0;
};

/// Monte-Carlo estimate of p_unuse by running the real samplers. For RIS and
/// RCS this is the fraction of trials in which a designated patch (the first
/// patch of image 0, resp. of `target_cluster`) is never drawn, with binomial
/// standard error. RPS is deterministic: the estimate is the unused fraction
/// of the whole universe after k batches of one shuffled epoch.
Estimate simulate_unuse(const SamplerSpec& spec, std::int64_t k, std::int64_t trials,
                        std::uint64_t seed, std::size_t target_cluster = 0, int threads = 1);

struct UtilizationRow {
  std::string label;
  Strategy strategy = Strategy::ris;
  std::int64_t k = 0;
  double analytic = 0.0;
  Estimate estimate;
  std::uint64_t seed = 0;
};

struct UtilizationReport {
  std::vector<UtilizationRow> rows;
  /// e^{-1/P} per RIS spec (same order as the RIS specs in the input).
  std::vector<double> ris_floor;

  /// CSV `strategy,k,analytic,estimate,stderr,trials,seed`.
  [[nodiscard]] std::string to_csv() const;
};

/// Analytic and simulated p_unuse for each spec over the k grid. k values
/// beyond a spec's T_e are skipped. trials == 0 leaves estimates empty.
UtilizationReport utilization_report(const std::vector<SamplerSpec>& specs,
                                     const std::vector<std::int64_t>& k_grid, std::int64_t trials,
                                     std::uint64_t seed, int threads = 1);

}  // namespace trnr::sampler
