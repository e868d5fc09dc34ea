#pragma once

// Strategy comparison and hyperparameter sweeps over run_experiment.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "trnr/train/pipeline.hpp"

namespace trnr::train {

struct AblationRow {
  std::string sweep;    // "strategy", "nr", "lambda" or "dataset_size"
  std::string setting;  // e.g. "N=8;R=3"
  std::string strategy;
  std::uint64_t seed = 0;
  double val_loss = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double noisy_psnr = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::string config_hash;

  void write_csv(std::ostream& out) const;
};

AblationTable compare_strategies(const ExperimentConfig& base, const ExperimentData& data,
                                 const std::vector<Strategy>& strategies, const std::vector<std::uint64_t>& seeds);

/// (N, R) grid for TRNR.
AblationTable sweep_nr(const ExperimentConfig& base, const ExperimentData& data,
                       const std::vector<std::pair<int, int>>& grid);

AblationTable sweep_lambda(const ExperimentConfig& base, const ExperimentData& data,
                           const std::vector<double>& lambdas);

/// Trains on the first n training images for every n in `sizes`.
AblationTable sweep_dataset_size(const ExperimentConfig& base, const ExperimentData& data,
                                 const std::vector<int>& sizes);

struct OrderingCheck {
  int seeds = 0;
  int agree = 0;  // seeds with val_loss(a) <= val_loss(b) * (1 + eps)
  [[nodiscard]] bool majority() const { return 2 * agree > seeds; }
  [[nodiscard]] bool unanimous() const { return agree == seeds; }
};

/// Per-seed comparison of strategy `a` against `b` over the "strategy" rows.
OrderingCheck strategy_ordering(const AblationTable& table, const std::string& a, const std::string& b, double eps);

}  // namespace trnr::train
