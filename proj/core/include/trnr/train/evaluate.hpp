#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trnr/imageio.hpp"
#include "trnr/nn/checkpoint.hpp"
#include "trnr/nn/model.hpp"

namespace trnr::train {

struct EvalRow {
  std::string image_id;
  double psnr = 0.0;  // dB, +inf for identical images
  double ssim = 0.0;
};

struct EvalTable {
  std::vector<EvalRow> rows;
  std::uint64_t seed = 0;
  std::string config_hash;

  [[nodiscard]] double mean_psnr() const;
  [[nodiscard]] double mean_ssim() const;

  /// `# seed=.. config_hash=..`, header `image_id,psnr,ssim`, one row per
  /// image and a final `mean` row.
  void write_csv(std::ostream& out) const;
  static EvalTable read_csv(std::istream& in);
};

struct TileOptions {
  int tile = 128;
  int overlap = 16;
};

/// Whole-image inference in overlapping tiles; overlaps are averaged and the
/// result is clamped to [0,1].
imageio::Image restore(const nn::ModelConfig& cfg, const nn::ParamSet& params, const imageio::Image& degraded,
                       const TileOptions& tiles = {});

/// PSNR/SSIM of the restored degraded image against the clean one, per
/// sample. `restored` receives the outputs when non-null.
EvalTable evaluate(const nn::ModelConfig& cfg, const nn::ParamSet& params,
                   const std::vector<imageio::PairedSample>& testset, const TileOptions& tiles = {},
                   std::vector<imageio::Image>* restored = nullptr);

/// Degraded input scored directly against the clean image.
EvalTable evaluate_degraded(const std::vector<imageio::PairedSample>& testset);

/// Builds a model from a checkpoint; throws "checkpoint/model mismatch" when
/// the stored tensors do not fit the stored (or `expected`) architecture.
nn::Model model_from_checkpoint(const nn::Checkpoint& ckpt,
                                const std::optional<nn::ModelConfig>& expected = std::nullopt);

}  // namespace trnr::train
