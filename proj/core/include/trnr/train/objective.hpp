#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "trnr/imageio.hpp"
#include "trnr/nn/loss.hpp"
#include "trnr/nn/model.hpp"
#include "trnr/nn/params.hpp"

namespace trnr::train {

using nn::ParamSet;

/// A differentiable loss over batches of items identified by index. The TRNR
/// loops only see this interface, so the same code drives the restoration
/// network and small analytic verification models.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual double loss(const ParamSet& params, std::span<const std::size_t> batch) const = 0;
  /// Loss and its gradient; `grad` is overwritten with the parameter layout.
  virtual double loss_and_grad(const ParamSet& params, std::span<const std::size_t> batch,
                               ParamSet& grad) const = 0;
  /// Hessian-vector product H(params) v. The default uses a central
  /// difference of gradients along v.
  virtual void hessian_vector(const ParamSet& params, std::span<const std::size_t> batch, const ParamSet& v,
                              ParamSet& out) const;
};

/// Restoration loss l1 + lambda (1 - SSIM) of a model over degraded/clean patch pairs.
class PatchObjective final : public Objective {
 public:
  PatchObjective(nn::ModelConfig model, std::span<const imageio::Patch> patches, double lambda,
                 nn::SsimOptions ssim = {});

  double loss(const ParamSet& params, std::span<const std::size_t> batch) const override;
  double loss_and_grad(const ParamSet& params, std::span<const std::size_t> batch, ParamSet& grad) const override;

  [[nodiscard]] nn::Tensor4 degraded_batch(std::span<const std::size_t> batch) const;
  [[nodiscard]] nn::Tensor4 clean_batch(std::span<const std::size_t> batch) const;
  [[nodiscard]] const nn::ModelConfig& model_config() const { return model_; }
  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] std::size_t size() const { return patches_.size(); }

 private:
  nn::Tensor4 gather(std::span<const std::size_t> batch, bool clean) const;

  nn::ModelConfig model_;
  std::span<const imageio::Patch> patches_;
  double lambda_;
  nn::SsimOptions ssim_;
};

}  // namespace trnr::train
