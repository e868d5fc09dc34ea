#pragma once

// Restoration losses and quality metrics. SSIM uses an 11x11 Gaussian window
// (sigma 1.5) evaluated at every fully-contained position, per channel, and
// averaged over positions, channels and batch.

#include <span>

#include "trnr/imageio.hpp"
#include "trnr/nn/tensor.hpp"

namespace trnr::nn {

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double dynamic_range = 1.0;  // L
};

struct LossValue {
  double value = 0.0;
  Tensor4 grad;  // d value / d pred
};

/// Mean absolute error.
double l1_loss(const Tensor4& pred, const Tensor4& target);
/// Mean absolute error and its subgradient (0 where pred == target).
LossValue l1_loss_grad(const Tensor4& pred, const Tensor4& target);

double ssim(const Tensor4& a, const Tensor4& b, const SsimOptions& opt = {});
/// SSIM and its gradient w.r.t. `a`.
LossValue ssim_grad(const Tensor4& a, const Tensor4& b, const SsimOptions& opt = {});
double ssim(const imageio::Image& a, const imageio::Image& b, const SsimOptions& opt = {});

/// l1 + lambda * (1 - ssim)
double combined_loss(const Tensor4& pred, const Tensor4& target, double lambda, const SsimOptions& opt = {});
LossValue combined_loss_grad(const Tensor4& pred, const Tensor4& target, double lambda,
                             const SsimOptions& opt = {});

/// 10 log10(peak^2 / MSE) over all elements; +infinity when MSE is zero.
double psnr(std::span<const double> a, std::span<const double> b, double peak = 1.0);
double psnr(const Tensor4& a, const Tensor4& b, double peak = 1.0);
double psnr(const imageio::Image& a, const imageio::Image& b, double peak = 1.0);

Tensor4 to_tensor(const imageio::Image& image);
imageio::Image to_image(const Tensor4& t, int batch_index = 0);

}  // namespace trnr::nn
