#include "trnr/train/objective.hpp"

#include <cmath>

#include "trnr/error.hpp"

namespace trnr::train {

void Objective::hessian_vector(const ParamSet& params, std::span<const std::size_t> batch, const ParamSet& v,
                               ParamSet& out) const {
  const double vnorm = std::sqrt(v.dot(v));
  out = params.zeros_like();
  if (vnorm == 0.0) return;
  const double h = 1e-5 / vnorm;
  ParamSet plus = params, minus = params, gp, gm;
  plus.axpy(h, v);
  minus.axpy(-h, v);
  loss_and_grad(plus, batch, gp);
  loss_and_grad(minus, batch, gm);
  out = gp;
  out.axpy(-1.0, gm).scale(1.0 / (2.0 * h));
}

PatchObjective::PatchObjective(nn::ModelConfig model, std::span<const imageio::Patch> patches, double lambda,
                               nn::SsimOptions ssim)
    : model_(std::move(model)), patches_(patches), lambda_(lambda), ssim_(ssim) {
  require(lambda_ >= 0.0, "negative lambda", std::to_string(lambda_));
  model_.validate();
  if (!patches_.empty()) {
    const auto& p = patches_.front();
    require(p.channels == model_.image_channels, "shape mismatch",
            "patches have " + std::to_string(p.channels) + " channels, model expects " +
                std::to_string(model_.image_channels));
    if (lambda_ > 0.0) {
      require(p.size >= ssim_.window, "image smaller than window",
              "patch size " + std::to_string(p.size) + " < SSIM window " + std::to_string(ssim_.window));
    }
  }
}

nn::Tensor4 PatchObjective::gather(std::span<const std::size_t> batch, bool clean) const {
  require(!batch.empty(), "empty batch");
  const auto& first = patches_[batch.front()];
  nn::Tensor4 t(static_cast<int>(batch.size()), first.channels, first.size, first.size);
  const std::size_t per = first.clean.size();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    require(batch[b] < patches_.size(), "patch index out of range", std::to_string(batch[b]));
    const auto& src = clean ? patches_[batch[b]].clean : patches_[batch[b]].degraded;
    require(src.size() == per, "shape mismatch", "patches in a batch must share a shape");
    std::copy(src.begin(), src.end(), t.data.begin() + static_cast<std::ptrdiff_t>(b * per));
  }
  return t;
}

nn::Tensor4 PatchObjective::degraded_batch(std::span<const std::size_t> batch) const { return gather(batch, false); }
nn::Tensor4 PatchObjective::clean_batch(std::span<const std::size_t> batch) const { return gather(batch, true); }

double PatchObjective::loss(const ParamSet& params, std::span<const std::size_t> batch) const {
  const auto pred = nn::infer(model_, params, degraded_batch(batch));
  return nn::combined_loss(pred, clean_batch(batch), lambda_, ssim_);
}

double PatchObjective::loss_and_grad(const ParamSet& params, std::span<const std::size_t> batch,
                                     ParamSet& grad) const {
  auto fwd = nn::forward(model_, params, degraded_batch(batch));
  const auto l = nn::combined_loss_grad(fwd.output, clean_batch(batch), lambda_, ssim_);
  grad = nn::backward(fwd, l.grad);
  return l.value;
}

}  // namespace trnr::train
