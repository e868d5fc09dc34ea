#pragma once

#include <cstdint>

#include "trnr/nn/params.hpp"

namespace trnr::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t step = 0;

  /// Zero moments with the layout of `params`.
  static AdamState for_params(const ParamSet& params);
};

/// Bias-corrected Adam: theta -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamOptions& opt = {});

/// theta -= alpha * g
void sgd_step(ParamSet& params, const ParamSet& grads, double alpha);

}  // namespace trnr::nn
