#include "trnr/nn/optim.hpp"

#include <cmath>

namespace trnr::nn {

AdamState AdamState::for_params(const ParamSet& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamOptions& opt) {
  params.check_layout(grads, "adam_step");
  if (state.m.empty() && !params.empty()) state = AdamState::for_params(params);
  params.check_layout(state.m, "adam_step state");
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i].values;
    const auto& g = grads[i].values;
    auto& m = state.m[i].values;
    auto& v = state.v[i].values;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g[k];
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      theta[k] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
}

void sgd_step(ParamSet& params, const ParamSet& grads, double alpha) {
  params.check_layout(grads, "sgd_step");
  if (alpha == 0.0) return;
  params.axpy(-alpha, grads);
}

}  // namespace trnr::nn
