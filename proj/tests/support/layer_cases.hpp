#pragma once

#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "trnr/nn/loss.hpp"
#include "trnr/nn/model.hpp"

namespace trnr::testing {

struct LayerCase {
  std::string name;
  nn::ParamSet params;
  nn::Tensor4 x;
  GraphFn fn;
};

inline std::vector<LayerCase> layer_cases() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  auto rand_params = [&](nn::ParamSet& p) {
    for (auto& t : p)
      for (auto& v : t.values) v = u(rng);
  };
  const nn::Shape4 xs{2, 3, 7, 6};
  std::vector<LayerCase> cases;

  for (int d : {1, 2}) {
    nn::ParamSet p;
    p.add("w", {4, 3, 3, 3});
    p.add("b", {4});
    rand_params(p);
    cases.push_back({"conv2d_d" + std::to_string(d), p, random_tensor(xs, rng),
                     [d](nn::Tape& t, nn::Var x) { return t.conv2d(x, 0, d, std::size_t{1}); }});
  }
  {
    nn::ParamSet p;
    p.add("w", {2, 3, 1, 1});
    rand_params(p);
    cases.push_back({"conv2d_1x1_nobias", p, random_tensor(xs, rng),
                     [](nn::Tape& t, nn::Var x) { return t.conv2d(x, 0, 1); }});
  }
  {
    nn::ParamSet p;
    p.add("w", {3, 3, 3, 3});
    rand_params(p);
    cases.push_back({"add_sub", p, random_tensor(xs, rng), [](nn::Tape& t, nn::Var x) {
                       const auto y = t.conv2d(x, 0, 1);
                       return t.sub(t.add(x, y), t.add(y, y));
                     }});
  }
  {
    nn::ParamSet p;
    p.add("w", {2, 3, 3, 3});
    rand_params(p);
    cases.push_back({"concat_channels", p, random_tensor(xs, rng), [](nn::Tape& t, nn::Var x) {
                       return t.concat_channels({x, t.conv2d(x, 0, 1), x});
                     }});
  }
  {
    nn::ParamSet p;
    p.add("scale", {3});
    p.add("shift", {3});
    rand_params(p);
    cases.push_back({"affine", p, random_tensor(xs, rng),
                     [](nn::Tape& t, nn::Var x) { return t.affine(x, 0, 1); }});
  }
  {
    nn::ParamSet p;
    p.add("slope", {3}, 0.2);
    rand_params(p);
    cases.push_back({"prelu", p, random_tensor(xs, rng), [](nn::Tape& t, nn::Var x) { return t.prelu(x, 0); }});
  }
  cases.push_back({"leaky_relu", {}, random_tensor(xs, rng),
                   [](nn::Tape& t, nn::Var x) { return t.leaky_relu(x, 0.2); }});
  cases.push_back({"relu", {}, random_tensor(xs, rng), [](nn::Tape& t, nn::Var x) { return t.relu(x); }});
  cases.push_back({"sigmoid", {}, random_tensor(xs, rng), [](nn::Tape& t, nn::Var x) { return t.sigmoid(x); }});
  cases.push_back({"global_avg_pool", {}, random_tensor(xs, rng),
                   [](nn::Tape& t, nn::Var x) { return t.global_avg_pool(x); }});
  cases.push_back({"channel_scale", {}, random_tensor(xs, rng), [](nn::Tape& t, nn::Var x) {
                     return t.channel_scale(x, t.sigmoid(t.global_avg_pool(x)));
                   }});
  return cases;
}

/// Q=1, 4-channel model with every parameter randomized so no branch is
/// trivially zero.
inline LayerCase composed_model_case(nn::Activation act = nn::Activation::prelu,
                                     nn::Normalization norm = nn::Normalization::affine) {
  nn::ModelConfig cfg;
  cfg.stages = 1;
  cfg.channels = 4;
  cfg.activation = act;
  cfg.normalization = norm;
  Rng rng = make_rng(11);
  auto model = nn::build_model(cfg, rng);
  std::mt19937_64 r(99);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& t : model.params)
    for (auto& v : t.values) v += n(r);
  std::mt19937_64 xr(5);
  return {"model_q1_c4", model.params, random_tensor({1, 1, 8, 8}, xr, 0.0, 1.0),
          [cfg](nn::Tape& t, nn::Var x) { return nn::forward(cfg, t, x); }};
}

}  // namespace trnr::testing
