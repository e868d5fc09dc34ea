#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "layer_cases.hpp"
#include "temp_dir.hpp"
#include "trnr/nn/checkpoint.hpp"
#include "trnr/nn/loss.hpp"
#include "trnr/nn/model.hpp"
#include "trnr/nn/optim.hpp"

using namespace trnr;
using namespace trnr::nn;
using trnr::testing::TempDir;

TEST(Gradients, LayerPrimitives) {
  for (const auto& c : trnr::testing::layer_cases()) {
    const auto r = trnr::testing::check_graph(c.params, c.x, c.fn);
    EXPECT_LE(r.max_rel, 1e-4) << c.name << ": " << r.worst;
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(Gradients, ComposedModel) {
  for (auto act : {Activation::prelu, Activation::leaky_relu}) {
    for (auto norm : {Normalization::affine, Normalization::none}) {
      const auto c = trnr::testing::composed_model_case(act, norm);
      const auto r = trnr::testing::check_graph(c.params, c.x, c.fn, 1e-6);
      EXPECT_LE(r.max_rel, 1e-4) << to_string(act) << "/" << to_string(norm) << ": " << r.worst;
    }
  }
}

TEST(Gradients, Losses) {
  std::mt19937_64 rng(3);
  const auto a = trnr::testing::random_tensor({2, 1, 13, 12}, rng, 0.0, 1.0);
  const auto b = trnr::testing::random_tensor({2, 1, 13, 12}, rng, 0.0, 1.0);
  for (double lambda : {0.0, 5.0}) {
    const auto g = combined_loss_grad(a, b, lambda);
    EXPECT_DOUBLE_EQ(g.value, combined_loss(a, b, lambda));
    const double h = 1e-6;
    auto x = a;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double o = x.data[i];
      x.data[i] = o + h;
      const double fp = combined_loss(x, b, lambda);
      x.data[i] = o - h;
      const double fm = combined_loss(x, b, lambda);
      x.data[i] = o;
      ASSERT_LE(trnr::testing::rel_error(g.grad.data[i], (fp - fm) / (2 * h), 1e-4), 1e-4) << i;
    }
  }
}

TEST(Tape, StaleAndConstant) {
  ParamSet p;
  p.add("w", {1, 1, 3, 3}, 0.1);
  Tape t(p);
  const auto y = t.conv2d(t.input(Tensor4(1, 1, 5, 5, 1.0)), 0);
  const auto g = t.backward(y, Tensor4(1, 1, 5, 5, 0.0));
  EXPECT_EQ(g[0].values, std::vector<double>(9, 0.0));
  EXPECT_THROW_TAG(t.backward(y, Tensor4(1, 1, 5, 5, 1.0)), "stale tape");
}

TEST(Model, ShapesAndIdentityInit) {
  ModelConfig cfg;
  cfg.image_channels = 3;
  cfg.stages = 1;
  cfg.channels = 4;
  Rng rng = make_rng(1);
  const auto m = build_model(cfg, rng);
  std::mt19937_64 r(2);
  const auto x = trnr::testing::random_tensor({1, 3, 16, 16}, r, 0.0, 1.0);
  const auto y = infer(cfg, m.params, x);
  EXPECT_EQ(y.shape, x.shape);
  EXPECT_EQ(y.data, x.data);
  EXPECT_EQ(infer(cfg, m.params, x).data, y.data);

  auto perturbed = m.params;
  for (auto& t : perturbed)
    for (auto& v : t.values) v += 0.01;
  for (int h : {cfg.min_input_size(), 9, 17}) {
    for (int w : {cfg.min_input_size(), 12, 23}) {
      const auto xi = trnr::testing::random_tensor({2, 3, h, w}, r, 0.0, 1.0);
      const auto yi = infer(cfg, perturbed, xi);
      EXPECT_EQ(yi.shape, xi.shape);
      EXPECT_TRUE(yi.all_finite());
    }
  }
}

TEST(Model, FullScaleParameterCount) {
  ModelConfig cfg;
  cfg.image_channels = 3;
  cfg.stages = 4;
  cfg.channels = 48;
  Rng rng = make_rng(0);
  const auto m = build_model(cfg, rng);
  const double n = static_cast<double>(m.params.numel());
  EXPECT_NEAR(n / 0.92e6, 1.0, 0.10) << n;
}

TEST(Model, PlainResnetBuilds) {
  ModelConfig cfg;
  cfg.architecture = Architecture::resnet_plain;
  cfg.stages = 2;
  cfg.channels = 4;
  Rng rng = make_rng(0);
  const auto m = build_model(cfg, rng);
  std::mt19937_64 r(1);
  const auto x = trnr::testing::random_tensor({1, 1, 8, 8}, r, 0.0, 1.0);
  EXPECT_EQ(infer(cfg, m.params, x).data, x.data);
}

TEST(Model, InvalidConfig) {
  ModelConfig cfg;
  cfg.kernel = 2;
  EXPECT_THROW_TAG(cfg.validate(), "invalid config");
}

TEST(Loss, L1) {
  std::mt19937_64 r(4);
  const auto a = trnr::testing::random_tensor({2, 2, 5, 5}, r);
  auto b = a;
  EXPECT_EQ(l1_loss(a, b), 0.0);
  for (auto& v : b.data) v += 0.5;
  EXPECT_NEAR(l1_loss(a, b), 0.5, 1e-15);
  const auto c = trnr::testing::random_tensor({2, 2, 5, 5}, r);
  double ref = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) ref += std::abs(a.data[i] - c.data[i]);
  EXPECT_NEAR(l1_loss(a, c), ref / a.numel(), 1e-12);
  const auto g = l1_loss_grad(a, a);
  for (double v : g.grad.data) EXPECT_EQ(v, 0.0);
  EXPECT_THROW_TAG(l1_loss(a, Tensor4(1, 2, 5, 5)), "shape mismatch");
}

TEST(Loss, Ssim) {
  std::mt19937_64 r(5);
  const auto a = trnr::testing::random_tensor({1, 1, 16, 16}, r, 0.0, 1.0);
  const auto b = trnr::testing::random_tensor({1, 1, 16, 16}, r, 0.0, 1.0);
  EXPECT_EQ(ssim(a, a), 1.0);
  EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
  EXPECT_LT(ssim(a, b), 1.0);
  EXPECT_GT(ssim(a, b), -1.0);
  const double c1 = 1e-4, c2 = 9e-4;
  const double expected = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1) * (c2 / c2);
  EXPECT_NEAR(ssim(Tensor4(1, 1, 11, 11, 0.5), Tensor4(1, 1, 11, 11, 0.6)), expected, 1e-12);
  EXPECT_NEAR(expected, (0.6 + 1e-4) / (0.61 + 1e-4), 1e-15);
  EXPECT_THROW_TAG(ssim(Tensor4(1, 1, 8, 8), Tensor4(1, 1, 8, 8)), "image smaller than window");
}

TEST(Loss, Combined) {
  std::mt19937_64 r(6);
  const auto a = trnr::testing::random_tensor({1, 1, 12, 12}, r, 0.0, 1.0);
  const auto b = trnr::testing::random_tensor({1, 1, 12, 12}, r, 0.0, 1.0);
  EXPECT_EQ(combined_loss(a, b, 0.0), l1_loss(a, b));
  EXPECT_EQ(combined_loss(a, a, 5.0), 0.0);
  EXPECT_NEAR(combined_loss(a, b, 5.0), l1_loss(a, b) + 5.0 * (1.0 - ssim(a, b)), 1e-12);
  EXPECT_THROW_TAG(combined_loss(a, b, -1.0), "negative lambda");
}

TEST(Loss, Psnr) {
  Tensor4 a(1, 3, 4, 4, 0.2), b(1, 3, 4, 4, 0.2 + 1.0 / 255.0);
  EXPECT_NEAR(psnr(a, b), 20.0 * std::log10(255.0), 1e-6);
  EXPECT_NEAR(20.0 * std::log10(255.0), 48.13, 0.01);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_NEAR(psnr(Tensor4(1, 1, 2, 2, 0.0), Tensor4(1, 1, 2, 2, 1.0)), 0.0, 1e-12);
}

TEST(Optim, Adam) {
  ParamSet p;
  p.add("x", {1}, 0.0);
  auto g = p.zeros_like();
  auto st = AdamState::for_params(p);
  adam_step(p, g, st);
  EXPECT_EQ(p[0].values[0], 0.0);
  st = AdamState::for_params(p);
  g[0].values[0] = 1.0;
  adam_step(p, g, st);
  EXPECT_NEAR(p[0].values[0], -0.001, 1e-9);
  EXPECT_EQ(st.step, 1);

  // two steps against the scalar recurrence
  ParamSet q;
  q.add("x", {1}, 1.0);
  auto s = AdamState::for_params(q);
  double th = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    const double gr = 2.0 * th;
    auto gq = q.zeros_like();
    gq[0].values[0] = gr;
    adam_step(q, gq, s, {0.01, 0.9, 0.999, 1e-8});
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    th -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_DOUBLE_EQ(q[0].values[0], th);
  }
}

TEST(Optim, Sgd) {
  ParamSet p;
  p.add("x", {1}, 1.0);
  auto g = p.zeros_like();
  g[0].values[0] = 2.0;
  sgd_step(p, g, 0.1);
  EXPECT_DOUBLE_EQ(p[0].values[0], 0.8);
  sgd_step(p, g, 0.0);
  EXPECT_DOUBLE_EQ(p[0].values[0], 0.8);
  ParamSet other;
  other.add("y", {2});
  EXPECT_THROW_TAG(sgd_step(p, other, 0.1), "shape mismatch");
}

TEST(Checkpoint, RoundTrip) {
  TempDir dir;
  ModelConfig cfg;
  cfg.channels = 4;
  Rng rng = make_rng(3);
  Checkpoint ck;
  ck.config = cfg;
  ck.params = build_model(cfg, rng).params;
  ck.adam = AdamState::for_params(ck.params);
  ck.adam->step = 7;
  ck.rng_state = rng_state(rng);
  ck.seed = 3;
  ck.config_hash = "deadbeef";
  ck.iteration = 12;
  save_checkpoint(ck, dir / "a.ckpt");
  save_checkpoint(ck, dir / "b.ckpt");
  const auto back = load_checkpoint(dir / "a.ckpt");
  EXPECT_TRUE(back.params == ck.params);
  EXPECT_EQ(back.adam->step, 7);
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.config_hash, "deadbeef");
  EXPECT_EQ(back.iteration, 12);
  EXPECT_EQ(to_json(back.config), to_json(cfg));
  Rng restored;
  restore_rng_state(restored, back.rng_state);
  EXPECT_EQ(restored(), rng());

  std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
  EXPECT_EQ(std::string((std::istreambuf_iterator<char>(fa)), {}), std::string((std::istreambuf_iterator<char>(fb)), {}));

  save_checkpoint(ck, dir / "f.ckpt", Dtype::f32);
  const auto f = load_checkpoint(dir / "f.ckpt");
  for (std::size_t i = 0; i < f.params.size(); ++i)
    for (std::size_t j = 0; j < f.params[i].numel(); ++j)
      EXPECT_EQ(f.params[i].values[j], static_cast<double>(static_cast<float>(ck.params[i].values[j])));

  std::ofstream(dir / "bad.ckpt") << "not a checkpoint";
  EXPECT_THROW_TAG(load_checkpoint(dir / "bad.ckpt"), "malformed checkpoint");
}
