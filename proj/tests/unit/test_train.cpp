#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "temp_dir.hpp"
#include "toy_objective.hpp"
#include "trnr/error.hpp"
#include "trnr/train/evaluate.hpp"
#include "trnr/train/pipeline.hpp"
#include "trnr/train/train.hpp"

using namespace trnr;
using namespace trnr::train;
using trnr::testing::make_cluster_set;
using trnr::testing::QuadraticObjective;

namespace {

QuadraticObjective toy(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.5, 2.0);
  std::vector<double> a(n);
  std::vector<std::vector<double>> c(n, std::vector<double>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = w(rng);
    for (auto& v : c[i]) v = u(rng);
  }
  return {a, c};
}

std::vector<std::vector<std::size_t>> blocks(std::size_t clusters, std::size_t each) {
  std::vector<std::vector<std::size_t>> g(clusters);
  for (std::size_t j = 0; j < clusters; ++j)
    for (std::size_t i = 0; i < each; ++i) g[j].push_back(j * each + i);
  return g;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.alpha = 0.1;
  cfg.beta = 0.05;
  cfg.tasks_per_iteration = 3;
  cfg.task = {4, 1, 1, false};
  cfg.lambda = 0.0;
  cfg.iterations = 5;
  cfg.outer_optimizer = OuterOptimizer::sgd;
  return cfg;
}

}  // namespace

TEST(Inner, AlphaZeroKeepsTheta) {
  const auto obj = toy(12, 3, 1);
  const auto p = obj.make_params(0.3);
  const std::vector<std::size_t> ids{0, 4, 7};
  const auto r = inner_adapt(obj, p, ids, 0.0, 3, true, true);
  EXPECT_TRUE(r.params == p);
  EXPECT_EQ(r.trajectory.size(), 3u);
  EXPECT_EQ(*r.loss_after, r.loss_before);
  EXPECT_THROW_TAG(inner_adapt(obj, p, {}, 0.1, 1), "empty batch");
}

TEST(Inner, GradientStep) {
  const auto obj = toy(12, 2, 2);
  const auto p = obj.make_params(0.1);
  const std::vector<std::size_t> ids{1, 2};
  nn::ParamSet g;
  obj.loss_and_grad(p, ids, g);
  auto expect = p;
  expect.axpy(-0.2, g);
  const auto r = inner_adapt(obj, p, ids, 0.2, 1);
  for (std::size_t d = 0; d < 2; ++d) EXPECT_DOUBLE_EQ(r.params[0].values[d], expect[0].values[d]);
  EXPECT_LT(obj.loss(r.params, ids), obj.loss(p, ids));
}

TEST(Meta, ReductionToPooledGradientStep) {
  const auto obj = toy(40, 3, 3);
  const auto set = make_cluster_set(blocks(8, 5));
  auto cfg = toy_config();
  cfg.alpha = 0.0;
  cfg.iterations = 1;
  cfg.order = Order::first;
  const auto p0 = obj.make_params(0.25);
  const auto res = trnr_train(cfg, obj, p0, set);

  Rng rng = make_rng(cfg.seed, 1);
  const auto tasks = taskgen::sample_task_batch(set, cfg.task, cfg.tasks_per_iteration, rng, 0);
  std::vector<std::size_t> pooled;
  for (const auto& t : tasks) pooled.insert(pooled.end(), t.val_ids.begin(), t.val_ids.end());
  nn::ParamSet g;
  obj.loss_and_grad(p0, pooled, g);
  auto expect = p0;
  expect.axpy(-cfg.beta, g);
  for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(res.params[0].values[d], expect[0].values[d], 1e-12);
}

TEST(Meta, FirstOrderAveragesAdaptedValidationGradients) {
  const auto obj = toy(40, 2, 4);
  const auto set = make_cluster_set(blocks(8, 5));
  const auto p = obj.make_params(-0.2);
  Rng rng = make_rng(9);
  const auto tasks = taskgen::sample_task_batch(set, {4, 1, 1, false}, 4, rng);
  std::vector<AdaptResult> adapted;
  for (const auto& t : tasks) adapted.push_back(inner_adapt(obj, p, t.train_ids, 0.3, 2));
  const auto mg = meta_gradient(obj, p, tasks, adapted, Order::first, 0.3);
  auto sum = p.zeros_like();
  double loss = 0.0;
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    nn::ParamSet g;
    loss += obj.loss_and_grad(adapted[j].params, tasks[j].val_ids, g);
    sum.axpy(1.0, g);
  }
  sum.scale(1.0 / tasks.size());
  EXPECT_NEAR(mg.loss, loss / tasks.size(), 1e-14);
  for (std::size_t d = 0; d < 2; ++d) EXPECT_NEAR(mg.grad[0].values[d], sum[0].values[d], 1e-14);
  const auto mg4 = meta_gradient(obj, p, tasks, adapted, Order::first, 0.3, 4);
  EXPECT_TRUE(mg4.grad == mg.grad);

  const auto stepped = outer_update(obj, p, tasks, adapted, 0.5, Order::first, 0.3);
  for (std::size_t d = 0; d < 2; ++d)
    EXPECT_NEAR(stepped[0].values[d], p[0].values[d] - 0.5 * sum[0].values[d], 1e-14);
}

TEST(Meta, SecondOrderScalar) {
  // train item: a=2, val item: a=1; theta_j = theta - 2 alpha (theta - c0)
  // d/dtheta L_val(theta_j) = (1 - 2 alpha) (theta_j - c1)
  const QuadraticObjective obj({2.0, 1.0}, {{0.5}, {-0.3}});
  const double alpha = 0.1, theta = 0.9;
  auto p = obj.make_params(theta);
  taskgen::Task t;
  t.train_ids = {0};
  t.val_ids = {1};
  const std::vector<taskgen::Task> tasks{t};
  const std::vector<AdaptResult> adapted{inner_adapt(obj, p, t.train_ids, alpha, 1, true)};
  const double tj = theta - alpha * 2.0 * (theta - 0.5);
  EXPECT_NEAR(adapted[0].params[0].values[0], tj, 1e-15);
  const auto so = meta_gradient(obj, p, tasks, adapted, Order::second, alpha);
  EXPECT_NEAR(so.grad[0].values[0], (1.0 - 2.0 * alpha) * (tj + 0.3), 1e-14);
  const auto fo = meta_gradient(obj, p, tasks, adapted, Order::first, alpha);
  EXPECT_NEAR(fo.grad[0].values[0], tj + 0.3, 1e-14);

  // two inner steps: factor (1 - 2 alpha)^2
  const std::vector<AdaptResult> two{inner_adapt(obj, p, t.train_ids, alpha, 2, true)};
  const double t2 = 0.5 + (theta - 0.5) * (1 - 2 * alpha) * (1 - 2 * alpha);
  const auto so2 = meta_gradient(obj, p, tasks, two, Order::second, alpha);
  EXPECT_NEAR(so2.grad[0].values[0], (1 - 2 * alpha) * (1 - 2 * alpha) * (t2 + 0.3), 1e-14);
}

TEST(Meta, SecondOrderFiniteDifferenceHvp) {
  // default central-difference HVP against the exact one
  class Fd final : public train::Objective {
   public:
    explicit Fd(const QuadraticObjective& q) : q_(q) {}
    double loss(const ParamSet& p, std::span<const std::size_t> b) const override { return q_.loss(p, b); }
    double loss_and_grad(const ParamSet& p, std::span<const std::size_t> b, ParamSet& g) const override {
      return q_.loss_and_grad(p, b, g);
    }

   private:
    const QuadraticObjective& q_;
  };
  const auto obj = toy(10, 3, 5);
  const Fd fd(obj);
  const auto p = obj.make_params(0.2);
  auto v = p;
  v[0].values = {0.3, -1.0, 2.0};
  const std::vector<std::size_t> b{1, 3, 5};
  nn::ParamSet exact, approx;
  obj.hessian_vector(p, b, v, exact);
  fd.hessian_vector(p, b, v, approx);
  for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(approx[0].values[d], exact[0].values[d], 1e-8);
}

TEST(Trnr, ZeroGradientIsNoop) {
  const QuadraticObjective obj(std::vector<double>(20, 1.0), std::vector<std::vector<double>>(20, {0.7, -0.2}));
  const auto set = make_cluster_set(blocks(5, 4));
  auto p = obj.make_params();
  p[0].values = {0.7, -0.2};
  for (auto opt : {OuterOptimizer::sgd, OuterOptimizer::adam}) {
    auto cfg = toy_config();
    cfg.outer_optimizer = opt;
    const auto res = trnr_train(cfg, obj, p, set);
    EXPECT_TRUE(res.params == p);
  }
}

TEST(Trnr, ZeroIterations) {
  const auto obj = toy(20, 2, 6);
  const auto set = make_cluster_set(blocks(5, 4));
  auto cfg = toy_config();
  cfg.iterations = 0;
  int checkpoints = 0;
  TrainHooks hooks;
  hooks.checkpoint = [&](std::int64_t, const ParamSet&, const nn::AdamState&, const Rng&) { ++checkpoints; };
  const auto p = obj.make_params(0.4);
  const auto res = trnr_train(cfg, obj, p, set, hooks);
  EXPECT_TRUE(res.params == p);
  EXPECT_TRUE(res.record.iterations.empty());
  EXPECT_EQ(checkpoints, 0);
}

TEST(Trnr, DeterministicAndThreadInvariant) {
  const auto obj = toy(40, 3, 7);
  const auto set = make_cluster_set(blocks(8, 5));
  auto cfg = toy_config();
  cfg.outer_optimizer = OuterOptimizer::adam;
  cfg.iterations = 20;
  const auto p = obj.make_params(0.5);
  std::ostringstream t1, t2;
  TrainHooks h1, h2;
  h1.task_trace = &t1;
  h2.task_trace = &t2;
  const auto a = trnr_train(cfg, obj, p, set, h1);
  cfg.threads = 3;
  const auto b = trnr_train(cfg, obj, p, set, h2);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(t1.str(), t2.str());
  EXPECT_EQ(a.record.outer_losses(), b.record.outer_losses());
  EXPECT_EQ(a.record.iterations.size(), 20u);
  EXPECT_EQ(a.record.mode, "trnr");
  EXPECT_EQ(a.record.iterations[0].inner_before.size(), 3u);
  EXPECT_EQ(a.record.iterations[0].inner_after.size(), 3u);
  cfg.seed = 1;
  const auto c = trnr_train(cfg, obj, p, set);
  EXPECT_FALSE(a.params == c.params);
}

TEST(Trnr, CheckpointHookCadence) {
  const auto obj = toy(20, 2, 8);
  const auto set = make_cluster_set(blocks(5, 4));
  auto cfg = toy_config();
  cfg.iterations = 7;
  std::vector<std::int64_t> at;
  TrainHooks hooks;
  hooks.checkpoint_every = 3;
  hooks.checkpoint = [&](std::int64_t i, const ParamSet&, const nn::AdamState&, const Rng&) { at.push_back(i); };
  trnr_train(cfg, obj, obj.make_params(), set, hooks);
  EXPECT_EQ(at, (std::vector<std::int64_t>{3, 6, 7}));
}

TEST(Trnr, DivergenceGuard) {
  const auto obj = toy(20, 2, 9);
  const auto set = make_cluster_set(blocks(5, 4));
  auto cfg = toy_config();
  cfg.alpha = 0.0;
  cfg.beta = 10.0;
  cfg.iterations = 50;
  EXPECT_THROW(trnr_train(cfg, obj, obj.make_params(3.0), set), DivergenceError);
}

TEST(Trnr, InvalidConfig) {
  auto cfg = toy_config();
  cfg.alpha = -1.0;
  EXPECT_THROW_TAG(cfg.validate(), "invalid config");
  cfg = toy_config();
  cfg.tasks_per_iteration = 0;
  EXPECT_THROW_TAG(cfg.validate(), "invalid config");
  EXPECT_THROW_TAG(order_from_string("third"), "invalid config");
  EXPECT_EQ(training_strategy_from_string("rcs"), Strategy::rcs);
}

TEST(Baseline, RcsVisitsRareClusterMoreThanRis) {
  const auto obj = toy(100, 1, 10);
  std::vector<std::vector<std::size_t>> clusters{{0}};
  for (std::size_t j = 0; j < 9; ++j) {
    clusters.emplace_back();
    for (std::size_t i = 0; i < 11; ++i) clusters.back().push_back(1 + j * 11 + i);
  }
  const auto set = make_cluster_set(clusters);
  const auto images = blocks(10, 10);
  auto cfg = toy_config();
  cfg.batch_size = 5;
  cfg.iterations = 2000;
  cfg.beta = 1e-4;
  auto visits = [&](sampler::Strategy s) {
    long n = 0;
    TrainHooks hooks;
    hooks.on_batch = [&](std::int64_t, const std::vector<std::size_t>& b) {
      EXPECT_EQ(b.size(), 5u);
      n += std::count(b.begin(), b.end(), std::size_t{0});
    };
    const auto r = baseline_train(cfg, s, obj, obj.make_params(), images, &set, hooks);
    EXPECT_EQ(r.record.mode, sampler::to_string(s));
    return n;
  };
  const long ris = visits(sampler::Strategy::ris);
  const long rps = visits(sampler::Strategy::rps);
  const long rcs = visits(sampler::Strategy::rcs);
  EXPECT_NEAR(ris, 100, 35);
  EXPECT_EQ(rps, 100);
  EXPECT_NEAR(rcs, 1000, 100);
  EXPECT_GT(rcs, ris);

  EXPECT_THROW_TAG(baseline_train(cfg, sampler::Strategy::rcs, obj, obj.make_params(), images, nullptr),
                   "missing manifest");
  cfg.batch_size = 11;
  EXPECT_THROW_TAG(baseline_train(cfg, sampler::Strategy::ris, obj, obj.make_params(), images, &set),
                   "invalid sampler spec");
}

TEST(Baseline, Deterministic) {
  const auto obj = toy(100, 2, 11);
  const auto images = blocks(10, 10);
  auto cfg = toy_config();
  cfg.batch_size = 4;
  cfg.iterations = 100;
  cfg.outer_optimizer = OuterOptimizer::adam;
  const auto a = baseline_train(cfg, sampler::Strategy::rps, obj, obj.make_params(), images, nullptr);
  const auto b = baseline_train(cfg, sampler::Strategy::rps, obj, obj.make_params(), images, nullptr);
  EXPECT_TRUE(a.params == b.params);
  std::vector<std::size_t> all(100);
  std::iota(all.begin(), all.end(), std::size_t{0});
  EXPECT_LT(obj.loss(a.params, all), obj.loss(obj.make_params(), all));
}

TEST(Restoration, InnerLossDescentAtDefaultAlpha) {
  const auto data = synthetic_experiment_data(3, 0, 32, 1, 25.0, 4);
  auto universe = make_patch_universe(data.train, 16, 8);
  ASSERT_EQ(universe.patches.size(), 27u);
  cluster::ClusterConfig cc;
  cc.max_clusters = 8;
  Rng crng = make_rng(4, 4);
  const auto set = cluster::cluster_patches(universe.patches, cc, crng);
  nn::ModelConfig mc;
  mc.channels = 4;
  Rng mrng = make_rng(4, 3);
  const auto model = nn::build_model(mc, mrng);
  const PatchObjective obj(mc, universe.patches, 0.0);
  TrainConfig cfg;
  cfg.task = {4, 1, 1, true};
  cfg.tasks_per_iteration = 3;
  cfg.iterations = 10;
  const auto res = trnr_train(cfg, obj, model.params, set);
  int total = 0, descended = 0;
  for (const auto& it : res.record.iterations) {
    ASSERT_EQ(it.inner_after.size(), it.inner_before.size());
    for (std::size_t j = 0; j < it.inner_before.size(); ++j) {
      ++total;
      if (it.inner_after[j] <= it.inner_before[j]) ++descended;
    }
  }
  EXPECT_EQ(total, 30);
  EXPECT_GE(descended, 27);
}

TEST(Evaluate, IdenticalImages) {
  auto set = imageio::synthetic_dataset(2, 40, 50, 1, 25.0, 1);
  for (auto& s : set) s.degraded = s.clean;
  nn::ModelConfig mc;
  mc.channels = 4;
  Rng rng = make_rng(0);
  const auto model = nn::build_model(mc, rng);
  std::vector<imageio::Image> restored;
  const auto t = evaluate(mc, model.params, set, {32, 8}, &restored);
  ASSERT_EQ(t.rows.size(), 2u);
  for (const auto& r : t.rows) {
    EXPECT_TRUE(std::isinf(r.psnr));
    EXPECT_EQ(r.ssim, 1.0);
  }
  EXPECT_EQ(restored[0].data, set[0].clean.data);
}

TEST(Evaluate, NoisyInputPsnr) {
  const auto set = imageio::synthetic_dataset(10, 64, 64, 1, 25.0, 2);
  const auto t = evaluate_degraded(set);
  EXPECT_NEAR(t.mean_psnr(), 20.0 * std::log10(255.0 / 25.0), 0.3);
}

TEST(Evaluate, TiledMatchesWholeImage) {
  const auto set = imageio::synthetic_dataset(1, 45, 70, 1, 25.0, 3);
  nn::ModelConfig mc;
  mc.channels = 4;
  Rng rng = make_rng(1);
  auto model = nn::build_model(mc, rng);
  for (auto& p : model.params)
    for (auto& v : p.values) v += 0.01;
  const auto whole = restore(mc, model.params, set[0].degraded, {128, 16});
  const auto tiled = restore(mc, model.params, set[0].degraded, {24, 8});
  ASSERT_EQ(whole.data.size(), tiled.data.size());
  double diff = 0.0;
  for (std::size_t i = 0; i < whole.data.size(); ++i) diff = std::max(diff, std::abs(whole.data[i] - tiled.data[i]));
  EXPECT_LT(diff, 0.2);
  for (double v : tiled.data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Evaluate, CsvRoundTrip) {
  EvalTable t;
  t.seed = 5;
  t.config_hash = "abc";
  t.rows = {{"a", 31.25, 0.875}, {"b", 1.0 / 3.0, 0.1}};
  std::stringstream s;
  t.write_csv(s);
  const auto text = s.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "# seed=5 config_hash=abc");
  EXPECT_NE(text.find("image_id,psnr,ssim\n"), std::string::npos);
  EXPECT_NE(text.find("\nmean,"), std::string::npos);
  const auto back = EvalTable::read_csv(s);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[1].psnr, 1.0 / 3.0);
  EXPECT_EQ(back.seed, 5u);
  EXPECT_EQ(back.config_hash, "abc");
  EXPECT_DOUBLE_EQ(t.mean_psnr(), (31.25 + 1.0 / 3.0) / 2);
}

TEST(Evaluate, CheckpointMismatch) {
  nn::ModelConfig mc;
  mc.channels = 4;
  Rng rng = make_rng(0);
  nn::Checkpoint ck;
  ck.config = mc;
  ck.params = nn::build_model(mc, rng).params;
  EXPECT_NO_THROW(model_from_checkpoint(ck));
  auto other = mc;
  other.channels = 8;
  EXPECT_THROW_TAG(model_from_checkpoint(ck, other), "checkpoint/model mismatch");
  Rng rng8 = make_rng(0);
  ck.params = nn::build_model(other, rng8).params;
  EXPECT_THROW_TAG(model_from_checkpoint(ck), "checkpoint/model mismatch");
}

TEST(Pipeline, SmallExperimentDeterministic) {
  const auto data = synthetic_experiment_data(3, 1, 32, 1, 25.0, 6);
  EXPECT_EQ(data.test[0].id.rfind("test_", 0), 0u);
  ExperimentConfig cfg;
  cfg.cluster.max_clusters = 8;
  cfg.model.channels = 4;
  cfg.train.task = {4, 1, 1, true};
  cfg.train.tasks_per_iteration = 2;
  cfg.train.iterations = 3;
  cfg.train.batch_size = 2;
  for (auto s : {Strategy::trnr, Strategy::ris, Strategy::rps, Strategy::rcs}) {
    cfg.strategy = s;
    const auto a = run_experiment(cfg, data);
    const auto b = run_experiment(cfg, data);
    EXPECT_TRUE(a.train.params == b.train.params) << to_string(s);
    EXPECT_EQ(a.val_loss, b.val_loss);
    EXPECT_EQ(a.clusters.has_value(), s == Strategy::trnr || s == Strategy::rcs);
    EXPECT_EQ(a.eval.rows.size(), 1u);
    EXPECT_TRUE(std::isfinite(a.val_loss));
  }
}
