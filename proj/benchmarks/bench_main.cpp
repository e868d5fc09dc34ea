#include <benchmark/benchmark.h>

#include <numeric>

#include "trnr/cluster.hpp"
#include "trnr/imageio.hpp"
#include "trnr/nn/loss.hpp"
#include "trnr/nn/model.hpp"
#include "trnr/sampler.hpp"
#include "trnr/train/objective.hpp"

using namespace trnr;

namespace {

nn::Tensor4 noise_tensor(nn::Shape4 s, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  nn::Tensor4 t(s);
  for (auto& v : t.data) v = u(rng);
  return t;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  nn::ParamSet p;
  const auto w = p.add("w", {c, c, 3, 3}, 0.01);
  const auto x = noise_tensor({8, c, 32, 32}, 1);
  for (auto _ : state) {
    nn::Tape t(p, false);
    benchmark::DoNotOptimize(t.value(t.conv2d(t.input(x), w, 2)).data.data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(48);

static void BM_Conv2dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  nn::ParamSet p;
  const auto w = p.add("w", {c, c, 3, 3}, 0.01);
  const auto x = noise_tensor({8, c, 32, 32}, 1);
  const nn::Tensor4 g(8, c, 32, 32, 1.0);
  for (auto _ : state) {
    nn::Tape t(p, true);
    const auto y = t.conv2d(t.input(x), w, 2);
    benchmark::DoNotOptimize(t.backward(y, g));
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(8)->Arg(48);

static void BM_ModelLossAndGrad(benchmark::State& state) {
  nn::ModelConfig cfg;
  cfg.channels = 8;
  Rng rng = make_rng(2);
  const auto model = nn::build_model(cfg, rng);
  const auto images = imageio::synthetic_dataset(2, 64, 64, 1, 25.0, 3);
  std::vector<imageio::Patch> patches;
  for (const auto& s : images)
    for (auto& q : imageio::extract_patches(s, 16, 8)) patches.push_back(std::move(q));
  const train::PatchObjective obj(cfg, patches, 5.0);
  std::vector<std::size_t> batch(8);
  std::iota(batch.begin(), batch.end(), std::size_t{0});
  nn::ParamSet grad;
  for (auto _ : state) benchmark::DoNotOptimize(obj.loss_and_grad(model.params, batch, grad));
}
BENCHMARK(BM_ModelLossAndGrad)->Unit(benchmark::kMillisecond);

static void BM_Ssim(benchmark::State& state) {
  const auto a = noise_tensor({1, 1, 128, 128}, 4);
  const auto b = noise_tensor({1, 1, 128, 128}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(nn::ssim(a, b));
}
BENCHMARK(BM_Ssim);

static void BM_ClusterPatches(benchmark::State& state) {
  const auto images = imageio::synthetic_dataset(static_cast<int>(state.range(0)), 64, 64, 1, 25.0, 6);
  std::vector<imageio::Patch> base;
  for (const auto& s : images)
    for (auto& q : imageio::extract_patches(s, 16, 8)) base.push_back(std::move(q));
  cluster::ClusterConfig cfg;
  cfg.threshold = 2.0;
  for (auto _ : state) {
    auto patches = base;
    Rng rng = make_rng(7);
    benchmark::DoNotOptimize(cluster::cluster_patches(patches, cfg, rng));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(base.size()));
}
BENCHMARK(BM_ClusterPatches)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

static void BM_RisSample(benchmark::State& state) {
  sampler::PatchGroups images(200);
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t j = 0; j < 459; ++j) images[i].push_back(i * 459 + j);
  Rng rng = make_rng(8);
  for (auto _ : state) benchmark::DoNotOptimize(sampler::ris_sample(images, 16, rng));
}
BENCHMARK(BM_RisSample);

static void BM_RcsSample(benchmark::State& state) {
  std::vector<std::vector<std::size_t>> clusters(100);
  for (std::size_t i = 0; i < 10000; ++i) clusters[i % 100].push_back(i);
  Rng rng = make_rng(9);
  for (auto _ : state) benchmark::DoNotOptimize(sampler::rcs_sample(clusters, 16, rng));
}
BENCHMARK(BM_RcsSample);

static void BM_SimulateRis(benchmark::State& state) {
  const sampler::SamplerSpec spec{sampler::Strategy::ris, 200, 459, 16, {}};
  for (auto _ : state) benchmark::DoNotOptimize(sampler::simulate_unuse(spec, 12, 10000, 1));
}
BENCHMARK(BM_SimulateRis)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
