#include "trnr/train/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "trnr/error.hpp"
#include "trnr/nn/loss.hpp"

namespace trnr::train {

namespace {

std::vector<int> tile_starts(int length, int tile, int overlap) {
  if (length <= tile) return {0};
  std::vector<int> starts;
  const int step = tile - overlap;
  for (int s = 0; s + tile < length; s += step) starts.push_back(s);
  starts.push_back(length - tile);
  return starts;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double EvalTable::mean_psnr() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.psnr;
  return s / static_cast<double>(rows.size());
}

double EvalTable::mean_ssim() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.ssim;
  return s / static_cast<double>(rows.size());
}

void EvalTable::write_csv(std::ostream& out) const {
  out << "# seed=" << seed << " config_hash=" << config_hash << '\n';
  out << "image_id,psnr,ssim\n";
  for (const auto& r : rows) out << r.image_id << ',' << fmt(r.psnr) << ',' << fmt(r.ssim) << '\n';
  out << "mean," << fmt(mean_psnr()) << ',' << fmt(mean_ssim()) << '\n';
}

EvalTable EvalTable::read_csv(std::istream& in) {
  EvalTable t;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        if (tok.rfind("seed=", 0) == 0) t.seed = std::stoull(tok.substr(5));
        if (tok.rfind("config_hash=", 0) == 0) t.config_hash = tok.substr(12);
      }
      continue;
    }
    if (!header) {
      require(line == "image_id,psnr,ssim", "malformed metrics CSV", "unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    require(c1 != std::string::npos && c2 != std::string::npos, "malformed metrics CSV", line);
    EvalRow r{line.substr(0, c1), std::strtod(line.c_str() + c1 + 1, nullptr),
              std::strtod(line.c_str() + c2 + 1, nullptr)};
    if (r.image_id == "mean") continue;
    t.rows.push_back(std::move(r));
  }
  require(header, "malformed metrics CSV", "missing header");
  return t;
}

imageio::Image restore(const nn::ModelConfig& cfg, const nn::ParamSet& params, const imageio::Image& degraded,
                       const TileOptions& tiles) {
  require(degraded.channels == cfg.image_channels, "dimension mismatch",
          "model expects " + std::to_string(cfg.image_channels) + " channels, image has " +
              std::to_string(degraded.channels));
  require(tiles.tile > tiles.overlap && tiles.overlap >= 0, "invalid config", "tile must exceed overlap");
  const int H = degraded.height;
  const int W = degraded.width;
  const int C = degraded.channels;
  const int th = std::min(tiles.tile, H);
  const int tw = std::min(tiles.tile, W);
  imageio::Image sum(H, W, C, 0.0);
  std::vector<double> count(degraded.plane_size(), 0.0);
  for (int r0 : tile_starts(H, tiles.tile, tiles.overlap)) {
    for (int c0 : tile_starts(W, tiles.tile, tiles.overlap)) {
      nn::Tensor4 x(1, C, th, tw);
      for (int c = 0; c < C; ++c)
        for (int r = 0; r < th; ++r)
          for (int q = 0; q < tw; ++q) x.at(0, c, r, q) = degraded.at(c, r0 + r, c0 + q);
      const auto y = nn::infer(cfg, params, x);
      for (int c = 0; c < C; ++c)
        for (int r = 0; r < th; ++r)
          for (int q = 0; q < tw; ++q) sum.at(c, r0 + r, c0 + q) += y.at(0, c, r, q);
      for (int r = 0; r < th; ++r)
        for (int q = 0; q < tw; ++q) count[static_cast<std::size_t>(r0 + r) * W + static_cast<std::size_t>(c0 + q)] += 1.0;
    }
  }
  const std::size_t plane = degraded.plane_size();
  for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] = std::clamp(sum.data[i] / count[i % plane], 0.0, 1.0);
  return sum;
}

EvalTable evaluate(const nn::ModelConfig& cfg, const nn::ParamSet& params,
                   const std::vector<imageio::PairedSample>& testset, const TileOptions& tiles,
                   std::vector<imageio::Image>* restored) {
  EvalTable t;
  for (const auto& s : testset) {
    require(s.clean.same_shape(s.degraded), "dimension mismatch", "clean/degraded shapes differ for " + s.id);
    auto out = restore(cfg, params, s.degraded, tiles);
    t.rows.push_back({s.id, nn::psnr(out, s.clean), nn::ssim(out, s.clean)});
    if (restored) restored->push_back(std::move(out));
  }
  return t;
}

EvalTable evaluate_degraded(const std::vector<imageio::PairedSample>& testset) {
  EvalTable t;
  for (const auto& s : testset) {
    require(s.clean.same_shape(s.degraded), "dimension mismatch", "clean/degraded shapes differ for " + s.id);
    t.rows.push_back({s.id, nn::psnr(s.degraded, s.clean), nn::ssim(s.degraded, s.clean)});
  }
  return t;
}

nn::Model model_from_checkpoint(const nn::Checkpoint& ckpt, const std::optional<nn::ModelConfig>& expected) {
  const nn::ModelConfig cfg = expected.value_or(ckpt.config);
  if (expected && nn::to_json(*expected) != nn::to_json(ckpt.config)) {
    fail("checkpoint/model mismatch", "checkpoint architecture " + nn::to_json(ckpt.config).dump() +
                                          " differs from expected " + nn::to_json(*expected).dump());
  }
  Rng rng = make_rng(0);
  auto model = nn::build_model(cfg, rng);
  if (!model.params.same_layout(ckpt.params)) {
    fail("checkpoint/model mismatch", "stored tensors do not match the architecture");
  }
  model.params = ckpt.params;
  return model;
}

}  // namespace trnr::train
