#include "trnr/nn/model.hpp"

#include <cmath>

#include "trnr/error.hpp"

namespace trnr::nn {

std::string to_string(Architecture a) {
  return a == Architecture::msresnet_mini ? "msresnet_mini" : "resnet_plain";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "msresnet_mini") return Architecture::msresnet_mini;
  if (s == "resnet_plain") return Architecture::resnet_plain;
  fail("invalid config", "unknown architecture '" + s + "'");
}

std::string to_string(Normalization n) { return n == Normalization::affine ? "affine" : "none"; }

Normalization normalization_from_string(const std::string& s) {
  if (s == "affine") return Normalization::affine;
  if (s == "none") return Normalization::none;
  fail("invalid config", "unknown normalization '" + s + "'");
}

std::string to_string(Activation a) { return a == Activation::prelu ? "prelu" : "leaky_relu"; }

Activation activation_from_string(const std::string& s) {
  if (s == "prelu") return Activation::prelu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  fail("invalid config", "unknown activation '" + s + "'");
}

void ModelConfig::validate() const {
  const std::string tag = "invalid config";
  require(image_channels == 1 || image_channels == 3, tag, "image_channels must be 1 or 3");
  require(stages >= 1, tag, "stages (Q) must be >= 1");
  require(channels >= 1, tag, "channels must be >= 1");
  require(kernel >= 1 && kernel % 2 == 1, tag, "kernel must be odd");
  require(se_reduction >= 1, tag, "se_reduction must be >= 1");
  require(leaky_slope >= 0.0 && leaky_slope < 1.0, tag, "leaky_slope must lie in [0,1)");
  if (architecture == Architecture::msresnet_mini) {
    require(!dilations.empty(), tag, "dilations must be non-empty");
    for (int d : dilations) require(d >= 1, tag, "dilations must be >= 1");
  }
}

int ModelConfig::min_input_size() const {
  int dmax = 1;
  if (architecture == Architecture::msresnet_mini)
    for (int d : dilations) dmax = std::max(dmax, d);
  return dmax * (kernel - 1) / 2 + 1;
}

namespace {

int se_hidden(const ModelConfig& cfg) { return std::max(1, cfg.channels / cfg.se_reduction); }

struct Builder {
  const ModelConfig& cfg;
  ParamSet& params;
  Rng& rng;

  void kaiming(std::size_t idx, int fan_in, double gain2) {
    std::normal_distribution<double> dist(0.0, std::sqrt(gain2 / fan_in));
    for (double& v : params[idx].values) v = dist(rng);
  }

  double act_gain2() const { return 2.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope); }

  void unit(const std::string& name, int cin, int cout) {
    const int k = cfg.kernel;
    kaiming(params.add(name + ".conv.w", {cout, cin, k, k}), cin * k * k, act_gain2());
    if (cfg.normalization == Normalization::affine) {
      params.add(name + ".norm.scale", {cout}, 1.0);
      params.add(name + ".norm.shift", {cout}, 0.0);
    } else {
      params.add(name + ".conv.b", {cout}, 0.0);
    }
    if (cfg.activation == Activation::prelu) params.add(name + ".act.slope", {cout}, cfg.leaky_slope);
  }

  void se(const std::string& name) {
    const int c = cfg.channels, h = se_hidden(cfg);
    kaiming(params.add(name + ".fc1.w", {h, c, 1, 1}), c, 2.0);
    params.add(name + ".fc1.b", {h}, 0.0);
    kaiming(params.add(name + ".fc2.w", {c, h, 1, 1}), h, 1.0);
    params.add(name + ".fc2.b", {c}, 0.0);
  }

  void tail() {
    const int k = cfg.kernel;
    params.add("tail.conv.w", {cfg.image_channels, cfg.channels, k, k}, 0.0);
    params.add("tail.conv.b", {cfg.image_channels}, 0.0);
  }
};

struct Graph {
  const ModelConfig& cfg;
  Tape& tape;

  std::size_t p(const std::string& name) const { return tape.params().index_of(name); }

  Var unit(const std::string& name, Var x, int dilation = 1) {
    Var y;
    if (cfg.normalization == Normalization::affine) {
      y = tape.conv2d(x, p(name + ".conv.w"), dilation);
      y = tape.affine(y, p(name + ".norm.scale"), p(name + ".norm.shift"));
    } else {
      y = tape.conv2d(x, p(name + ".conv.w"), dilation, p(name + ".conv.b"));
    }
    return cfg.activation == Activation::prelu ? tape.prelu(y, p(name + ".act.slope"))
                                               : tape.leaky_relu(y, cfg.leaky_slope);
  }

  Var se(const std::string& name, Var x) {
    Var s = tape.global_avg_pool(x);
    s = tape.relu(tape.conv2d(s, p(name + ".fc1.w"), 1, p(name + ".fc1.b")));
    s = tape.sigmoid(tape.conv2d(s, p(name + ".fc2.w"), 1, p(name + ".fc2.b")));
    return tape.channel_scale(x, s);
  }

  Var tail(Var x) { return tape.conv2d(x, p("tail.conv.w"), 1, p("tail.conv.b")); }
};

std::string stage(int q) { return "s" + std::to_string(q); }

}  // namespace

Model build_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  Model model;
  model.config = cfg;
  Builder b{cfg, model.params, rng};
  const int c = cfg.channels;
  b.unit("head", cfg.image_channels, c);
  if (cfg.architecture == Architecture::msresnet_mini) {
    const int branches = static_cast<int>(cfg.dilations.size());
    for (int q = 0; q < cfg.stages; ++q) {
      const std::string s = stage(q);
      for (int d : cfg.dilations) b.unit(s + ".msb.d" + std::to_string(d), c, c);
      b.unit(s + ".msb.fuse", branches * c, c);
      b.se(s + ".msb.se");
      for (int u = 1; u <= 4; ++u) b.unit(s + ".rb.u" + std::to_string(u), c, c);
      b.se(s + ".rb.se");
    }
    b.unit("tb.u1", c, c);
    b.unit("tb.u2", c, c);
    b.se("tb.se");
  } else {
    for (int q = 0; q < cfg.stages; ++q) {
      b.unit(stage(q) + ".rb.u1", c, c);
      b.unit(stage(q) + ".rb.u2", c, c);
    }
  }
  b.tail();
  return model;
}

Var forward(const ModelConfig& cfg, Tape& tape, Var x) {
  const Tensor4& xv = tape.value(x);
  require(xv.shape.c == cfg.image_channels, "shape mismatch",
          "model expects " + std::to_string(cfg.image_channels) + " channels, got " + std::to_string(xv.shape.c));
  const int min_size = cfg.min_input_size();
  require(xv.shape.h >= min_size && xv.shape.w >= min_size, "shape mismatch",
          "input " + xv.shape.str() + " smaller than " + std::to_string(min_size));
  Graph g{cfg, tape};
  Var f = g.unit("head", x);
  if (cfg.architecture == Architecture::msresnet_mini) {
    std::vector<Var> rb_out;
    Var prev_msb{};
    for (int q = 0; q < cfg.stages; ++q) {
      const std::string s = stage(q);
      std::vector<Var> branches;
      for (int d : cfg.dilations) branches.push_back(g.unit(s + ".msb.d" + std::to_string(d), f, d));
      Var m = g.unit(s + ".msb.fuse", tape.concat_channels(branches));
      m = g.se(s + ".msb.se", m);
      if (q > 0) m = tape.add(m, prev_msb);
      prev_msb = m;

      Var a = g.unit(s + ".rb.u2", g.unit(s + ".rb.u1", m));
      Var r1 = tape.add(a, m);
      Var b = g.unit(s + ".rb.u4", g.unit(s + ".rb.u3", r1));
      Var r2 = tape.add(b, r1);
      f = g.se(s + ".rb.se", r2);
      rb_out.push_back(f);
    }
    Var t = rb_out.size() >= 2 ? tape.add(rb_out[rb_out.size() - 1], rb_out[rb_out.size() - 2]) : rb_out.back();
    t = g.unit("tb.u2", g.unit("tb.u1", t));
    f = g.se("tb.se", t);
  } else {
    for (int q = 0; q < cfg.stages; ++q) {
      const std::string s = stage(q);
      Var r = g.unit(s + ".rb.u2", g.unit(s + ".rb.u1", f));
      f = tape.add(r, f);
    }
  }
  return tape.sub(x, g.tail(f));
}

ForwardResult forward(const ModelConfig& cfg, const ParamSet& params, const Tensor4& x) {
  Tape tape(params, true);
  Var in = tape.input(x);
  Var out = forward(cfg, tape, in);
  Tensor4 y = tape.value(out);
  return ForwardResult{std::move(y), std::move(tape), out};
}

ForwardResult forward(const Model& model, const Tensor4& x) { return forward(model.config, model.params, x); }

ParamSet backward(ForwardResult& result, const Tensor4& loss_grad) { return result.tape.backward(result.out, loss_grad); }

Tensor4 infer(const ModelConfig& cfg, const ParamSet& params, const Tensor4& x) {
  Tape tape(params, false);
  Var in = tape.input(x);
  return tape.value(forward(cfg, tape, in));
}

}  // namespace trnr::nn
