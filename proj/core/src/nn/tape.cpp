#include "trnr/nn/tape.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>

#include "trnr/error.hpp"

namespace trnr::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using CMapRow = Eigen::Map<const RowMat>;

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
  return i;
}

// Reflect-padded im2col of one image: rows (ci, ky, kx), cols (y, x).
void im2col(const double* img, int cin, int h, int w, int k, int dil, RowMat& col) {
  const int pad = dil * (k - 1) / 2;
  col.resize(static_cast<Eigen::Index>(cin) * k * k, static_cast<Eigen::Index>(h) * w);
  std::vector<int> xmap(static_cast<std::size_t>(w));
  for (int ci = 0; ci < cin; ++ci) {
    const double* plane = img + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int x = 0; x < w; ++x) xmap[static_cast<std::size_t>(x)] = reflect(x + kx * dil - pad, w);
        double* dst = col.row((ci * k + ky) * k + kx).data();
        for (int y = 0; y < h; ++y) {
          const double* src = plane + static_cast<std::size_t>(reflect(y + ky * dil - pad, h)) * w;
          double* d = dst + static_cast<std::size_t>(y) * w;
          for (int x = 0; x < w; ++x) d[x] = src[xmap[static_cast<std::size_t>(x)]];
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the image.
void col2im_add(const RowMat& gcol, int cin, int h, int w, int k, int dil, double* gimg) {
  const int pad = dil * (k - 1) / 2;
  std::vector<int> xmap(static_cast<std::size_t>(w));
  for (int ci = 0; ci < cin; ++ci) {
    double* plane = gimg + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        for (int x = 0; x < w; ++x) xmap[static_cast<std::size_t>(x)] = reflect(x + kx * dil - pad, w);
        const double* src = gcol.row((ci * k + ky) * k + kx).data();
        for (int y = 0; y < h; ++y) {
          double* dst = plane + static_cast<std::size_t>(reflect(y + ky * dil - pad, h)) * w;
          const double* s = src + static_cast<std::size_t>(y) * w;
          for (int x = 0; x < w; ++x) dst[xmap[static_cast<std::size_t>(x)]] += s[x];
        }
      }
    }
  }
}

}  // namespace

Tape::Tape(ParamSet params, bool record)
    : params_(std::move(params)), record_(record) {
  if (record_) param_grads_ = params_.zeros_like();
}

Var Tape::push(Tensor4 value, std::function<void(Tape&)> backward) {
  nodes_.push_back({std::move(value), Tensor4{}, record_ ? std::move(backward) : nullptr});
  return Var{nodes_.size() - 1};
}

Tensor4& Tape::grad_ref(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.numel() != n.value.numel()) n.grad = Tensor4(n.value.shape, 0.0);
  return n.grad;
}

const Tensor4& Tape::grad(Var v) const {
  const auto& n = nodes_.at(v.id);
  require(n.grad.numel() == n.value.numel(), "no gradient recorded for node");
  return n.grad;
}

Var Tape::input(Tensor4 x) {
  require(x.shape.numel() > 0, "invalid tensor shape", x.shape.str());
  return push(std::move(x), nullptr);
}

Var Tape::conv2d(Var xv, std::size_t weight, int dilation, const std::size_t* bias) {
  const Tensor4& x = value(xv);
  const Param& wp = params_[weight];
  require(wp.shape.size() == 4, "shape mismatch", "conv weight " + wp.name + " must be 4-d");
  const int cout = wp.shape[0], cin = wp.shape[1], k = wp.shape[2];
  require(wp.shape[3] == k && k % 2 == 1, "shape mismatch", "conv kernel must be square and odd");
  require(cin == x.shape.c, "shape mismatch",
          wp.name + " expects " + std::to_string(cin) + " channels, got " + std::to_string(x.shape.c));
  require(dilation >= 1, "invalid dilation");
  const int h = x.shape.h, w = x.shape.w;
  const int pad = dilation * (k - 1) / 2;
  require(pad < h && pad < w, "shape mismatch",
          "input " + x.shape.str() + " too small for reflect padding " + std::to_string(pad));
  if (bias) require(params_[*bias].numel() == static_cast<std::size_t>(cout), "shape mismatch", "conv bias");

  const int n = x.shape.n;
  const auto hw = static_cast<Eigen::Index>(h) * w;
  Tensor4 out(n, cout, h, w);
  CMapRow wm(wp.values.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
  auto cols = record_ ? std::make_shared<std::vector<RowMat>>(static_cast<std::size_t>(n)) : nullptr;
  RowMat scratch;
  for (int b = 0; b < n; ++b) {
    RowMat& col = cols ? (*cols)[static_cast<std::size_t>(b)] : scratch;
    im2col(x.data.data() + x.index(b, 0, 0, 0), cin, h, w, k, dilation, col);
    MapRow ob(out.data.data() + out.index(b, 0, 0, 0), cout, hw);
    ob.noalias() = wm * col;
    if (bias) {
      const auto& bv = params_[*bias].values;
      for (int co = 0; co < cout; ++co) ob.row(co).array() += bv[static_cast<std::size_t>(co)];
    }
  }

  const std::size_t xid = xv.id;
  const std::size_t bias_idx = bias ? *bias : static_cast<std::size_t>(-1);
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const Tensor4& g = t.nodes_[self].grad;
    const Param& wpar = t.params_[weight];
    CMapRow wmat(wpar.values.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
    MapRow gw(t.param_grads_[weight].values.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
    Tensor4& gx = t.grad_ref(xid);
    RowMat gcol;
    for (int b = 0; b < n; ++b) {
      CMapRow gb(g.data.data() + g.index(b, 0, 0, 0), cout, hw);
      const RowMat& col = (*cols)[static_cast<std::size_t>(b)];
      gw.noalias() += gb * col.transpose();
      gcol.noalias() = wmat.transpose() * gb;
      col2im_add(gcol, cin, h, w, k, dilation, gx.data.data() + gx.index(b, 0, 0, 0));
      if (bias_idx != static_cast<std::size_t>(-1)) {
        auto& gbias = t.param_grads_[bias_idx].values;
        for (int co = 0; co < cout; ++co) gbias[static_cast<std::size_t>(co)] += gb.row(co).sum();
      }
    }
  });
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  Tensor4 out = value(a);
  const auto& bv = value(b).data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv[i];
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const auto& g = t.nodes_[self].grad.data;
    for (std::size_t id : {a.id, b.id}) {
      auto& gi = t.grad_ref(id).data;
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  Tensor4 out = value(a);
  const auto& bv = value(b).data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv[i];
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const auto& g = t.nodes_[self].grad.data;
    auto& ga = t.grad_ref(a.id).data;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto& gb = t.grad_ref(b.id).data;
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Var Tape::concat_channels(const std::vector<Var>& parts) {
  require(!parts.empty(), "shape mismatch", "concat of nothing");
  const Shape4 s0 = value(parts[0]).shape;
  int channels = 0;
  for (Var p : parts) {
    const Shape4 s = value(p).shape;
    require(s.n == s0.n && s.h == s0.h && s.w == s0.w, "shape mismatch", "concat " + s.str() + " vs " + s0.str());
    channels += s.c;
  }
  Tensor4 out(s0.n, channels, s0.h, s0.w);
  const std::size_t plane = static_cast<std::size_t>(s0.h) * s0.w;
  for (int b = 0; b < s0.n; ++b) {
    int off = 0;
    for (Var p : parts) {
      const Tensor4& v = value(p);
      std::copy_n(v.data.begin() + static_cast<std::ptrdiff_t>(v.index(b, 0, 0, 0)), v.shape.c * plane,
                  out.data.begin() + static_cast<std::ptrdiff_t>(out.index(b, off, 0, 0)));
      off += v.shape.c;
    }
  }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const Tensor4& g = t.nodes_[self].grad;
    for (int b = 0; b < s0.n; ++b) {
      int off = 0;
      for (Var p : parts) {
        Tensor4& gp = t.grad_ref(p.id);
        const std::size_t len = static_cast<std::size_t>(gp.shape.c) * plane;
        const double* src = g.data.data() + g.index(b, off, 0, 0);
        double* dst = gp.data.data() + gp.index(b, 0, 0, 0);
        for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        off += gp.shape.c;
      }
    }
  });
}

Var Tape::affine(Var xv, std::size_t scale, std::size_t shift) {
  const Tensor4& x = value(xv);
  const int c = x.shape.c;
  require(params_[scale].numel() == static_cast<std::size_t>(c) && params_[shift].numel() == static_cast<std::size_t>(c),
          "shape mismatch", "affine parameters");
  const std::size_t plane = static_cast<std::size_t>(x.shape.h) * x.shape.w;
  Tensor4 out = x;
  const auto& sv = params_[scale].values;
  const auto& tv = params_[shift].values;
  for (int b = 0; b < x.shape.n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      double* p = out.data.data() + out.index(b, ch, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) p[i] = sv[static_cast<std::size_t>(ch)] * p[i] + tv[static_cast<std::size_t>(ch)];
    }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const Tensor4& g = t.nodes_[self].grad;
    const Tensor4& xin = t.nodes_[xv.id].value;
    Tensor4& gx = t.grad_ref(xv.id);
    const auto& s = t.params_[scale].values;
    auto& gs = t.param_grads_[scale].values;
    auto& gt = t.param_grads_[shift].values;
    for (int b = 0; b < xin.shape.n; ++b)
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = g.index(b, ch, 0, 0);
        double sg = 0.0, sgx = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
          const double gi = g.data[base + i];
          sg += gi;
          sgx += gi * xin.data[base + i];
          gx.data[base + i] += s[static_cast<std::size_t>(ch)] * gi;
        }
        gs[static_cast<std::size_t>(ch)] += sgx;
        gt[static_cast<std::size_t>(ch)] += sg;
      }
  });
}

Var Tape::prelu(Var xv, std::size_t slope) {
  const Tensor4& x = value(xv);
  const int c = x.shape.c;
  require(params_[slope].numel() == static_cast<std::size_t>(c), "shape mismatch", "prelu slope");
  const std::size_t plane = static_cast<std::size_t>(x.shape.h) * x.shape.w;
  Tensor4 out = x;
  const auto& a = params_[slope].values;
  for (int b = 0; b < x.shape.n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      double* p = out.data.data() + out.index(b, ch, 0, 0);
      const double s = a[static_cast<std::size_t>(ch)];
      for (std::size_t i = 0; i < plane; ++i)
        if (p[i] < 0.0) p[i] *= s;
    }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const Tensor4& g = t.nodes_[self].grad;
    const Tensor4& xin = t.nodes_[xv.id].value;
    Tensor4& gx = t.grad_ref(xv.id);
    const auto& av = t.params_[slope].values;
    auto& ga = t.param_grads_[slope].values;
    for (int b = 0; b < xin.shape.n; ++b)
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = g.index(b, ch, 0, 0);
        const double s = av[static_cast<std::size_t>(ch)];
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xi = xin.data[base + i];
          const double gi = g.data[base + i];
          if (xi < 0.0) {
            gx.data[base + i] += s * gi;
            acc += gi * xi;
          } else {
            gx.data[base + i] += gi;
          }
        }
        ga[static_cast<std::size_t>(ch)] += acc;
      }
  });
}

Var Tape::leaky_relu(Var xv, double slope) {
  Tensor4 out = value(xv);
  for (double& v : out.data)
    if (v < 0.0) v *= slope;
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const auto& g = t.nodes_[self].grad.data;
    const auto& xin = t.nodes_[xv.id].value.data;
    auto& gx = t.grad_ref(xv.id).data;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xin[i] < 0.0 ? slope * g[i] : g[i];
  });
}

Var Tape::relu(Var xv) {
  Tensor4 out = value(xv);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const auto& g = t.nodes_[self].grad.data;
    const auto& xin = t.nodes_[xv.id].value.data;
    auto& gx = t.grad_ref(xv.id).data;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xin[i] > 0.0) gx[i] += g[i];
  });
}

Var Tape::sigmoid(Var xv) {
  Tensor4 out = value(xv);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const auto& g = t.nodes_[self].grad.data;
    const auto& y = t.nodes_[self].value.data;
    auto& gx = t.grad_ref(xv.id).data;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::global_avg_pool(Var xv) {
  const Tensor4& x = value(xv);
  const std::size_t plane = static_cast<std::size_t>(x.shape.h) * x.shape.w;
  Tensor4 out(x.shape.n, x.shape.c, 1, 1);
  for (int b = 0; b < x.shape.n; ++b)
    for (int ch = 0; ch < x.shape.c; ++ch) {
      const double* p = x.data.data() + x.index(b, ch, 0, 0);
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      out.at(b, ch, 0, 0) = s / static_cast<double>(plane);
    }
  const Shape4 xs = x.shape;
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const Tensor4& g = t.nodes_[self].grad;
    Tensor4& gx = t.grad_ref(xv.id);
    for (int b = 0; b < xs.n; ++b)
      for (int ch = 0; ch < xs.c; ++ch) {
        const double gi = g.at(b, ch, 0, 0) / static_cast<double>(plane);
        double* p = gx.data.data() + gx.index(b, ch, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) p[i] += gi;
      }
  });
}

Var Tape::channel_scale(Var xv, Var sv) {
  const Tensor4& x = value(xv);
  const Tensor4& s = value(sv);
  require(s.shape == Shape4{x.shape.n, x.shape.c, 1, 1}, "shape mismatch",
          "channel_scale " + s.shape.str() + " vs " + x.shape.str());
  const std::size_t plane = static_cast<std::size_t>(x.shape.h) * x.shape.w;
  Tensor4 out = x;
  for (int b = 0; b < x.shape.n; ++b)
    for (int ch = 0; ch < x.shape.c; ++ch) {
      double* p = out.data.data() + out.index(b, ch, 0, 0);
      const double f = s.at(b, ch, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) p[i] *= f;
    }
  const Shape4 xs = x.shape;
  const std::size_t self = nodes_.size();
  return push(std::move(out), [=](Tape& t) {
    const Tensor4& g = t.nodes_[self].grad;
    const Tensor4& xin = t.nodes_[xv.id].value;
    const Tensor4& sin = t.nodes_[sv.id].value;
    Tensor4& gx = t.grad_ref(xv.id);
    Tensor4& gs = t.grad_ref(sv.id);
    for (int b = 0; b < xs.n; ++b)
      for (int ch = 0; ch < xs.c; ++ch) {
        const std::size_t base = g.index(b, ch, 0, 0);
        const double f = sin.at(b, ch, 0, 0);
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
          gx.data[base + i] += f * g.data[base + i];
          acc += g.data[base + i] * xin.data[base + i];
        }
        gs.at(b, ch, 0, 0) += acc;
      }
  });
}

ParamSet Tape::backward(Var out, const Tensor4& grad_out) {
  require(record_, "stale tape", "tape was built without gradient recording");
  require(!consumed_, "stale tape", "backward already ran on this tape");
  require(out.id < nodes_.size(), "stale tape", "unknown output node");
  check_same_shape(nodes_[out.id].value, grad_out, "backward seed");
  consumed_ = true;
  grad_ref(out.id).data = grad_out.data;
  for (std::size_t id = out.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.backward && n.grad.numel() == n.value.numel()) n.backward(*this);
  }
  return param_grads_;
}

}  // namespace trnr::nn
