#include "trnr/nn/loss.hpp"

#include <cmath>
#include <limits>

#include "trnr/error.hpp"

namespace trnr::nn {

namespace {

std::vector<double> gaussian_1d(int window, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(window));
  const double c = (window - 1) / 2.0;
  double s = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - c;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= s;
  return g;
}

// Separable valid correlation: (h x w) -> (h-k+1) x (w-k+1).
void filter_valid(const double* in, int h, int w, const std::vector<double>& g, std::vector<double>& tmp,
                  std::vector<double>& out) {
  const int k = static_cast<int>(g.size());
  const int oh = h - k + 1, ow = w - k + 1;
  tmp.assign(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int q = 0; q < k; ++q) s += g[static_cast<std::size_t>(q)] * in[static_cast<std::size_t>(y) * w + x + q];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  out.assign(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int q = 0; q < k; ++q) {
      const double gq = g[static_cast<std::size_t>(q)];
      const double* row = tmp.data() + static_cast<std::size_t>(y + q) * ow;
      double* o = out.data() + static_cast<std::size_t>(y) * ow;
      for (int x = 0; x < ow; ++x) o[x] += gq * row[x];
    }
}

// Adjoint of filter_valid: (h-k+1) x (w-k+1) -> h x w.
void filter_valid_adjoint(const std::vector<double>& in, int h, int w, const std::vector<double>& g,
                          std::vector<double>& tmp, std::vector<double>& out) {
  const int k = static_cast<int>(g.size());
  const int oh = h - k + 1, ow = w - k + 1;
  tmp.assign(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int q = 0; q < k; ++q) {
      const double gq = g[static_cast<std::size_t>(q)];
      const double* src = in.data() + static_cast<std::size_t>(y) * ow;
      double* dst = tmp.data() + static_cast<std::size_t>(y + q) * ow;
      for (int x = 0; x < ow; ++x) dst[x] += gq * src[x];
    }
  out.assign(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      const double v = tmp[static_cast<std::size_t>(y) * ow + x];
      double* o = out.data() + static_cast<std::size_t>(y) * w + x;
      for (int q = 0; q < k; ++q) o[q] += g[static_cast<std::size_t>(q)] * v;
    }
}

double ssim_impl(const Tensor4& a, const Tensor4& b, const SsimOptions& opt, Tensor4* grad) {
  check_same_shape(a, b, "ssim");
  require(opt.window >= 1 && opt.sigma > 0.0, "invalid ssim options");
  const int h = a.shape.h, w = a.shape.w;
  if (h < opt.window || w < opt.window) {
    fail("image smaller than window", a.shape.str() + " < " + std::to_string(opt.window));
  }
  const auto g = gaussian_1d(opt.window, opt.sigma);
  const double c1 = (0.01 * opt.dynamic_range) * (0.01 * opt.dynamic_range);
  const double c2 = (0.03 * opt.dynamic_range) * (0.03 * opt.dynamic_range);
  const int oh = h - opt.window + 1, ow = w - opt.window + 1;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t positions = static_cast<std::size_t>(oh) * ow;
  const double count = static_cast<double>(positions) * a.shape.n * a.shape.c;
  if (grad) *grad = Tensor4(a.shape, 0.0);

  std::vector<double> tmp, mx, my, exx, eyy, exy, sq(plane), gm, gxx, gxy, back;
  double total = 0.0;
  for (int n = 0; n < a.shape.n; ++n) {
    for (int c = 0; c < a.shape.c; ++c) {
      const double* x = a.data.data() + a.index(n, c, 0, 0);
      const double* y = b.data.data() + b.index(n, c, 0, 0);
      filter_valid(x, h, w, g, tmp, mx);
      filter_valid(y, h, w, g, tmp, my);
      for (std::size_t i = 0; i < plane; ++i) sq[i] = x[i] * x[i];
      filter_valid(sq.data(), h, w, g, tmp, exx);
      for (std::size_t i = 0; i < plane; ++i) sq[i] = y[i] * y[i];
      filter_valid(sq.data(), h, w, g, tmp, eyy);
      for (std::size_t i = 0; i < plane; ++i) sq[i] = x[i] * y[i];
      filter_valid(sq.data(), h, w, g, tmp, exy);

      if (grad) {
        gm.assign(positions, 0.0);
        gxx.assign(positions, 0.0);
        gxy.assign(positions, 0.0);
      }
      double plane_sum = 0.0;
      for (std::size_t p = 0; p < positions; ++p) {
        const double ux = mx[p], uy = my[p];
        const double sxx = exx[p] - ux * ux;
        const double syy = eyy[p] - uy * uy;
        const double sxy = exy[p] - ux * uy;
        const double a1 = 2.0 * ux * uy + c1;
        const double a2 = 2.0 * sxy + c2;
        const double b1 = ux * ux + uy * uy + c1;
        const double b2 = sxx + syy + c2;
        const double s = (a1 * a2) / (b1 * b2);
        plane_sum += s;
        if (grad) {
          const double inv = 1.0 / (b1 * b2);
          gm[p] = (2.0 * uy * a2 * inv - 2.0 * uy * a1 * inv - 2.0 * ux * s / b1 + 2.0 * ux * s / b2) / count;
          gxx[p] = (-s / b2) / count;
          gxy[p] = (2.0 * a1 * inv) / count;
        }
      }
      total += plane_sum;
      if (grad) {
        double* gout = grad->data.data() + grad->index(n, c, 0, 0);
        filter_valid_adjoint(gm, h, w, g, tmp, back);
        for (std::size_t i = 0; i < plane; ++i) gout[i] += back[i];
        filter_valid_adjoint(gxx, h, w, g, tmp, back);
        for (std::size_t i = 0; i < plane; ++i) gout[i] += 2.0 * x[i] * back[i];
        filter_valid_adjoint(gxy, h, w, g, tmp, back);
        for (std::size_t i = 0; i < plane; ++i) gout[i] += y[i] * back[i];
      }
    }
  }
  return total / count;
}

}  // namespace

double l1_loss(const Tensor4& pred, const Tensor4& target) {
  check_same_shape(pred, target, "l1_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) s += std::abs(pred.data[i] - target.data[i]);
  return s / static_cast<double>(pred.data.size());
}

LossValue l1_loss_grad(const Tensor4& pred, const Tensor4& target) {
  check_same_shape(pred, target, "l1_loss");
  LossValue out{0.0, Tensor4(pred.shape, 0.0)};
  const double inv = 1.0 / static_cast<double>(pred.data.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    s += std::abs(d);
    out.grad.data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  out.value = s * inv;
  return out;
}

double ssim(const Tensor4& a, const Tensor4& b, const SsimOptions& opt) { return ssim_impl(a, b, opt, nullptr); }

LossValue ssim_grad(const Tensor4& a, const Tensor4& b, const SsimOptions& opt) {
  LossValue out;
  out.value = ssim_impl(a, b, opt, &out.grad);
  return out;
}

double ssim(const imageio::Image& a, const imageio::Image& b, const SsimOptions& opt) {
  return ssim(to_tensor(a), to_tensor(b), opt);
}

double combined_loss(const Tensor4& pred, const Tensor4& target, double lambda, const SsimOptions& opt) {
  require(lambda >= 0.0, "negative lambda", std::to_string(lambda));
  const double l1 = l1_loss(pred, target);
  return lambda == 0.0 ? l1 : l1 + lambda * (1.0 - ssim(pred, target, opt));
}

LossValue combined_loss_grad(const Tensor4& pred, const Tensor4& target, double lambda, const SsimOptions& opt) {
  require(lambda >= 0.0, "negative lambda", std::to_string(lambda));
  LossValue out = l1_loss_grad(pred, target);
  if (lambda == 0.0) return out;
  const LossValue s = ssim_grad(pred, target, opt);
  out.value += lambda * (1.0 - s.value);
  for (std::size_t i = 0; i < out.grad.data.size(); ++i) out.grad.data[i] -= lambda * s.grad.data[i];
  return out;
}

double psnr(std::span<const double> a, std::span<const double> b, double peak) {
  require(a.size() == b.size() && !a.empty(), "shape mismatch", "psnr");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  const double mse = s / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const Tensor4& a, const Tensor4& b, double peak) {
  check_same_shape(a, b, "psnr");
  return psnr(std::span<const double>(a.data), std::span<const double>(b.data), peak);
}

double psnr(const imageio::Image& a, const imageio::Image& b, double peak) {
  require(a.same_shape(b), "shape mismatch", "psnr");
  return psnr(std::span<const double>(a.data), std::span<const double>(b.data), peak);
}

Tensor4 to_tensor(const imageio::Image& image) {
  Tensor4 t(1, image.channels, image.height, image.width);
  t.data = image.data;
  return t;
}

imageio::Image to_image(const Tensor4& t, int batch_index) {
  imageio::Image img(t.shape.h, t.shape.w, t.shape.c);
  const auto begin = t.data.begin() + static_cast<std::ptrdiff_t>(t.index(batch_index, 0, 0, 0));
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(img.size()), img.data.begin());
  return img;
}

}  // namespace trnr::nn
