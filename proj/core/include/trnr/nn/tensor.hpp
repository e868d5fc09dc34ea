#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace trnr::nn {

struct Shape4 {
  int n = 1, c = 1, h = 1, w = 1;

  [[nodiscard]] std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  friend bool operator==(const Shape4&, const Shape4&) = default;
  [[nodiscard]] std::string str() const;
};

/// Dense NCHW tensor of doubles.
struct Tensor4 {
  Shape4 shape;
  std::vector<double> data;

  Tensor4() = default;
  explicit Tensor4(Shape4 s, double fill = 0.0) : shape(s), data(s.numel(), fill) {}
  Tensor4(int n, int c, int h, int w, double fill = 0.0) : Tensor4(Shape4{n, c, h, w}, fill) {}

  [[nodiscard]] std::size_t numel() const { return data.size(); }
  [[nodiscard]] std::size_t index(int b, int ch, int y, int x) const {
    return ((static_cast<std::size_t>(b) * shape.c + ch) * shape.h + y) * shape.w + x;
  }
  double& at(int b, int ch, int y, int x) { return data[index(b, ch, y, x)]; }
  [[nodiscard]] double at(int b, int ch, int y, int x) const { return data[index(b, ch, y, x)]; }

  [[nodiscard]] bool all_finite() const;
};

/// Throws "shape mismatch" when the shapes differ.
void check_same_shape(const Tensor4& a, const Tensor4& b, const char* where);

}  // namespace trnr::nn
