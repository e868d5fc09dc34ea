#include "trnr/nn/tensor.hpp"

#include <cmath>

#include "trnr/error.hpp"

namespace trnr::nn {

std::string Shape4::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

bool Tensor4::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void check_same_shape(const Tensor4& a, const Tensor4& b, const char* where) {
  if (!(a.shape == b.shape)) fail("shape mismatch", std::string(where) + ": " + a.shape.str() + " vs " + b.shape.str());
}

}  // namespace trnr::nn
