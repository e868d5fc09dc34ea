#include "trnr/nn/params.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "trnr/error.hpp"

namespace trnr::nn {

std::size_t ParamSet::add(std::string name, std::vector<int> shape, double fill) {
  for (const auto& p : params_) require(p.name != name, "duplicate parameter name", name);
  std::size_t n = 1;
  for (int d : shape) {
    require(d >= 1, "invalid parameter shape", name);
    n *= static_cast<std::size_t>(d);
  }
  params_.push_back({std::move(name), std::move(shape), std::vector<double>(n, fill)});
  return params_.size() - 1;
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  fail("unknown parameter", name);
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out = *this;
  out.fill(0.0);
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name != other.params_[i].name || params_[i].shape != other.params_[i].shape) return false;
  return true;
}

void ParamSet::check_layout(const ParamSet& other, const char* where) const {
  if (!same_layout(other)) fail("shape mismatch", std::string(where) + ": parameter layouts differ");
}

ParamSet& ParamSet::axpy(double alpha, const ParamSet& other) {
  check_layout(other, "axpy");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& a = params_[i].values;
    const auto& b = other.params_[i].values;
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += alpha * b[k];
  }
  return *this;
}

ParamSet& ParamSet::scale(double alpha) {
  for (auto& p : params_)
    for (double& v : p.values) v *= alpha;
  return *this;
}

void ParamSet::fill(double v) {
  for (auto& p : params_) std::fill(p.values.begin(), p.values.end(), v);
}

double ParamSet::dot(const ParamSet& other) const {
  check_layout(other, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < params_.size(); ++i)
    s += std::inner_product(params_[i].values.begin(), params_[i].values.end(), other.params_[i].values.begin(), 0.0);
  return s;
}

double ParamSet::max_abs() const {
  double m = 0.0;
  for (const auto& p : params_)
    for (double v : p.values) m = std::max(m, std::abs(v));
  return m;
}

bool ParamSet::all_finite() const {
  for (const auto& p : params_)
    for (double v : p.values)
      if (!std::isfinite(v)) return false;
  return true;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> out;
  out.reserve(numel());
  for (const auto& p : params_) out.insert(out.end(), p.values.begin(), p.values.end());
  return out;
}

void ParamSet::assign_flat(const std::vector<double>& flat) {
  require(flat.size() == numel(), "shape mismatch", "flat parameter vector has wrong length");
  std::size_t k = 0;
  for (auto& p : params_)
    for (double& v : p.values) v = flat[k++];
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].values != b[i].values) return false;
  return true;
}

}  // namespace trnr::nn
