#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace trnr::nn {

struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  [[nodiscard]] std::size_t numel() const { return values.size(); }
};

/// Ordered, uniquely named parameter tensors. Also used for gradients,
/// optimizer moments and meta-gradients, which share the same layout.
class ParamSet {
 public:
  /// Appends a tensor; returns its index. Throws on duplicate names.
  std::size_t add(std::string name, std::vector<int> shape, double fill = 0.0);

  [[nodiscard]] std::size_t size() const { return params_.size(); }
  [[nodiscard]] bool empty() const { return params_.empty(); }
  [[nodiscard]] std::size_t numel() const;

  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  [[nodiscard]] std::size_t index_of(const std::string& name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  [[nodiscard]] auto begin() const { return params_.begin(); }
  [[nodiscard]] auto end() const { return params_.end(); }

  /// Same names and shapes, values zeroed.
  [[nodiscard]] ParamSet zeros_like() const;
  [[nodiscard]] bool same_layout(const ParamSet& other) const;
  void check_layout(const ParamSet& other, const char* where) const;

  /// this += alpha * other
  ParamSet& axpy(double alpha, const ParamSet& other);
  ParamSet& scale(double alpha);
  void fill(double v);

  [[nodiscard]] double dot(const ParamSet& other) const;
  [[nodiscard]] double max_abs() const;
  [[nodiscard]] bool all_finite() const;

  /// Flat copy in declaration order, and its inverse.
  [[nodiscard]] std::vector<double> flatten() const;
  void assign_flat(const std::vector<double>& flat);

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<Param> params_;
};

}  // namespace trnr::nn
