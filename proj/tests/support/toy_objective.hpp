#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "trnr/cluster.hpp"
#include "trnr/train/objective.hpp"

namespace trnr::testing {

// loss(theta; batch) = mean_i 0.5 * a_i * |theta - c_i|^2 with an exact Hessian.
class QuadraticObjective final : public train::Objective {
 public:
  QuadraticObjective(std::vector<double> weights, std::vector<std::vector<double>> targets)
      : a_(std::move(weights)), c_(std::move(targets)) {}

  [[nodiscard]] std::size_t dim() const { return c_.front().size(); }

  [[nodiscard]] nn::ParamSet make_params(double fill = 0.0) const {
    nn::ParamSet p;
    p.add("theta", {static_cast<int>(dim())}, fill);
    return p;
  }

  double loss(const nn::ParamSet& p, std::span<const std::size_t> batch) const override {
    double s = 0.0;
    for (auto i : batch)
      for (std::size_t d = 0; d < dim(); ++d) {
        const double r = p[0].values[d] - c_[i][d];
        s += 0.5 * a_[i] * r * r;
      }
    return s / static_cast<double>(batch.size());
  }

  double loss_and_grad(const nn::ParamSet& p, std::span<const std::size_t> batch, nn::ParamSet& g) const override {
    g = p.zeros_like();
    for (auto i : batch)
      for (std::size_t d = 0; d < dim(); ++d) g[0].values[d] += a_[i] * (p[0].values[d] - c_[i][d]);
    g.scale(1.0 / static_cast<double>(batch.size()));
    return loss(p, batch);
  }

  void hessian_vector(const nn::ParamSet& p, std::span<const std::size_t> batch, const nn::ParamSet& v,
                      nn::ParamSet& out) const override {
    double h = 0.0;
    for (auto i : batch) h += a_[i];
    h /= static_cast<double>(batch.size());
    out = p.zeros_like();
    out.axpy(h, v);
  }

 private:
  std::vector<double> a_;
  std::vector<std::vector<double>> c_;
};

/// Clusters given as lists of item indices; ids are "p<i>".
inline cluster::ClusterSet make_cluster_set(const std::vector<std::vector<std::size_t>>& groups) {
  cluster::ClusterSet s;
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  s.max_clusters = static_cast<int>(groups.size());
  s.threshold = 1.0;
  s.patch_size = 1;
  s.channels = 1;
  for (std::size_t i = 0; i < n; ++i) s.patch_ids.push_back("p" + std::to_string(i));
  s.clusters = groups;
  s.centers.assign(groups.size(), std::vector<double>{0.0});
  return s;
}

}  // namespace trnr::testing
