#pragma once

// Reverse-mode differentiation over NCHW tensors.
//
// A Tape owns a snapshot of the parameters it differentiates against and an
// append-only list of nodes. Each op computes its value eagerly and, when
// gradients are recorded, registers a closure that propagates the node's
// gradient to its inputs and into the parameter-gradient accumulator.

#include <cstddef>
#include <functional>
#include <vector>

#include "trnr/nn/params.hpp"
#include "trnr/nn/tensor.hpp"

namespace trnr::nn {

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  explicit Tape(ParamSet params, bool record = true);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var input(Tensor4 x);

  [[nodiscard]] const Tensor4& value(Var v) const { return nodes_[v.id].value; }
  [[nodiscard]] const ParamSet& params() const { return params_; }
  [[nodiscard]] bool recording() const { return record_; }
  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

  /// Same-size convolution. Weight param shape [Cout, Cin, k, k] (k odd);
  /// borders are reflect-padded by dilation*(k-1)/2.
  Var conv2d(Var x, std::size_t weight, int dilation = 1, const std::size_t* bias = nullptr);
  Var conv2d(Var x, std::size_t weight, int dilation, std::size_t bias) { return conv2d(x, weight, dilation, &bias); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var concat_channels(const std::vector<Var>& parts);

  /// y = scale[c] * x + shift[c]
  Var affine(Var x, std::size_t scale, std::size_t shift);
  /// Learnable per-channel slope for negative inputs.
  Var prelu(Var x, std::size_t slope);
  Var leaky_relu(Var x, double slope);
  Var relu(Var x);
  Var sigmoid(Var x);

  /// N x C x H x W -> N x C x 1 x 1
  Var global_avg_pool(Var x);
  /// x (N x C x H x W) scaled per (n, c) by s (N x C x 1 x 1).
  Var channel_scale(Var x, Var s);

  /// Runs the reverse pass from `out` seeded with `grad_out`. Returns the
  /// gradient for every parameter. A tape can be differentiated once.
  ParamSet backward(Var out, const Tensor4& grad_out);

  /// Gradient w.r.t. a node after backward(), e.g. the network input.
  [[nodiscard]] const Tensor4& grad(Var v) const;

 private:
  struct Node {
    Tensor4 value;
    Tensor4 grad;
    std::function<void(Tape&)> backward;
  };

  Var push(Tensor4 value, std::function<void(Tape&)> backward);
  Tensor4& grad_ref(std::size_t id);

  ParamSet params_;
  ParamSet param_grads_;
  std::vector<Node> nodes_;
  bool record_ = true;
  bool consumed_ = false;
};

}  // namespace trnr::nn
