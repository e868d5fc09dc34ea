#pragma once

// Residual restoration networks. The network predicts the degradation layer
// n of y = x + n and returns y - n.
//
// msresnet_mini: Q stages of (multi-scale block, residual block), a skip
// connection between consecutive multi-scale blocks, and a transition block
// fed by the sum of the last two residual blocks.
//   MSB  parallel dilated 3x3 units -> concat -> 3x3 fuse unit -> SE
//   RB   two Conv-Norm-Act pairs, each wrapped by a residual add -> SE
//   TB   two units -> SE -> 3x3 conv to image channels
// resnet_plain: head unit, Q residual blocks without SE, output conv.
//
// A "unit" is conv -> per-channel affine (or conv bias when normalization is
// none) -> PReLU (or fixed LeakyReLU).

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trnr/nn/params.hpp"
#include "trnr/nn/tape.hpp"
#include "trnr/nn/tensor.hpp"
#include "trnr/rng.hpp"

namespace trnr::nn {

enum class Architecture { msresnet_mini, resnet_plain };
enum class Normalization { affine, none };
enum class Activation { prelu, leaky_relu };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);
std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct ModelConfig {
  Architecture architecture = Architecture::msresnet_mini;
  int image_channels = 1;
  int stages = 1;     // Q
  int channels = 8;
  int kernel = 3;
  std::vector<int> dilations{1, 2, 3};
  double leaky_slope = 0.2;
  int se_reduction = 4;
  Normalization normalization = Normalization::affine;
  Activation activation = Activation::prelu;

  void validate() const;
  /// Smallest spatial size accepted by forward (reflect padding needs pad < size).
  [[nodiscard]] int min_input_size() const;
};

struct Model {
  ModelConfig config;
  ParamSet params;
};

/// Kaiming fan-in normal init for kernels, zero biases, unit affine scales,
/// slopes at leaky_slope, and a zero output kernel (identity restoration).
Model build_model(const ModelConfig& cfg, Rng& rng);

/// Builds the graph for `x` on an existing tape whose parameters follow cfg.
Var forward(const ModelConfig& cfg, Tape& tape, Var x);

struct ForwardResult {
  Tensor4 output;
  Tape tape;
  Var out;
};

ForwardResult forward(const Model& model, const Tensor4& x);
ForwardResult forward(const ModelConfig& cfg, const ParamSet& params, const Tensor4& x);

/// Parameter gradients given dLoss/dOutput.
ParamSet backward(ForwardResult& result, const Tensor4& loss_grad);

/// Forward pass without recording gradients.
Tensor4 infer(const ModelConfig& cfg, const ParamSet& params, const Tensor4& x);

}  // namespace trnr::nn
