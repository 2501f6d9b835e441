#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "infovaegan/random.hpp"
#include "infovaegan/tensor.hpp"

namespace ivg {

enum class OutputHead : std::uint8_t { Linear, Sigmoid };

struct DenseLayer {
  Tensor weights;  // fan_in x fan_out
  Tensor bias;     // fan_out

  std::size_t fan_in() const { return weights.shape()[0]; }
  std::size_t fan_out() const { return weights.shape()[1]; }
};

/// Multilayer perceptron: dense layers with leaky-relu between them and an
/// optional sigmoid on the output.
struct Mlp {
  std::vector<DenseLayer> layers;
  OutputHead head = OutputHead::Linear;

  std::size_t input_extent() const { return layers.front().fan_in(); }
  std::size_t output_extent() const { return layers.back().fan_out(); }
  std::size_t parameter_count() const;

  /// Parameters in a fixed order: weights then bias, layer by layer.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

/// Glorot-uniform weights and zero biases, deterministic given the rng.
Mlp init_mlp(std::span<const std::size_t> extents, OutputHead head, Rng& rng);

/// An Mlp whose parameters are either graph leaves (trainable this step) or
/// constants (frozen).
struct BoundMlp {
  std::vector<DenseLayer> layers;
  OutputHead head = OutputHead::Linear;
  bool trainable = false;

  std::vector<Tensor> leaves() const;
};

BoundMlp bind(const Mlp& net, Graph& graph);
BoundMlp freeze(const Mlp& net);

Tensor mlp_forward(const BoundMlp& net, const Tensor& input);
inline Tensor mlp_forward(const Mlp& net, const Tensor& input) { return mlp_forward(freeze(net), input); }

/// Order-independent fingerprint of the exact parameter bits.
std::uint64_t parameter_checksum(const Mlp& net);

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

AdamState init_adam(const Mlp& net, const AdamHyper& hyper);

/// One bias-corrected Adam update. `grads` must cover every parameter.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

/// Update `net` from the gradients of its bound leaves.
void adam_step(Mlp& net, const BoundMlp& bound, const GradientMap& grads, AdamState& state);

}  // namespace ivg
