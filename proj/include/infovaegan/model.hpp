#pragma once

#include <array>
#include <cstddef>

#include "infovaegan/distributions.hpp"
#include "infovaegan/nn.hpp"
#include "infovaegan/random.hpp"
#include "infovaegan/tensor.hpp"

namespace ivg {

struct ArchitectureConfig {
  std::size_t pixels = 1024;
  std::size_t hidden = 256;
  std::size_t depth = 2;  // hidden layers per network
};

enum class CodePart : std::uint8_t { Z = 0, D = 1, C = 2 };

/// The generator consumes its code as the concatenation (z, d, c).
inline constexpr std::array<CodePart, 3> kGeneratorInputOrder = {CodePart::Z, CodePart::D, CodePart::C};

/// Generator, critic and the two inference networks.
///
/// encoder_u emits [K logits | c mean | c log-variance] from one trunk, so the
/// discrete and continuous heads differ only in their final-layer columns.
/// encoder_z is a separate trunk emitting [z mean | z log-variance].
struct ModelBundle {
  Mlp generator;
  Mlp critic;
  Mlp encoder_u;
  Mlp encoder_z;
  PriorConfig prior;

  std::size_t pixels() const { return generator.output_extent(); }
  void validate() const;
};

ModelBundle init_bundle(const ArchitectureConfig& arch, const PriorConfig& prior, Rng& rng);

/// Which networks get graph leaves in a view; the rest are frozen constants.
struct Trainable {
  bool generator = false;
  bool critic = false;
  bool encoder_u = false;
  bool encoder_z = false;
};

/// Per-step view of a bundle bound to a graph.
struct BundleView {
  Graph* graph = nullptr;
  BoundMlp generator;
  BoundMlp critic;
  BoundMlp encoder_u;
  BoundMlp encoder_z;
  PriorConfig prior;
};

BundleView make_view(const ModelBundle& bundle, Graph* graph, Trainable trainable = {});
/// Fully frozen view, no graph.
inline BundleView frozen_view(const ModelBundle& bundle) { return make_view(bundle, nullptr); }

struct EncoderOutput {
  GaussianParams z_post;
  GaussianParams c_post;
  CategoricalParams d_post;
};

/// q(d|x) and q(c|x) from the shared u-trunk.
struct UPosterior {
  CategoricalParams d_post;
  GaussianParams c_post;
};

Tensor generator_input(const LatentCode& code);
Tensor generate(const BundleView& view, const LatentCode& code);
UPosterior encode_u(const BundleView& view, const Tensor& x);
GaussianParams encode_z(const BundleView& view, const Tensor& x);
EncoderOutput encode(const BundleView& view, const Tensor& x);
Tensor criticize(const BundleView& view, const Tensor& x);

enum class ReconstructionMode : std::uint8_t { Mean, Sample };

/// encode -> (posterior means | reparameterized samples) for z and c, softmax
/// probabilities for d -> generate.
Tensor reconstruct(const BundleView& view, const Tensor& x, Rng& rng, ReconstructionMode mode);

}  // namespace ivg
