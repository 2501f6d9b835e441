#include "infovaegan/model.hpp"

#include <vector>

namespace ivg {

namespace {

std::vector<std::size_t> extents(std::size_t in, const ArchitectureConfig& arch, std::size_t out) {
  std::vector<std::size_t> e{in};
  for (std::size_t i = 0; i < arch.depth; ++i) e.push_back(arch.hidden);
  e.push_back(out);
  return e;
}

void check_pixels(std::string_view op, const BoundMlp& net, const Tensor& x) {
  if (x.rank() != 2 || x.shape()[1] != net.layers.front().weights.shape()[0]) {
    throw ShapeError(std::string(op) + ": expected batch x " +
                     std::to_string(net.layers.front().weights.shape()[0]) + " pixels, got " + to_string(x.shape()));
  }
}

BoundMlp view_of(const Mlp& net, Graph* graph, bool trainable) {
  if (trainable) {
    if (!graph) throw ContractError("make_view: a trainable network needs a graph");
    return bind(net, *graph);
  }
  return freeze(net);
}

}  // namespace

void ModelBundle::validate() const {
  prior.validate();
  if (generator.input_extent() != prior.code_extent()) {
    throw ContractError("bundle: generator input extent " + std::to_string(generator.input_extent()) +
                        " != z_dim + K + c_dim = " + std::to_string(prior.code_extent()));
  }
  const std::size_t p = pixels();
  if (critic.input_extent() != p || critic.output_extent() != 1) throw ContractError("bundle: critic extents");
  if (encoder_u.input_extent() != p || encoder_u.output_extent() != prior.categories + 2 * prior.c_dim) {
    throw ContractError("bundle: encoder_u extents");
  }
  if (encoder_z.input_extent() != p || encoder_z.output_extent() != 2 * prior.z_dim) {
    throw ContractError("bundle: encoder_z extents");
  }
}

ModelBundle init_bundle(const ArchitectureConfig& arch, const PriorConfig& prior, Rng& rng) {
  prior.validate();
  if (prior.z_dim == 0) throw ContractError("init_bundle: z_dim must be >= 1");
  ModelBundle b;
  b.prior = prior;
  b.generator = init_mlp(extents(prior.code_extent(), arch, arch.pixels), OutputHead::Sigmoid, rng);
  b.critic = init_mlp(extents(arch.pixels, arch, 1), OutputHead::Linear, rng);
  b.encoder_u = init_mlp(extents(arch.pixels, arch, prior.categories + 2 * prior.c_dim), OutputHead::Linear, rng);
  b.encoder_z = init_mlp(extents(arch.pixels, arch, 2 * prior.z_dim), OutputHead::Linear, rng);
  b.validate();
  return b;
}

BundleView make_view(const ModelBundle& bundle, Graph* graph, Trainable trainable) {
  BundleView v;
  v.graph = graph;
  v.prior = bundle.prior;
  v.generator = view_of(bundle.generator, graph, trainable.generator);
  v.critic = view_of(bundle.critic, graph, trainable.critic);
  v.encoder_u = view_of(bundle.encoder_u, graph, trainable.encoder_u);
  v.encoder_z = view_of(bundle.encoder_z, graph, trainable.encoder_z);
  return v;
}

Tensor generator_input(const LatentCode& code) {
  std::vector<Tensor> parts;
  for (CodePart part : kGeneratorInputOrder) {
    switch (part) {
      case CodePart::Z: parts.push_back(code.z); break;
      case CodePart::D: parts.push_back(code.d); break;
      case CodePart::C: parts.push_back(code.c); break;
    }
  }
  return concat_last(parts);
}

Tensor generate(const BundleView& view, const LatentCode& code) {
  const auto& p = view.prior;
  if (code.z.rank() != 2 || code.d.rank() != 2 || code.c.rank() != 2 || code.z.shape()[1] != p.z_dim ||
      code.d.shape()[1] != p.categories || code.c.shape()[1] != p.c_dim || code.d.shape()[0] != code.z.shape()[0] ||
      code.c.shape()[0] != code.z.shape()[0]) {
    throw ShapeError("generate: code shapes z" + to_string(code.z.shape()) + " d" + to_string(code.d.shape()) + " c" +
                     to_string(code.c.shape()) + " do not match the prior configuration");
  }
  return mlp_forward(view.generator, generator_input(code));
}

UPosterior encode_u(const BundleView& view, const Tensor& x) {
  check_pixels("encode", view.encoder_u, x);
  const std::size_t k = view.prior.categories;
  const std::size_t c = view.prior.c_dim;
  const Tensor out = mlp_forward(view.encoder_u, x);
  return {CategoricalParams(slice_last(out, 0, k)),
          GaussianParams(slice_last(out, k, k + c), slice_last(out, k + c, k + 2 * c))};
}

GaussianParams encode_z(const BundleView& view, const Tensor& x) {
  check_pixels("encode", view.encoder_z, x);
  const std::size_t z = view.prior.z_dim;
  const Tensor out = mlp_forward(view.encoder_z, x);
  return GaussianParams(slice_last(out, 0, z), slice_last(out, z, 2 * z));
}

EncoderOutput encode(const BundleView& view, const Tensor& x) {
  UPosterior u = encode_u(view, x);
  return {encode_z(view, x), std::move(u.c_post), std::move(u.d_post)};
}

Tensor criticize(const BundleView& view, const Tensor& x) {
  check_pixels("criticize", view.critic, x);
  return mlp_forward(view.critic, x);
}

Tensor reconstruct(const BundleView& view, const Tensor& x, Rng& rng, ReconstructionMode mode) {
  const EncoderOutput post = encode(view, x);
  LatentCode code;
  if (mode == ReconstructionMode::Mean) {
    code.z = post.z_post.mean();
    code.c = post.c_post.mean();
  } else {
    code.z = sample_gaussian_reparam(post.z_post, rng);
    code.c = sample_gaussian_reparam(post.c_post, rng);
  }
  code.d = post.d_post.probabilities();
  return generate(view, code);
}

}  // namespace ivg
