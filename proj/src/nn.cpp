#include "infovaegan/nn.hpp"

#include <bit>
#include <cmath>

namespace ivg {

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<Tensor*> Mlp::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers) {
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> Mlp::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers) {
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  return out;
}

Mlp init_mlp(std::span<const std::size_t> extents, OutputHead head, Rng& rng) {
  if (extents.size() < 2) throw ContractError("init_mlp: need at least two layer extents");
  for (auto e : extents) {
    if (e == 0) throw ContractError("init_mlp: layer extents must be positive");
  }
  Mlp net;
  net.head = head;
  for (std::size_t i = 0; i + 1 < extents.size(); ++i) {
    const std::size_t fan_in = extents[i];
    const std::size_t fan_out = extents[i + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    net.layers.push_back({Tensor({fan_in, fan_out}, std::move(w)), Tensor::zeros({fan_out})});
  }
  return net;
}

std::vector<Tensor> BoundMlp::leaves() const {
  std::vector<Tensor> out;
  if (!trainable) return out;
  for (const auto& l : layers) {
    out.push_back(l.weights);
    out.push_back(l.bias);
  }
  return out;
}

BoundMlp bind(const Mlp& net, Graph& graph) {
  BoundMlp b{{}, net.head, true};
  for (const auto& l : net.layers) b.layers.push_back({graph.leaf(l.weights), graph.leaf(l.bias)});
  return b;
}

BoundMlp freeze(const Mlp& net) {
  BoundMlp b{{}, net.head, false};
  for (const auto& l : net.layers) b.layers.push_back({l.weights.detached(), l.bias.detached()});
  return b;
}

Tensor mlp_forward(const BoundMlp& net, const Tensor& input) {
  if (net.layers.empty()) throw ContractError("mlp_forward: network has no layers");
  if (input.rank() != 2) throw ShapeError("mlp_forward: input must be batch x features, got " + to_string(input.shape()));
  Tensor h = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    if (h.shape()[1] != layer.weights.shape()[0]) {
      throw ShapeError("mlp_forward: layer " + std::to_string(i) + " expects " +
                       std::to_string(layer.weights.shape()[0]) + " inputs, got " + to_string(h.shape()));
    }
    h = add(matmul(h, layer.weights), layer.bias);
    if (i + 1 < net.layers.size()) h = leaky_relu(h);
  }
  if (net.head == OutputHead::Sigmoid) h = sigmoid(h);
  return h;
}

std::uint64_t parameter_checksum(const Mlp& net) {
  // FNV-1a over the raw bits, in parameter order.
  std::uint64_t h = 1469598103934665603ull;
  for (const Tensor* p : net.parameters()) {
    for (double v : p->values()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      for (int k = 0; k < 8; ++k) {
        h ^= (bits >> (8 * k)) & 0xffu;
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

AdamState init_adam(const Mlp& net, const AdamHyper& hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const Tensor* p : net.parameters()) {
    s.first_moment.emplace_back(p->size(), 0.0);
    s.second_moment.emplace_back(p->size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ContractError("adam_step: parameter, gradient and state counts differ");
  }
  ++state.step;
  const auto& hp = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(hp.beta1, t);
  const double correct2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (g.shape() != p.shape() || state.first_moment[i].size() != p.size()) {
      throw ContractError("adam_step: shape mismatch for parameter " + std::to_string(i) + ": " +
                          to_string(p.shape()) + " vs gradient " + to_string(g.shape()));
    }
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    std::vector<double> next(p.values().begin(), p.values().end());
    const auto gv = g.values();
    for (std::size_t k = 0; k < next.size(); ++k) {
      m[k] = hp.beta1 * m[k] + (1.0 - hp.beta1) * gv[k];
      v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * gv[k] * gv[k];
      const double m_hat = m[k] / correct1;
      const double v_hat = v[k] / correct2;
      next[k] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    }
    p = Tensor(p.shape(), std::move(next));
  }
}

void adam_step(Mlp& net, const BoundMlp& bound, const GradientMap& grads, AdamState& state) {
  if (!bound.trainable) throw ContractError("adam_step: network was not bound for training");
  std::vector<Tensor> g;
  for (const auto& leaf : bound.leaves()) g.push_back(grads.at(leaf));
  auto params = net.parameters();
  adam_step(params, g, state);
}

}  // namespace ivg
