#pragma once

// Helpers shared by the unit tests and the acceptance runner: random inputs,
// one differentiable probe per primitive, and small models with known answers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "infovaegan/model.hpp"
#include "infovaegan/nn.hpp"
#include "infovaegan/objectives.hpp"
#include "infovaegan/random.hpp"
#include "infovaegan/tensor.hpp"

namespace ivg::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

/// Values with |v| in [lo, hi] and random sign; keeps probes off kinks at 0.
inline Tensor away_from_zero(const Shape& shape, Rng& rng, double lo = 0.2, double hi = 2.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

/// sum(y * r) for a fixed random r: every output coordinate contributes, so
/// rules that only get the sum of the gradient right (softmax, normalize) fail.
inline Tensor project(const Tensor& y, const Tensor& r) { return sum(mul(y, r)); }

/// One scalar function of a single tensor argument for a primitive, plus the
/// distribution of points it is probed at.
struct GradientCase {
  std::string name;
  std::function<Tensor(const Tensor&)> f;
  std::function<Tensor(Rng&)> point;
};

/// Every primitive, each differentiable input probed separately, with
/// broadcasting variants for the binary operations. Constants are drawn once
/// from `rng` so each case is a fixed function.
inline std::vector<GradientCase> primitive_gradient_cases(Rng& rng) {
  std::vector<GradientCase> cases;
  const Shape m{3, 4};
  auto rnd = [](Shape s, double lo = -1.0, double hi = 1.0) {
    return [s, lo, hi](Rng& r) { return random_tensor(s, r, lo, hi); };
  };
  auto r34 = random_tensor(m, rng);
  auto r32 = random_tensor({3, 2}, rng);
  auto other34 = random_tensor(m, rng);
  auto other4 = random_tensor({4}, rng);
  auto pos34 = random_tensor(m, rng, 0.5, 2.0);
  auto mat42 = random_tensor({4, 2}, rng);

  auto unary = [&](std::string name, std::function<Tensor(const Tensor&)> op, std::function<Tensor(Rng&)> point) {
    const Tensor y = op(point(rng));
    const Tensor r = random_tensor(y.shape(), rng);
    cases.push_back({std::move(name), [op, r](const Tensor& x) { return project(op(x), r); }, std::move(point)});
  };

  unary("add/lhs", [=](const Tensor& x) { return add(x, other34); }, rnd(m));
  unary("add/rhs-broadcast", [=](const Tensor& x) { return add(other34, x); }, rnd({4}));
  unary("add/scalar-broadcast", [=](const Tensor& x) { return add(other34, x); }, rnd({}));
  unary("sub/lhs", [=](const Tensor& x) { return sub(x, other4); }, rnd(m));
  unary("sub/rhs", [=](const Tensor& x) { return sub(other34, x); }, rnd(m));
  unary("sub/rhs-broadcast", [=](const Tensor& x) { return sub(other34, x); }, rnd({4}));
  unary("mul/lhs", [=](const Tensor& x) { return mul(x, other34); }, rnd(m));
  unary("mul/rhs-broadcast", [=](const Tensor& x) { return mul(other34, x); }, rnd({4}));
  unary("mul/self", [](const Tensor& x) { return mul(x, x); }, rnd(m));
  unary("div/numerator", [=](const Tensor& x) { return div(x, pos34); }, rnd(m));
  unary("div/denominator", [=](const Tensor& x) { return div(other34, x); }, rnd(m, 0.5, 2.0));
  unary("div/denominator-broadcast", [=](const Tensor& x) { return div(other34, x); }, rnd({4}, 0.5, 2.0));
  unary("matmul/lhs", [=](const Tensor& x) { return matmul(x, mat42); }, rnd(m));
  unary("matmul/rhs", [=](const Tensor& x) { return matmul(r34, x); }, rnd({4, 2}));
  unary("matmul/both", [](const Tensor& x) { return matmul(x, transpose(x)); }, rnd(m));
  unary("transpose", [](const Tensor& x) { return transpose(x); }, rnd(m));
  unary("exp", [](const Tensor& x) { return exp(x); }, rnd(m));
  unary("log", [](const Tensor& x) { return log(x); }, rnd(m, 0.5, 2.0));
  unary("pow/2.5", [](const Tensor& x) { return pow(x, 2.5); }, rnd(m, 0.5, 2.0));
  unary("pow/-1.5", [](const Tensor& x) { return pow(x, -1.5); }, rnd(m, 0.5, 2.0));
  unary("pow/3-negative-base", [](const Tensor& x) { return pow(x, 3.0); }, rnd(m));
  unary("neg", [](const Tensor& x) { return neg(x); }, rnd(m));
  unary("sum", [](const Tensor& x) { return sum(x); }, rnd(m));
  unary("sum_last", [](const Tensor& x) { return sum_last(x); }, rnd(m));
  unary("mean", [](const Tensor& x) { return mean(x); }, rnd(m));
  unary("sqrt", [](const Tensor& x) { return sqrt(x); }, rnd(m, 0.5, 2.0));
  unary("maximum/lhs", [=](const Tensor& x) { return maximum(x, other34); }, rnd(m));
  unary("maximum/rhs-broadcast", [=](const Tensor& x) { return maximum(other34, x); }, rnd({4}));
  unary("leaky_relu", [](const Tensor& x) { return leaky_relu(x); }, [m](Rng& r) { return away_from_zero(m, r); });
  unary("sigmoid", [](const Tensor& x) { return sigmoid(x); }, rnd(m, -3.0, 3.0));
  unary("tanh", [](const Tensor& x) { return tanh(x); }, rnd(m, -3.0, 3.0));
  unary("softmax_last", [](const Tensor& x) { return softmax_last(x); }, rnd(m, -3.0, 3.0));
  unary("log_softmax_last", [](const Tensor& x) { return log_softmax_last(x); }, rnd(m, -3.0, 3.0));
  unary("reshape", [](const Tensor& x) { return reshape(x, {2, 6}); }, rnd(m));
  unary("broadcast_to", [](const Tensor& x) { return broadcast_to(x, {3, 4}); }, rnd({4}));
  unary("broadcast_to/column", [](const Tensor& x) { return broadcast_to(x, {3, 4}); }, rnd({3, 1}));
  unary("sum_to", [](const Tensor& x) { return sum_to(x, {4}); }, rnd(m));
  unary("sum_to/column", [](const Tensor& x) { return sum_to(x, {3, 1}); }, rnd(m));
  unary("concat_last/first", [=](const Tensor& x) {
    const Tensor parts[] = {x, r32};
    return concat_last(parts);
  }, rnd(m));
  unary("concat_last/second", [=](const Tensor& x) {
    const Tensor parts[] = {r34, x, r32};
    return concat_last(parts);
  }, rnd({3, 3}));
  unary("slice_last", [](const Tensor& x) { return slice_last(x, 1, 3); }, rnd(m));
  unary("square", [](const Tensor& x) { return square(x); }, rnd(m));
  unary("l2_norm_last", [](const Tensor& x) { return l2_norm_last(x); }, [m](Rng& r) { return away_from_zero(m, r); });
  unary("normalize_last", [](const Tensor& x) { return normalize_last(x); },
        [m](Rng& r) { return away_from_zero(m, r); });
  return cases;
}

/// A two-layer critic with `pixels` inputs.
inline Mlp small_critic(std::size_t pixels, std::size_t hidden, Rng& rng) {
  const std::size_t extents[] = {pixels, hidden, 1};
  Mlp net = init_mlp(extents, OutputHead::Linear, rng);
  // Nonzero biases so every parameter has a visible effect on the penalty.
  for (auto& layer : net.layers) layer.bias = random_tensor(layer.bias.shape(), rng, -0.1, 0.1);
  return net;
}

/// Flatten all parameters of a network into one vector and back.
inline std::vector<double> flatten(const Mlp& net) {
  std::vector<double> out;
  for (const Tensor* p : net.parameters()) out.insert(out.end(), p->values().begin(), p->values().end());
  return out;
}

inline Mlp unflatten(const Mlp& like, std::span<const double> values) {
  Mlp net = like;
  std::size_t k = 0;
  for (Tensor* p : net.parameters()) {
    *p = Tensor(p->shape(), std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(k),
                                                values.begin() + static_cast<std::ptrdiff_t>(k + p->size())));
    k += p->size();
  }
  return net;
}

/// Gradient-penalty scalar of `critic` at fixed interpolation weights.
inline double penalty_value(const Mlp& critic, const Tensor& real, const Tensor& fake, std::span<const double> mix) {
  Graph graph;
  BundleView view;
  view.graph = &graph;
  view.critic = freeze(critic);
  return critic_loss_at(view, real, fake, mix, LossWeights{}).gradient_penalty.item();
}

/// Analytic gradient of penalty_value w.r.t. every critic parameter, flattened
/// in parameters() order.
inline std::vector<double> penalty_gradient(const Mlp& critic, const Tensor& real, const Tensor& fake,
                                            std::span<const double> mix) {
  Graph graph;
  BundleView view;
  view.graph = &graph;
  view.critic = bind(critic, graph);
  const Tensor penalty = critic_loss_at(view, real, fake, mix, LossWeights{}).gradient_penalty;
  const auto leaves = view.critic.leaves();
  const GradientMap grads = backward(penalty, leaves);
  std::vector<double> out;
  for (const auto& leaf : leaves) {
    const Tensor& g = grads.at(leaf);
    out.insert(out.end(), g.values().begin(), g.values().end());
  }
  return out;
}

/// Max over parameters of |analytic - central difference| / max(1, |analytic|)
/// for the penalty scalar.
inline double penalty_gradient_error(const Mlp& critic, const Tensor& real, const Tensor& fake,
                                     std::span<const double> mix, double eps = 1e-5) {
  const std::vector<double> analytic = penalty_gradient(critic, real, fake, mix);
  std::vector<double> theta = flatten(critic);
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + eps;
    const double hi = penalty_value(unflatten(critic, theta), real, fake, mix);
    theta[i] = saved - eps;
    const double lo = penalty_value(unflatten(critic, theta), real, fake, mix);
    theta[i] = saved;
    const double numeric = (hi - lo) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

/// Linear-Gaussian toy: x = a z + b + noise, z ~ N(0, 1), noise ~ N(0, s^2).
/// One pixel, z_dim 1, one category, no continuous code, linear generator.
struct LinearGaussianToy {
  double a = 1.3;
  double b = -0.4;
  double sigma = 1.0;

  PriorConfig prior() const {
    PriorConfig p;
    p.z_dim = 1;
    p.c_dim = 0;
    p.categories = 1;
    return p;
  }

  double log_marginal(double x) const {
    const double var = a * a + sigma * sigma;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - b) * (x - b) / var;
  }

  /// Generator input is (z, d) with d == 1: weights [a, 0], bias b.
  ModelBundle bundle(Rng& rng) const {
    ArchitectureConfig arch;
    arch.pixels = 1;
    arch.hidden = 4;
    arch.depth = 1;
    ModelBundle m = init_bundle(arch, prior(), rng);
    m.generator.layers = {DenseLayer{Tensor({2, 1}, {a, 0.0}), Tensor({1}, {b})}};
    m.generator.head = OutputHead::Linear;
    return m;
  }

  /// Replace the z-encoder by the exact posterior N(k (x - b), s^2 / (a^2 + s^2)),
  /// k = a / (a^2 + s^2), written as one affine layer.
  void set_true_posterior(ModelBundle& m) const {
    const double var = a * a + sigma * sigma;
    const double k = a / var;
    m.encoder_z.layers = {DenseLayer{Tensor({1, 2}, {k, 0.0}), Tensor({2}, {-k * b, std::log(sigma * sigma / var)})}};
    m.encoder_z.head = OutputHead::Linear;
  }
};

}  // namespace ivg::testing
