#include "infovaegan/distributions.hpp"

#include <cmath>
#include <numbers>

namespace ivg {

namespace {

Tensor clamp(const Tensor& x, double lo, double hi) {
  return neg(maximum(neg(maximum(x, Tensor::scalar(lo))), Tensor::scalar(-hi)));
}

void require_batch_matrix(std::string_view what, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected batch x dim, got " + to_string(t.shape()));
}

}  // namespace

GaussianParams::GaussianParams(Tensor mean, Tensor log_var) : mean_(std::move(mean)) {
  require_batch_matrix("GaussianParams mean", mean_);
  if (mean_.shape() != log_var.shape()) {
    throw ShapeError("GaussianParams: mean " + to_string(mean_.shape()) + " vs log_var " +
                     to_string(log_var.shape()));
  }
  for (double v : log_var.values()) {
    if (std::isnan(v)) throw DomainError("GaussianParams: log_var is NaN");
  }
  log_var_ = clamp(log_var, kLogVarMin, kLogVarMax);
}

CategoricalParams::CategoricalParams(Tensor logits) : logits_(std::move(logits)) {
  require_batch_matrix("CategoricalParams logits", logits_);
  if (logits_.shape()[1] < 1) throw ContractError("CategoricalParams: need at least one category");
}

void PriorConfig::validate() const {
  if (categories < 1) throw ContractError("prior: categories must be >= 1");
  if (!(temperature > 0.0)) throw ContractError("prior: gumbel temperature must be > 0");
}

double PriorConfig::marginal_entropy() const {
  const double per_dim = continuous_law == ContinuousLaw::Uniform
                             ? std::numbers::ln2
                             : 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  return std::log(static_cast<double>(categories)) + static_cast<double>(c_dim) * per_dim;
}

Tensor sample_gaussian_reparam(const GaussianParams& p, Rng& rng) {
  std::vector<double> eps(p.mean().size());
  for (auto& e : eps) e = rng.normal();
  const Tensor noise(p.mean().shape(), std::move(eps));
  return add(p.mean(), mul(exp(mul(Tensor::scalar(0.5), p.log_var())), noise));
}

Tensor sample_gumbel_noise(const Shape& shape, Rng& rng) {
  std::vector<double> g(numel(shape));
  for (auto& v : g) {
    // U in (0,1) and -log U in (0, inf); guard the upper end where -log U underflows to 0.
    double inner = 0.0;
    do {
      inner = -std::log(rng.uniform_open());
    } while (inner <= 0.0);
    v = -std::log(inner);
  }
  return Tensor(shape, std::move(g));
}

Tensor gumbel_softmax(const Tensor& logits, double temperature, const Tensor& noise) {
  if (!(temperature > 0.0)) throw ContractError("gumbel_softmax: temperature must be > 0");
  return softmax_last(mul(add(log_softmax_last(logits), noise), Tensor::scalar(1.0 / temperature)));
}

Tensor sample_gumbel_softmax(const Tensor& logits, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw ContractError("sample_gumbel_softmax: temperature must be > 0");
  return gumbel_softmax(logits, temperature, sample_gumbel_noise(logits.shape(), rng));
}

Tensor kl_gaussian_standard(const GaussianParams& p) {
  const Tensor& mu = p.mean();
  const Tensor& lv = p.log_var();
  const Tensor inner = sub(sub(add(square(mu), exp(lv)), Tensor::scalar(1.0)), lv);
  return mul(Tensor::scalar(0.5), sum_last(inner));
}

Tensor kl_categorical_uniform(const CategoricalParams& p) {
  const Tensor logq = p.log_probabilities();
  const double log_k = std::log(static_cast<double>(p.categories()));
  return sum_last(mul(exp(logq), add(logq, Tensor::scalar(log_k))));
}

Tensor gaussian_log_density(const Tensor& x, const GaussianParams& p) {
  if (x.shape() != p.mean().shape()) {
    throw ShapeError("gaussian_log_density: x " + to_string(x.shape()) + " vs mean " + to_string(p.mean().shape()));
  }
  const Tensor& lv = p.log_var();
  const Tensor quad = mul(square(sub(x, p.mean())), exp(neg(lv)));
  const Tensor per_dim = add(add(quad, lv), Tensor::scalar(std::log(2.0 * std::numbers::pi)));
  return mul(Tensor::scalar(-0.5), sum_last(per_dim));
}

Tensor categorical_log_prob(const Tensor& one_hot, const CategoricalParams& p) {
  if (one_hot.shape() != p.logits().shape()) {
    throw ShapeError("categorical_log_prob: one-hot " + to_string(one_hot.shape()) + " vs logits " +
                     to_string(p.logits().shape()));
  }
  const std::size_t k = p.categories();
  const auto v = one_hot.values();
  for (std::size_t r = 0; r < p.batch(); ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double x = v[r * k + j];
      if (x < 0.0 || x > 1.0) throw ContractError("categorical_log_prob: one-hot entry outside [0,1]");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ContractError("categorical_log_prob: one-hot row does not sum to 1");
  }
  return sum_last(mul(one_hot, p.log_probabilities()));
}

LatentCode sample_prior(const PriorConfig& cfg, std::size_t n, Rng& rng) {
  cfg.validate();
  if (n < 1) throw ContractError("sample_prior: batch must be >= 1");
  std::vector<double> z(n * cfg.z_dim);
  for (auto& v : z) v = rng.normal();
  const Tensor d = sample_gumbel_softmax(Tensor::zeros({n, cfg.categories}), cfg.temperature, rng);
  std::vector<double> c(n * cfg.c_dim);
  for (auto& v : c) {
    if (cfg.continuous_law == ContinuousLaw::Uniform) {
      v = 2.0 * rng.uniform_open() - 1.0;
    } else {
      v = rng.normal();
    }
  }
  return {Tensor({n, cfg.z_dim}, std::move(z)), d, Tensor({n, cfg.c_dim}, std::move(c))};
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  require_batch_matrix("argmax_rows", scores);
  const std::size_t k = scores.shape()[1];
  std::vector<std::size_t> out(scores.shape()[0], 0);
  const auto v = scores.values();
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (std::size_t j = 1; j < k; ++j) {
      if (v[r * k + j] > v[r * k + out[r]]) out[r] = j;
    }
  }
  return out;
}

Tensor hard_one_hot(const Tensor& probabilities) {
  const auto idx = argmax_rows(probabilities);
  const std::size_t k = probabilities.shape()[1];
  std::vector<double> v(probabilities.size(), 0.0);
  for (std::size_t r = 0; r < idx.size(); ++r) v[r * k + idx[r]] = 1.0;
  return Tensor(probabilities.shape(), std::move(v));
}

}  // namespace ivg
