#include "infovaegan/objectives.hpp"

#include <cmath>
#include <numbers>

namespace ivg {

namespace {

void require_constant(std::string_view what, const Tensor& t) {
  if (t.has_node()) throw ContractError(std::string(what) + " must be detached from any graph");
}

Tensor gaussian_recon_loglik(const Tensor& x, const Tensor& mean, double sigma) {
  const double pixels = static_cast<double>(x.shape()[1]);
  const double inv_var = 1.0 / (sigma * sigma);
  const double log_norm = 0.5 * pixels * std::log(2.0 * std::numbers::pi * sigma * sigma);
  const Tensor sq = sum_last(square(sub(x, mean)));
  return sub(mul(Tensor::scalar(-0.5 * inv_var), sq), Tensor::scalar(log_norm));
}

}  // namespace

void LossWeights::validate() const {
  if (gradient_penalty < 0.0 || mi_discrete < 0.0 || mi_continuous < 0.0) {
    throw ContractError("loss weights must be non-negative");
  }
  if (!(recon_sigma > 0.0)) throw ContractError("recon_sigma must be > 0");
}

CriticLossTerms critic_loss_at(const BundleView& view, const Tensor& real, const Tensor& fake,
                               std::span<const double> mix, const LossWeights& w) {
  if (!view.graph) throw ContractError("critic_loss: view has no graph");
  require_constant("critic_loss: real batch", real);
  require_constant("critic_loss: fake batch", fake);
  if (real.shape() != fake.shape() || real.rank() != 2) {
    throw ShapeError("critic_loss: real " + to_string(real.shape()) + " vs fake " + to_string(fake.shape()));
  }
  const std::size_t rows = real.shape()[0];
  const std::size_t cols = real.shape()[1];
  if (mix.size() != rows) throw ShapeError("critic_loss: one interpolation weight per row required");

  std::vector<double> blend(real.size());
  const auto vr = real.values();
  const auto vf = fake.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t i = r * cols + j;
      blend[i] = mix[r] * vr[i] + (1.0 - mix[r]) * vf[i];
    }
  }
  Graph& graph = *view.graph;
  const Tensor interp = graph.leaf(Tensor(real.shape(), std::move(blend)));
  const Tensor interp_leaf[] = {interp};
  const Tensor grad_x = backward_differentiable(sum(criticize(view, interp)), interp_leaf).at(interp);
  const Tensor penalty = mean(square(sub(l2_norm_last(grad_x), Tensor::scalar(1.0))));

  CriticLossTerms t;
  t.real_score_mean = mean(criticize(view, real));
  t.fake_score_mean = mean(criticize(view, fake));
  t.gradient_penalty = penalty;
  t.total = add(sub(t.fake_score_mean, t.real_score_mean), mul(Tensor::scalar(w.gradient_penalty), penalty));
  return t;
}

CriticLossTerms critic_loss(const BundleView& view, const Tensor& real, const Tensor& fake, Rng& rng,
                            const LossWeights& w) {
  if (real.rank() != 2) throw ShapeError("critic_loss: expected batch x pixels, got " + to_string(real.shape()));
  std::vector<double> mix(real.shape()[0]);
  for (auto& m : mix) m = rng.uniform();
  return critic_loss_at(view, real, fake, mix, w);
}

Tensor generator_adv_loss(const BundleView& view, const Tensor& fake) { return neg(mean(criticize(view, fake))); }

MiTerms mi_terms(const UPosterior& posterior, const LatentCode& code, const PriorConfig& prior, const LossWeights& w) {
  const Tensor labels = hard_one_hot(code.d.detached());
  MiTerms t;
  t.discrete_logprob_mean = mean(categorical_log_prob(labels, posterior.d_post));
  t.continuous_logdensity_mean =
      prior.c_dim == 0 ? Tensor::scalar(0.0) : mean(gaussian_log_density(code.c.detached(), posterior.c_post));
  t.entropy = prior.marginal_entropy();
  t.lower_bound = add(add(t.discrete_logprob_mean, t.continuous_logdensity_mean), Tensor::scalar(t.entropy));
  t.training_loss = neg(add(mul(Tensor::scalar(w.mi_discrete), t.discrete_logprob_mean),
                            mul(Tensor::scalar(w.mi_continuous), t.continuous_logdensity_mean)));
  return t;
}

MiTerms mi_loss(const BundleView& view, const Tensor& fake, const LatentCode& code, const LossWeights& w) {
  if (code.batch() != fake.shape()[0]) throw ShapeError("mi_loss: code and image batch extents differ");
  return mi_terms(encode_u(view, fake), code, view.prior, w);
}

ElboTerms elbo_from_posterior(const BundleView& view, const Tensor& x, const EncoderOutput& posterior, Rng& rng,
                              const LossWeights& w, PosteriorSampling sampling, std::size_t n_mc, KlEstimator kl) {
  if (n_mc < 1) throw ContractError("elbo: need at least one Monte-Carlo sample");
  if (x.rank() != 2 || posterior.z_post.batch() != x.shape()[0]) {
    throw ShapeError("elbo: posterior batch does not match data " + to_string(x.shape()));
  }
  const bool sampled_kl = kl == KlEstimator::SampleBased && sampling == PosteriorSampling::Stochastic;
  const bool has_c = view.prior.c_dim > 0;
  auto standard = [](const Tensor& like) { return GaussianParams(Tensor::zeros(like.shape()), Tensor::zeros(like.shape())); };
  // log q(v|x) - log N(v; 0, I), batch mean
  auto log_ratio = [&](const Tensor& v, const GaussianParams& q) {
    return mean(sub(gaussian_log_density(v, q), gaussian_log_density(v, standard(v))));
  };

  Tensor recon_total, kl_z_total, kl_c_total;
  auto accumulate = [](Tensor& total, const Tensor& term, std::size_t s) { total = s == 0 ? term : add(total, term); };
  for (std::size_t s = 0; s < n_mc; ++s) {
    LatentCode code;
    if (sampling == PosteriorSampling::Stochastic) {
      code.z = sample_gaussian_reparam(posterior.z_post, rng);
      code.c = sample_gaussian_reparam(posterior.c_post, rng);
      code.d = sample_gumbel_softmax(posterior.d_post.logits(), view.prior.temperature, rng);
    } else {
      code.z = posterior.z_post.mean();
      code.c = posterior.c_post.mean();
      code.d = posterior.d_post.probabilities();
    }
    accumulate(recon_total, mean(gaussian_recon_loglik(x, generate(view, code), w.recon_sigma)), s);
    if (sampled_kl) {
      accumulate(kl_z_total, log_ratio(code.z, posterior.z_post), s);
      if (has_c) accumulate(kl_c_total, log_ratio(code.c, posterior.c_post), s);
    }
  }
  const Tensor inv_n = Tensor::scalar(1.0 / static_cast<double>(n_mc));
  ElboTerms t;
  t.recon_loglik = mul(recon_total, inv_n);
  if (sampled_kl) {
    t.kl_z = mul(kl_z_total, inv_n);
    t.kl_c = has_c ? mul(kl_c_total, inv_n) : Tensor::scalar(0.0);
  } else {
    t.kl_z = mean(kl_gaussian_standard(posterior.z_post));
    t.kl_c = has_c ? mean(kl_gaussian_standard(posterior.c_post)) : Tensor::scalar(0.0);
  }
  t.kl_d = mean(kl_categorical_uniform(posterior.d_post));
  t.elbo = sub(sub(sub(t.recon_loglik, t.kl_z), t.kl_c), t.kl_d);
  return t;
}

ElboTerms datafree_elbo(const BundleView& view, const Tensor& x_fake, Rng& rng, const LossWeights& w) {
  if (view.generator.trainable) {
    throw ContractError("datafree_elbo: generator parameters must be frozen (no gradient to the generator)");
  }
  return elbo_from_posterior(view, x_fake, encode(view, x_fake), rng, w);
}

ElboTerms test_elbo(const BundleView& view, const Tensor& x_t, Rng& rng, std::size_t n_mc, const LossWeights& w,
                    KlEstimator kl) {
  if (n_mc < 1) throw ContractError("test_elbo: n_mc must be >= 1");
  return elbo_from_posterior(view, x_t, encode(view, x_t), rng, w, PosteriorSampling::Stochastic, n_mc, kl);
}

}  // namespace ivg
