#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "infovaegan/distributions.hpp"
#include "infovaegan/model.hpp"
#include "infovaegan/random.hpp"
#include "infovaegan/tensor.hpp"

namespace ivg {

struct LossWeights {
  double gradient_penalty = 10.0;
  double mi_discrete = 1.0;
  double mi_continuous = 0.1;
  double recon_sigma = 1.0;  // scale of the Gaussian reconstruction likelihood

  void validate() const;
};

/// Scalar tensors; `total` carries the graph for the critic update.
struct CriticLossTerms {
  Tensor real_score_mean;
  Tensor fake_score_mean;
  Tensor gradient_penalty;
  Tensor total;  // fake - real + lambda * penalty
};

struct ElboTerms {
  Tensor recon_loglik;
  Tensor kl_z;
  Tensor kl_c;
  Tensor kl_d;
  Tensor elbo;  // recon - kl_z - kl_c - kl_d
};

struct MiTerms {
  Tensor discrete_logprob_mean;
  Tensor continuous_logdensity_mean;
  double entropy = 0.0;  // H(u), constant
  Tensor lower_bound;    // discrete + continuous + H(u)
  Tensor training_loss;  // -(w_d * discrete + w_c * continuous)
};

/// Wasserstein critic loss with gradient penalty on straight-line
/// interpolates x~ = e * real + (1 - e) * fake, e ~ U(0,1) per row.
/// `real` and `fake` must be constants; the view needs a graph.
CriticLossTerms critic_loss(const BundleView& view, const Tensor& real, const Tensor& fake, Rng& rng,
                            const LossWeights& w);
/// As critic_loss with explicit per-row interpolation weights.
CriticLossTerms critic_loss_at(const BundleView& view, const Tensor& real, const Tensor& fake,
                               std::span<const double> mix, const LossWeights& w);

/// -mean(D(fake)).
Tensor generator_adv_loss(const BundleView& view, const Tensor& fake);

/// Mutual-information lower bound with W(u|x) given by the u-encoder applied
/// to the generated batch. The discrete label is the argmax of code.d.
MiTerms mi_loss(const BundleView& view, const Tensor& fake, const LatentCode& code, const LossWeights& w);
MiTerms mi_terms(const UPosterior& posterior, const LatentCode& code, const PriorConfig& prior, const LossWeights& w);

enum class PosteriorSampling : std::uint8_t { Stochastic, Mean };

/// How the z and c KL terms are estimated. ClosedForm is the default.
/// SampleBased averages log q(v|x) - log p(v) over the same posterior draws
/// that feed the reconstruction term; the per-draw sum of the two is then
/// log p(x, v) - log q(v|x), which is constant when q is the exact posterior.
/// The discrete KL is always closed form.
enum class KlEstimator : std::uint8_t { ClosedForm, SampleBased };

/// ELBO of x under the generator given posterior parameters: Monte-Carlo
/// reconstruction log-likelihood (constants included) averaged over n_mc draws
/// of (z, c, d), minus closed-form KL terms. All terms are batch means.
ElboTerms elbo_from_posterior(const BundleView& view, const Tensor& x, const EncoderOutput& posterior, Rng& rng,
                              const LossWeights& w, PosteriorSampling sampling = PosteriorSampling::Stochastic,
                              std::size_t n_mc = 1, KlEstimator kl = KlEstimator::ClosedForm);

/// Data-free ELBO on generator samples. The generator must be frozen in the view.
ElboTerms datafree_elbo(const BundleView& view, const Tensor& x_fake, Rng& rng, const LossWeights& w);

/// Lower bound on log p(x_t) for arbitrary data, averaged over n_mc samples.
ElboTerms test_elbo(const BundleView& view, const Tensor& x_t, Rng& rng, std::size_t n_mc,
                    const LossWeights& w = {}, KlEstimator kl = KlEstimator::ClosedForm);

}  // namespace ivg
