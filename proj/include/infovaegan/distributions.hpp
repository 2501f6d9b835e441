#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "infovaegan/random.hpp"
#include "infovaegan/tensor.hpp"

namespace ivg {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// Diagonal Gaussian, one distribution per batch row. log_var is clamped to
/// [kLogVarMin, kLogVarMax] on construction (zero gradient outside the range).
class GaussianParams {
 public:
  GaussianParams(Tensor mean, Tensor log_var);

  const Tensor& mean() const { return mean_; }
  const Tensor& log_var() const { return log_var_; }
  std::size_t batch() const { return mean_.shape()[0]; }
  std::size_t dim() const { return mean_.shape()[1]; }

 private:
  Tensor mean_;
  Tensor log_var_;
};

/// Categorical over K classes per row, parameterized by logits.
class CategoricalParams {
 public:
  explicit CategoricalParams(Tensor logits);

  const Tensor& logits() const { return logits_; }
  std::size_t categories() const { return logits_.shape()[1]; }
  std::size_t batch() const { return logits_.shape()[0]; }
  Tensor probabilities() const { return softmax_last(logits_); }
  Tensor log_probabilities() const { return log_softmax_last(logits_); }

 private:
  Tensor logits_;
};

enum class ContinuousLaw : std::uint8_t { Gaussian, Uniform };

struct PriorConfig {
  std::size_t z_dim = 8;
  std::size_t c_dim = 2;
  std::size_t categories = 3;
  ContinuousLaw continuous_law = ContinuousLaw::Uniform;
  double temperature = 0.67;

  void validate() const;
  /// H(u) for u = (d, c): ln K plus the differential entropy of c's law.
  double marginal_entropy() const;
  std::size_t code_extent() const { return z_dim + categories + c_dim; }
};

/// Noise z, discrete d (rows on the simplex) and continuous c, batch-major.
struct LatentCode {
  Tensor z;
  Tensor d;
  Tensor c;

  std::size_t batch() const { return z.shape()[0]; }
};

Tensor sample_gaussian_reparam(const GaussianParams& p, Rng& rng);

/// Gumbel noise -log(-log U) with U ~ U(0,1), same shape as `like`.
Tensor sample_gumbel_noise(const Shape& shape, Rng& rng);
/// softmax((log_softmax(logits) + noise) / temperature), rows on the simplex.
Tensor gumbel_softmax(const Tensor& logits, double temperature, const Tensor& noise);
Tensor sample_gumbel_softmax(const Tensor& logits, double temperature, Rng& rng);

/// KL(q || N(0, I)) per row.
Tensor kl_gaussian_standard(const GaussianParams& p);
/// KL(q || Uniform(K)) per row, on category probabilities.
Tensor kl_categorical_uniform(const CategoricalParams& p);
/// Diagonal-Gaussian log density per row, constants included.
Tensor gaussian_log_density(const Tensor& x, const GaussianParams& p);
/// log softmax(logits) . one_hot per row.
Tensor categorical_log_prob(const Tensor& one_hot, const CategoricalParams& p);

LatentCode sample_prior(const PriorConfig& cfg, std::size_t n, Rng& rng);

/// Row-wise argmax of a batch x K tensor as a hard one-hot tensor.
Tensor hard_one_hot(const Tensor& probabilities);
std::vector<std::size_t> argmax_rows(const Tensor& scores);

}  // namespace ivg
