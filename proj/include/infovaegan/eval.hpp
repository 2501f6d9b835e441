#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "infovaegan/data.hpp"
#include "infovaegan/model.hpp"
#include "infovaegan/objectives.hpp"
#include "infovaegan/random.hpp"

namespace ivg {

struct ClusterAccuracyResult {
  double accuracy = 0.0;
  std::vector<std::size_t> assignment;              // predicted label -> truth label
  std::vector<std::vector<std::size_t>> confusion;  // [predicted][truth]
};

/// Accuracy under the best one-to-one relabeling of predicted clusters
/// (Hungarian method on the confusion matrix). Labels must lie in [0, k).
ClusterAccuracyResult cluster_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                       std::size_t k);

/// Minimum-cost perfect matching on a square cost matrix; returns row -> column.
std::vector<std::size_t> hungarian_min_cost(const std::vector<std::vector<double>>& cost);

/// Maps a batch of samples to one representation row per sample.
using Representation = std::function<std::vector<std::vector<double>>(std::span<const FactorSample>)>;

/// z-posterior mean, c-posterior mean and d-posterior probabilities.
Representation bundle_representation(const ModelBundle& bundle);

struct DisentanglementResult {
  double score = 0.0;
  std::vector<std::vector<std::size_t>> votes;  // [latent dim][factor], all votes
  std::vector<std::size_t> majority_factor;     // per latent dim, from the training half
};

/// Majority-vote metric: each vote fixes one factor, encodes a batch, and
/// names the latent dimension of least normalized variance. Normalization uses
/// the per-dimension std over the whole factor corpus; dimensions with std
/// below 1e-6 are ignored (vote goes to dim 0 if all are). The first half of
/// the votes trains the dim -> factor classifier, the second half scores it.
DisentanglementResult disentanglement_score(const Representation& represent, const FactorSpec& spec,
                                            std::size_t votes, std::size_t samples_per_vote, const Rng& rng);

enum class TraversalTarget : std::uint8_t { Continuous, Noise, Discrete };

struct TraversalSpec {
  TraversalTarget target = TraversalTarget::Continuous;
  std::size_t index = 0;
  double lo = -1.0;
  double hi = 1.0;
  std::size_t steps = 7;
};

struct TraversalGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t image_side = 0;
  std::vector<double> values;               // varied value per column (discrete: class index)
  LatentCode codes;                         // rows * cols codes, row-major
  std::vector<std::vector<double>> images;  // rows * cols images, row-major
};

/// Prior-mean code: z = 0, c = 0, d uniform.
LatentCode prior_mean_code(const PriorConfig& prior, std::size_t rows = 1);

/// One grid row per base code row; columns sweep the target latent.
TraversalGrid latent_traversal(const ModelBundle& bundle, const LatentCode& base, const TraversalSpec& spec);

double mean_squared_error(const Tensor& a, const Tensor& b);
/// MSE between x and its mean-mode reconstruction.
double reconstruction_error(const ModelBundle& bundle, const Tensor& x);

struct EvalConfig {
  std::size_t votes = 300;
  std::size_t samples_per_vote = 32;
  std::size_t test_elbo_samples = 16;
  std::size_t test_batch = 64;
  std::uint64_t seed = 7;
};

struct MetricsSummary {
  double cluster_accuracy = 0.0;
  double disentanglement_score = 0.0;
  double reconstruction_mse = 0.0;
  double baseline_reconstruction_mse = 0.0;  // same generator, freshly initialized encoders
  double test_elbo = 0.0;
};

/// Shape-factor cluster accuracy of argmax q(d|x) over the full corpus.
ClusterAccuracyResult shape_cluster_accuracy(const ModelBundle& bundle, const SpriteDataset& data);

MetricsSummary evaluate_bundle(const ModelBundle& bundle, const SpriteDataset& data, const EvalConfig& cfg,
                               const LossWeights& weights = {});

}  // namespace ivg
