#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "infovaegan/eval.hpp"
#include "support.hpp"

using namespace ivg;

namespace {

double brute_force_accuracy(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                            std::size_t k) {
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += perm[pred[i]] == truth[i];
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

Representation oracle_representation() {
  return [](std::span<const FactorSample> samples) {
    std::vector<std::vector<double>> out;
    for (const auto& s : samples) {
      out.push_back({static_cast<double>(s.factors[0]), static_cast<double>(s.factors[1]),
                     static_cast<double>(s.factors[2])});
    }
    return out;
  };
}

ModelBundle small_bundle(std::uint64_t seed = 1) {
  ArchitectureConfig arch;
  arch.pixels = 1024;
  arch.hidden = 16;
  Rng rng(seed);
  return init_bundle(arch, PriorConfig{}, rng);
}

}  // namespace

TEST(ClusterAccuracy, IdentityAndPermutation) {
  const std::vector<std::size_t> truth = {0, 1, 2, 0, 1, 2, 2};
  EXPECT_EQ(cluster_accuracy(truth, truth, 3).accuracy, 1.0);
  std::vector<std::size_t> relabeled;
  for (auto t : truth) relabeled.push_back((t + 1) % 3);
  const auto res = cluster_accuracy(relabeled, truth, 3);
  EXPECT_EQ(res.accuracy, 1.0);
  EXPECT_EQ(res.assignment, (std::vector<std::size_t>{2, 0, 1}));
}

TEST(ClusterAccuracy, WorkedExample) {
  const std::vector<std::size_t> pred = {0, 0, 0, 1, 1, 2};
  const std::vector<std::size_t> truth = {0, 0, 1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(cluster_accuracy(pred, truth, 3).accuracy, 4.0 / 6.0);
}

TEST(ClusterAccuracy, MatchesBruteForce) {
  Rng rng(11);
  for (std::size_t k = 1; k <= 6; ++k) {
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 1 + rng.index(30);
      std::vector<std::size_t> pred(n), truth(n);
      for (std::size_t i = 0; i < n; ++i) {
        pred[i] = rng.index(k);
        truth[i] = rng.index(k);
      }
      EXPECT_DOUBLE_EQ(cluster_accuracy(pred, truth, k).accuracy, brute_force_accuracy(pred, truth, k));
    }
  }
}

TEST(ClusterAccuracy, ConstantPredictionScoresLargestClass) {
  const std::vector<std::size_t> truth = {0, 1, 2, 2, 1, 2};
  const std::vector<std::size_t> pred(truth.size(), 1);
  const double acc = cluster_accuracy(pred, truth, 3).accuracy;
  EXPECT_DOUBLE_EQ(acc, 3.0 / 6.0);
  EXPECT_GE(acc, 1.0 / 3.0);
}

TEST(ClusterAccuracy, RejectsBadInput) {
  const std::vector<std::size_t> a = {0, 1};
  const std::vector<std::size_t> b = {0};
  const std::vector<std::size_t> c = {0, 3};
  EXPECT_THROW(cluster_accuracy(a, b, 2), ContractError);
  EXPECT_THROW(cluster_accuracy(c, a, 3), ContractError);
  EXPECT_THROW(cluster_accuracy(std::span<const std::size_t>{}, std::span<const std::size_t>{}, 2), ContractError);
}

TEST(Hungarian, SmallMatrix) {
  const std::vector<std::vector<double>> cost = {{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  // Optimum: row0->col1 (1), row1->col0 (2), row2->col2 (2).
  EXPECT_EQ(hungarian_min_cost(cost), (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_THROW(hungarian_min_cost({{1, 2}}), ContractError);
}

TEST(Disentanglement, OracleEncoderScoresOne) {
  const auto res = disentanglement_score(oracle_representation(), FactorSpec{}, 100, 16, Rng(3));
  EXPECT_EQ(res.score, 1.0);
  EXPECT_EQ(res.majority_factor, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Disentanglement, ConstantEncoderScoresChance) {
  const Representation constant = [](std::span<const FactorSample> s) {
    return std::vector<std::vector<double>>(s.size(), std::vector<double>(4, 0.5));
  };
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    total += disentanglement_score(constant, FactorSpec{}, 200, 8, Rng(seed)).score;
  }
  EXPECT_NEAR(total / 20.0, 1.0 / 3.0, 0.05);
}

TEST(Disentanglement, NoiseEncoderScoresNearChance) {
  const Representation noise = [](std::span<const FactorSample> s) {
    static Rng rng(99);
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      out.push_back({rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal()});
    }
    return out;
  };
  const double score = disentanglement_score(noise, FactorSpec{}, 600, 16, Rng(5)).score;
  EXPECT_NEAR(score, 1.0 / 3.0, 0.1);
}

TEST(Disentanglement, Deterministic) {
  const ModelBundle b = small_bundle();
  const auto rep = bundle_representation(b);
  const double a = disentanglement_score(rep, FactorSpec{}, 20, 4, Rng(1)).score;
  const double c = disentanglement_score(rep, FactorSpec{}, 20, 4, Rng(1)).score;
  EXPECT_EQ(a, c);
  EXPECT_GE(a, 0.0);
  EXPECT_LE(a, 1.0);
}

TEST(Disentanglement, RejectsTooFewVotes) {
  EXPECT_THROW(disentanglement_score(oracle_representation(), FactorSpec{}, 9, 16, Rng(1)), ContractError);
  EXPECT_THROW(disentanglement_score(oracle_representation(), FactorSpec{}, 10, 1, Rng(1)), ContractError);
}

TEST(Traversal, ContinuousSweepValuesAndFixedEntries) {
  const ModelBundle b = small_bundle();
  Rng rng(2);
  const LatentCode base = sample_prior(b.prior, 2, rng);
  const TraversalGrid grid = latent_traversal(b, base, {TraversalTarget::Continuous, 1, -1.0, 1.0, 5});
  EXPECT_EQ(grid.rows, 2u);
  EXPECT_EQ(grid.cols, 5u);
  EXPECT_EQ(grid.image_side, 32u);
  EXPECT_EQ(grid.values, (std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0}));
  ASSERT_EQ(grid.images.size(), 10u);
  const std::size_t cd = b.prior.c_dim;
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t col = 0; col < 5; ++col) {
      const std::size_t row = r * 5 + col;
      EXPECT_EQ(grid.codes.c.at(row * cd + 1), grid.values[col]);
      EXPECT_EQ(grid.codes.c.at(row * cd + 0), base.c.at(r * cd + 0));
      for (std::size_t j = 0; j < b.prior.z_dim; ++j) {
        EXPECT_EQ(grid.codes.z.at(row * b.prior.z_dim + j), base.z.at(r * b.prior.z_dim + j));
      }
    }
  }
}

TEST(Traversal, ImagesMatchDirectGeneration) {
  const ModelBundle b = small_bundle();
  const LatentCode base = prior_mean_code(b.prior);
  const TraversalGrid grid = latent_traversal(b, base, {TraversalTarget::Noise, 3, -2.0, 2.0, 3});
  const Tensor direct = generate(frozen_view(b), grid.codes);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t p = 0; p < 1024; ++p) EXPECT_EQ(grid.images[i][p], direct.at(i * 1024 + p));
  }
}

TEST(Traversal, DiscreteGivesOneImagePerCategory) {
  const ModelBundle b = small_bundle();
  const TraversalGrid grid = latent_traversal(b, prior_mean_code(b.prior), {TraversalTarget::Discrete, 0, 0, 0, 0});
  EXPECT_EQ(grid.cols, b.prior.categories);
  EXPECT_EQ(grid.images.size(), b.prior.categories);
  for (std::size_t c = 0; c < grid.cols; ++c) {
    for (std::size_t k = 0; k < b.prior.categories; ++k) {
      EXPECT_EQ(grid.codes.d.at(c * b.prior.categories + k), k == c ? 1.0 : 0.0);
    }
  }
}

TEST(Traversal, RejectsBadSpec) {
  const ModelBundle b = small_bundle();
  const LatentCode base = prior_mean_code(b.prior);
  EXPECT_THROW(latent_traversal(b, base, {TraversalTarget::Continuous, 2, -1, 1, 5}), ContractError);
  EXPECT_THROW(latent_traversal(b, base, {TraversalTarget::Noise, 0, -1, 1, 1}), ContractError);
}

TEST(PriorMeanCode, Values) {
  const LatentCode code = prior_mean_code(PriorConfig{}, 2);
  for (double v : code.z.values()) EXPECT_EQ(v, 0.0);
  for (double v : code.c.values()) EXPECT_EQ(v, 0.0);
  for (double v : code.d.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(MeanSquaredError, Examples) {
  Rng rng(4);
  const Tensor x = ivg::testing::random_tensor({4, 6}, rng, 0, 1);
  EXPECT_EQ(mean_squared_error(x, x), 0.0);
  const Tensor zeros = Tensor::zeros({2, 2});
  EXPECT_DOUBLE_EQ(mean_squared_error(zeros, Tensor::full({2, 2}, 0.5)), 0.25);
  EXPECT_THROW(mean_squared_error(zeros, Tensor::zeros({4})), ShapeError);
}

TEST(ShapeClusterAccuracy, AtLeastChanceAndOverCorpus) {
  const ModelBundle b = small_bundle();
  const SpriteDataset data{FactorSpec{}};
  const auto res = shape_cluster_accuracy(b, data);
  EXPECT_GE(res.accuracy, 1.0 / 3.0);
  std::size_t total = 0;
  for (const auto& row : res.confusion) total += std::accumulate(row.begin(), row.end(), std::size_t{0});
  EXPECT_EQ(total, 192u);
}

TEST(EvaluateBundle, FiniteAndDeterministic) {
  const ModelBundle b = small_bundle();
  const SpriteDataset data{FactorSpec{}};
  EvalConfig cfg;
  cfg.votes = 20;
  cfg.samples_per_vote = 4;
  cfg.test_elbo_samples = 2;
  cfg.test_batch = 8;
  const MetricsSummary a = evaluate_bundle(b, data, cfg);
  const MetricsSummary c = evaluate_bundle(b, data, cfg);
  EXPECT_EQ(a.cluster_accuracy, c.cluster_accuracy);
  EXPECT_EQ(a.disentanglement_score, c.disentanglement_score);
  EXPECT_EQ(a.reconstruction_mse, c.reconstruction_mse);
  EXPECT_EQ(a.baseline_reconstruction_mse, c.baseline_reconstruction_mse);
  EXPECT_EQ(a.test_elbo, c.test_elbo);
  EXPECT_TRUE(std::isfinite(a.test_elbo));
  EXPECT_GT(a.reconstruction_mse, 0.0);
  EXPECT_NE(a.reconstruction_mse, a.baseline_reconstruction_mse);
}
