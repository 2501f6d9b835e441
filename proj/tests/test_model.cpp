#include <gtest/gtest.h>

#include "infovaegan/model.hpp"
#include "support.hpp"

using namespace ivg;
using ivg::testing::random_tensor;

namespace {

ModelBundle small_bundle(std::uint64_t seed = 1, std::size_t pixels = 1024) {
  ArchitectureConfig arch;
  arch.pixels = pixels;
  arch.hidden = 32;
  Rng rng(seed);
  return init_bundle(arch, PriorConfig{}, rng);
}

}  // namespace

TEST(Bundle, ExtentsFollowPriorAndImage) {
  const ModelBundle b = small_bundle();
  const PriorConfig p;
  EXPECT_EQ(b.generator.input_extent(), p.z_dim + p.categories + p.c_dim);
  EXPECT_EQ(b.pixels(), 1024u);
  EXPECT_EQ(b.encoder_u.output_extent(), p.categories + 2 * p.c_dim);
  EXPECT_EQ(b.encoder_z.output_extent(), 2 * p.z_dim);
  EXPECT_EQ(b.critic.output_extent(), 1u);
  EXPECT_EQ(b.generator.head, OutputHead::Sigmoid);
  EXPECT_EQ(b.critic.head, OutputHead::Linear);
  EXPECT_NO_THROW(b.validate());
  ModelBundle broken = b;
  broken.prior.z_dim = 3;
  EXPECT_THROW(broken.validate(), ContractError);
}

TEST(Generate, ShapeAndRange) {
  const ModelBundle b = small_bundle();
  Rng rng(2);
  const LatentCode code = sample_prior(b.prior, 8, rng);
  const Tensor x = generate(frozen_view(b), code);
  ASSERT_EQ(x.shape(), (Shape{8, 1024}));
  for (double v : x.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Generate, IdenticalCodesGiveIdenticalRows) {
  const ModelBundle b = small_bundle();
  Rng rng(3);
  const LatentCode one = sample_prior(b.prior, 1, rng);
  const LatentCode two{broadcast_to(one.z, {2, b.prior.z_dim}), broadcast_to(one.d, {2, b.prior.categories}),
                       broadcast_to(one.c, {2, b.prior.c_dim})};
  const Tensor x = generate(frozen_view(b), two);
  for (std::size_t i = 0; i < 1024; ++i) EXPECT_EQ(x.at(i), x.at(1024 + i));
}

TEST(Generate, GradientWithRespectToContinuousCode) {
  const ModelBundle b = small_bundle(4, 16);
  Rng rng(4);
  const LatentCode code = sample_prior(b.prior, 3, rng);
  auto f = [&](const Tensor& c) { return sum(generate(frozen_view(b), {code.z, code.d, c})); };
  EXPECT_LT(finite_difference_check(f, code.c), 1e-6);
}

TEST(Generate, RejectsMismatchedCode) {
  const ModelBundle b = small_bundle();
  Rng rng(5);
  LatentCode code = sample_prior(b.prior, 2, rng);
  code.c = Tensor::zeros({2, 3});
  EXPECT_THROW(generate(frozen_view(b), code), ShapeError);
}

TEST(GeneratorInput, OrderIsNoiseDiscreteContinuous) {
  const LatentCode code{Tensor({1, 2}, {1, 2}), Tensor({1, 3}, {3, 4, 5}), Tensor({1, 1}, {6})};
  const Tensor in = generator_input(code);
  EXPECT_EQ(std::vector<double>(in.values().begin(), in.values().end()), (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(Encode, Shapes) {
  const ModelBundle b = small_bundle();
  Rng rng(6);
  const EncoderOutput e = encode(frozen_view(b), random_tensor({8, 1024}, rng, 0, 1));
  EXPECT_EQ(e.z_post.mean().shape(), (Shape{8, b.prior.z_dim}));
  EXPECT_EQ(e.z_post.log_var().shape(), (Shape{8, b.prior.z_dim}));
  EXPECT_EQ(e.c_post.mean().shape(), (Shape{8, b.prior.c_dim}));
  EXPECT_EQ(e.d_post.logits().shape(), (Shape{8, b.prior.categories}));
  EXPECT_THROW(encode(frozen_view(b), Tensor::zeros({8, 1000})), ShapeError);
}

TEST(Encode, IdenticalInputsIdenticalPosteriors) {
  const ModelBundle b = small_bundle();
  Rng rng(7);
  const Tensor x = random_tensor({1, 1024}, rng, 0, 1);
  const EncoderOutput e = encode(frozen_view(b), broadcast_to(x, {2, 1024}));
  for (std::size_t j = 0; j < b.prior.z_dim; ++j) EXPECT_EQ(e.z_post.mean().at(j), e.z_post.mean().at(b.prior.z_dim + j));
  for (std::size_t j = 0; j < b.prior.categories; ++j) {
    EXPECT_EQ(e.d_post.logits().at(j), e.d_post.logits().at(b.prior.categories + j));
  }
}

TEST(Encode, SinglePixelPerturbationChangesOutputs) {
  const ModelBundle b = small_bundle();
  Rng rng(8);
  const Tensor x = random_tensor({1, 1024}, rng, 0, 1);
  std::vector<double> v(x.values().begin(), x.values().end());
  v[517] += 0.5;
  const EncoderOutput a = encode(frozen_view(b), x);
  const EncoderOutput c = encode(frozen_view(b), Tensor({1, 1024}, v));
  double diff = 0.0;
  for (std::size_t j = 0; j < b.prior.z_dim; ++j) diff += std::abs(a.z_post.mean().at(j) - c.z_post.mean().at(j));
  for (std::size_t j = 0; j < b.prior.categories; ++j) {
    diff += std::abs(a.d_post.logits().at(j) - c.d_post.logits().at(j));
  }
  EXPECT_GT(diff, 1e-12);
}

TEST(Encode, RowPermutationEquivariant) {
  const ModelBundle b = small_bundle(9, 20);
  Rng rng(9);
  const Tensor x = random_tensor({3, 20}, rng, 0, 1);
  std::vector<double> swapped(x.values().begin(), x.values().end());
  std::swap_ranges(swapped.begin(), swapped.begin() + 20, swapped.begin() + 40);
  const Tensor y = criticize(frozen_view(b), x);
  const Tensor ys = criticize(frozen_view(b), Tensor({3, 20}, swapped));
  EXPECT_EQ(y.at(0), ys.at(2));
  EXPECT_EQ(y.at(2), ys.at(0));
  EXPECT_EQ(y.at(1), ys.at(1));
}

TEST(Criticize, ZeroCriticAndShape) {
  ModelBundle b = small_bundle();
  for (auto& l : b.critic.layers) l.weights = Tensor::zeros(l.weights.shape());
  Rng rng(10);
  const Tensor s = criticize(frozen_view(b), random_tensor({5, 1024}, rng));
  ASSERT_EQ(s.shape(), (Shape{5, 1}));
  for (double v : s.values()) EXPECT_EQ(v, 0.0);
}

TEST(Criticize, LinearCriticIsHomogeneous) {
  ModelBundle b = small_bundle(11, 6);
  b.critic.layers = {DenseLayer{Tensor::full({6, 1}, 1.0), Tensor::zeros({1})}};
  Rng rng(11);
  const Tensor x = random_tensor({4, 6}, rng);
  const Tensor y = criticize(frozen_view(b), x);
  const Tensor y2 = criticize(frozen_view(b), mul(x, Tensor::scalar(2.0)));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(y2.at(i), 2.0 * y.at(i));
}

TEST(Reconstruct, MeanModeDeterministicAndInRange) {
  const ModelBundle b = small_bundle();
  Rng rng(12), r1(1), r2(2);
  const Tensor x = random_tensor({4, 1024}, rng, 0, 1);
  const Tensor a = reconstruct(frozen_view(b), x, r1, ReconstructionMode::Mean);
  const Tensor c = reconstruct(frozen_view(b), x, r2, ReconstructionMode::Mean);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.at(i), c.at(i));
    EXPECT_GT(a.at(i), 0.0);
    EXPECT_LT(a.at(i), 1.0);
  }
  const Tensor s = reconstruct(frozen_view(b), x, r1, ReconstructionMode::Sample);
  EXPECT_EQ(s.shape(), x.shape());
}

TEST(View, TrainableNetworksBecomeLeaves) {
  const ModelBundle b = small_bundle();
  Graph g;
  const BundleView v = make_view(b, &g, {.generator = true});
  EXPECT_TRUE(v.generator.trainable);
  EXPECT_FALSE(v.critic.trainable);
  EXPECT_EQ(v.generator.leaves().size(), 2 * b.generator.layers.size());
  EXPECT_THROW(make_view(b, nullptr, {.critic = true}), ContractError);
}
