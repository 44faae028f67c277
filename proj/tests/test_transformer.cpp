#include <gtest/gtest.h>

#include <random>

#include "cura/transformer.hpp"

namespace cura {
namespace {

ModelConfig mini_config(int head_width = 0) {
  ModelConfig c;
  c.layers = 2;
  c.hidden = 32;
  c.heads = 4;
  c.ffn = 64;
  c.max_len = 24;
  c.head_width = head_width;
  return c;
}

// Flattened view of every scalar so a test can poke individual parameters.
std::vector<double*> flatten(EncoderParams<double>& p) {
  std::vector<double*> out;
  p.for_each([&](const std::string&, auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
  });
  return out;
}

double loss_of(const Encoder<double>& enc, const std::vector<int>& ids, int pos, double y, double w) {
  return weighted_bce(enc.logit(ids, pos), y, w);
}

void gradient_check(int head_width) {
  const auto config = mini_config(head_width);
  const int vocab = 50;
  std::mt19937_64 rng(123);
  // Wider init than training so activations are far from linear.
  auto params = EncoderParams<double>::random(config, vocab, 9);
  params.for_each([&](const std::string&, auto& m) { m *= 10.0; });
  Encoder<double> enc(config, params);

  for (int input = 0; input < 5; ++input) {
    const int n = 6 + input * 3;
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (auto& id : ids) id = std::uniform_int_distribution<int>(0, vocab - 1)(rng);
    const int pos = 1;
    const double y = input % 2;
    const double w = 0.3 + input;

    ForwardCache<double> cache;
    const double z = enc.logit(ids, pos, cache);
    auto grads = EncoderParams<double>::zeros(config, vocab);
    enc.backward(cache, w * (sigmoid(z) - y), grads);

    auto pflat = flatten(enc.params());
    auto gflat = flatten(grads);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < gflat.size(); ++i)
      if (std::abs(*gflat[i]) > 1e-6) candidates.push_back(i);
    ASSERT_GE(candidates.size(), 10u);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    for (std::size_t k = 0; k < 10; ++k) {
      const auto i = candidates[k];
      const double saved = *pflat[i];
      const double h = 1e-5;
      *pflat[i] = saved + h;
      const double up = loss_of(enc, ids, pos, y, w);
      *pflat[i] = saved - h;
      const double down = loss_of(enc, ids, pos, y, w);
      *pflat[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = *gflat[i];
      const double rel = std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic));
      EXPECT_LE(rel, 1e-3) << "param " << i << " analytic " << analytic << " numeric " << numeric;
    }
  }
}

TEST(Transformer, GradientMatchesCentralDifferences) { gradient_check(0); }

TEST(Transformer, GradientMatchesWithPoolerHead) { gradient_check(8); }

TEST(Transformer, LogitIsDeterministic) {
  const auto config = mini_config();
  Encoder<float> enc(config, EncoderParams<float>::random(config, 30, 1));
  const std::vector<int> ids{1, 2, 3, 4, 5};
  EXPECT_EQ(enc.logit(ids, 1), enc.logit(ids, 1));
}

TEST(Transformer, RejectsBadInputs) {
  const auto config = mini_config();
  Encoder<float> enc(config, EncoderParams<float>::random(config, 30, 1));
  EXPECT_THROW(enc.logit(std::vector<int>{}, 0), std::invalid_argument);
  EXPECT_THROW(enc.logit(std::vector<int>{1, 2}, 2), std::invalid_argument);
  EXPECT_THROW(enc.logit(std::vector<int>{1, 99}, 0), std::out_of_range);
  EXPECT_THROW(enc.logit(std::vector<int>(25, 1), 0), std::invalid_argument);
}

TEST(Transformer, CastPreservesValues) {
  const auto config = mini_config(4);
  const auto p = EncoderParams<double>::random(config, 20, 3);
  const auto back = p.cast<float>().cast<double>();
  EXPECT_TRUE(p.token_embedding.isApprox(back.token_embedding, 1e-6));
  EXPECT_TRUE(p.layers[1].w2.isApprox(back.layers[1].w2, 1e-6));
  EXPECT_EQ(p.parameter_count(), back.parameter_count());
}

TEST(Transformer, WeightedBceMatchesDefinition) {
  for (double z : {-8.0, -2.0, 0.0, 0.7, 6.0}) {
    const double p = 1.0 / (1.0 + std::exp(-z));
    EXPECT_NEAR(weighted_bce(z, 1.0, 2.0), -2.0 * std::log(p), 1e-9);
    EXPECT_NEAR(weighted_bce(z, 0.0, 0.5), -0.5 * std::log1p(-p), 1e-9);
  }
  // Saturated logits stay finite: softplus(z) ~ z for large z.
  EXPECT_NEAR(weighted_bce(200.0, 0.0, 1.0), 200.0, 1e-9);
  EXPECT_NEAR(weighted_bce(-200.0, 1.0, 1.0), 200.0, 1e-9);
}

}  // namespace
}  // namespace cura
