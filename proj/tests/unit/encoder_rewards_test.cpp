#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expctr/encoder/text_encoder.hpp"
#include "expctr/error.hpp"
#include "expctr/rewards/rewards.hpp"

namespace expctr {
namespace {

using prompting::TokenId;

TEST(TextEncoder, OrderAndRepetitionInvariantExactly) {
  encoder::TextEncoder enc({.vocab = 30, .dim = 8, .seed = 4});
  const std::vector<TokenId> a = {3, 17, 17, 29, 0};
  std::vector<TokenId> shuffled = a;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::vector<TokenId> doubled = a;
  doubled.insert(doubled.end(), a.begin(), a.end());
  const auto z = enc.encode(a);
  EXPECT_EQ(z.size(), 8u);
  EXPECT_EQ(enc.encode(shuffled), z);
  EXPECT_EQ(enc.encode(doubled), z);
  EXPECT_NE(enc.encode(std::vector<TokenId>{3, 17, 29, 0}), z);
}

TEST(TextEncoder, MatchesExplicitMeanThenAffine) {
  encoder::TextEncoder enc({.vocab = 12, .dim = 5, .seed = 9});
  const std::vector<TokenId> t = {1, 4, 4, 11};
  std::vector<double> pooled(5, 0.0);
  for (TokenId id : t) {
    for (std::size_t c = 0; c < 5; ++c) pooled[c] += enc.embedding.value(id, c) / 4.0;
  }
  const auto z = enc.encode(t);
  for (std::size_t c = 0; c < 5; ++c) {
    double expect = enc.bias.value[c];
    for (std::size_t k = 0; k < 5; ++k) expect += pooled[k] * enc.weight.value(k, c);
    EXPECT_NEAR(z[c], expect, 1e-12);
  }
}

TEST(TextEncoder, RejectsEmptyAndUnknownAndIsFrozen) {
  encoder::TextEncoder enc({.vocab = 10, .dim = 4});
  EXPECT_THROW(enc.encode(std::vector<TokenId>{}), ValidationError);
  EXPECT_THROW(enc.encode(std::vector<TokenId>{10}), ValidationError);
  for (auto* p : enc.parameters()) EXPECT_FALSE(p->trainable);
  EXPECT_EQ(enc.zero(), std::vector<double>(4, 0.0));
}

TEST(Rewards, LcValues) {
  EXPECT_NEAR(rewards::lc_reward(0.9, 1), 0.9, 1e-15);
  EXPECT_EQ(rewards::lc_reward(0.5, 1), 0.5);
  EXPECT_EQ(rewards::lc_reward(0.0, 0), 1.0);
  EXPECT_EQ(rewards::lc_reward(1.0, 0), 0.0);
  double prev_pos = -1.0, prev_neg = 2.0;
  for (double s = 0.01; s < 1.0; s += 0.01) {
    EXPECT_GT(rewards::lc_reward(s, 1), prev_pos);
    EXPECT_LT(rewards::lc_reward(s, 0), prev_neg);
    prev_pos = rewards::lc_reward(s, 1);
    prev_neg = rewards::lc_reward(s, 0);
  }
  EXPECT_THROW(rewards::lc_reward(0.5, 2), ValidationError);
  EXPECT_THROW(rewards::lc_reward(1.5, 1), ValidationError);
}

TEST(Rewards, IcValues) {
  EXPECT_NEAR(rewards::ic_reward(1, 0.8, 0.5), 1.1, 1e-15);
  EXPECT_EQ(rewards::ic_reward(0, 0.3, 0.3), 1.0 - 0.3);
  const double eps = 1e-9;
  EXPECT_NEAR(rewards::ic_reward(1, 1.0 - eps, eps), 2.0, 1e-8);
  // Text that worsens the prediction still earns the deviation term.
  EXPECT_NEAR(rewards::ic_reward(1, 0.4, 0.6), 1.0 - 0.6 + 0.2, 1e-15);
  // The signed variant penalises it instead.
  EXPECT_NEAR(rewards::ic_reward(1, 0.4, 0.6, true), 1.0 - 0.6 - 0.2, 1e-15);
  EXPECT_NEAR(rewards::ic_reward(1, 0.8, 0.5, true), 1.1, 1e-15);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double r = rewards::ic_reward(k % 2, unit(rng), unit(rng));
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 2.0);
  }
}

TEST(Rewards, DegenerateFloor) {
  EXPECT_EQ(rewards::degenerate_explanation_reward(rewards::RewardKind::kLc), 0.0);
  EXPECT_EQ(rewards::degenerate_explanation_reward(rewards::RewardKind::kIc), 0.0);
}

TEST(Rewards, KindNames) {
  EXPECT_EQ(rewards::parse_reward_kind("lc"), rewards::RewardKind::kLc);
  EXPECT_EQ(rewards::to_string(rewards::RewardKind::kIc), "ic");
  EXPECT_THROW(rewards::parse_reward_kind("xx"), ValidationError);
}

TEST(NormalizeClip, WorkedExamples) {
  EXPECT_EQ(rewards::normalize_clip({0.3, 0.3, 0.3}, 1.0).normalized, (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(rewards::normalize_clip({0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1}, 1.0).normalized,
            std::vector<double>(7, 0.0));
  const auto two = rewards::normalize_clip({0.0, 1.0}, 1.0);
  EXPECT_EQ(two.normalized, (std::vector<double>{-1.0, 1.0}));
  EXPECT_EQ(two.mean, 0.5);
  EXPECT_EQ(two.std, 0.5);
  const auto outlier = rewards::normalize_clip({0.0, 0.0, 10.0}, 1.0);
  EXPECT_EQ(outlier.normalized[2], 1.0);
  // (0 - 10/3) / (10 sqrt(2)/3) = -1/sqrt(2), inside the bound.
  EXPECT_NEAR(outlier.normalized[0], -1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_THROW(rewards::normalize_clip({}, 1.0), ValidationError);
  EXPECT_THROW(rewards::normalize_clip({1.0}, 0.0), ValidationError);
}

TEST(NormalizeClip, StandardisesAndIsAffineInvariant) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> dist(0.4, 0.2);
  std::vector<double> raw(64);
  for (double& r : raw) r = dist(rng);
  const auto batch = rewards::normalize_clip(raw, 100.0, rewards::RewardKind::kIc);
  EXPECT_EQ(batch.kind, rewards::RewardKind::kIc);
  ASSERT_EQ(batch.normalized.size(), raw.size());
  double mean = 0.0, var = 0.0;
  for (double v : batch.normalized) mean += v;
  mean /= 64.0;
  for (double v : batch.normalized) var += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 1e-9);
  EXPECT_NEAR(std::sqrt(var / 64.0), 1.0, 1e-9);

  std::vector<double> shifted = raw, scaled = raw;
  for (double& r : shifted) r += 3.25;
  for (double& r : scaled) r *= 7.5;
  const auto a = rewards::normalize_clip(raw, 1.5).normalized;
  const auto b = rewards::normalize_clip(shifted, 1.5).normalized;
  const auto c = rewards::normalize_clip(scaled, 1.5).normalized;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_NEAR(a[k], b[k], 1e-9);
    EXPECT_NEAR(a[k], c[k], 1e-9);
    EXPECT_LE(std::abs(a[k]), 1.5);
  }
}

}  // namespace
}  // namespace expctr
