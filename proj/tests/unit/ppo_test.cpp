#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expctr/error.hpp"
#include "expctr/lm/inference.hpp"
#include "expctr/ppo/bandit.hpp"
#include "expctr/ppo/ppo.hpp"
#include "expctr/prompting/vocabulary.hpp"

namespace expctr::ppo {
namespace {

using numerics::Tensor;

TEST(ComposeTokenRewards, WorkedExamples) {
  const std::vector<double> policy = {-1.0, -0.5, -2.0}, init = {-1.2, -0.7, -2.2};
  const auto r = compose_token_rewards(1.0, policy, init, 0.05);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_NEAR(r[0], -0.01, 1e-15);
  EXPECT_NEAR(r[1], -0.01, 1e-15);
  EXPECT_NEAR(r[2], 0.99, 1e-15);
  EXPECT_EQ(compose_token_rewards(0.7, policy, init, 0.0), (std::vector<double>{0.0, 0.0, 0.7}));
  EXPECT_EQ(compose_token_rewards(0.7, policy, policy, 0.05), (std::vector<double>{0.0, 0.0, 0.7}));
  EXPECT_THROW(compose_token_rewards(1.0, policy, std::vector<double>{1.0}, 0.05), ValidationError);
}

// Independent oracle: A_k = sum_l (gamma lambda)^l delta_{k+l}.
std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v, double g, double l) {
  const std::size_t n = r.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double weight = 1.0;
    for (std::size_t j = k; j < n; ++j) {
      const double next = j + 1 < n ? v[j + 1] : 0.0;
      out[k] += weight * (r[j] + g * next - v[j]);
      weight *= g * l;
    }
  }
  return out;
}

TEST(Gae, LimitsAndOracle) {
  const std::vector<double> r = {0.1, -0.2, 0.3, 1.0}, zero(4, 0.0);
  const auto mc = gae(r, zero, 1.0, 1.0);
  EXPECT_NEAR(mc.advantages[0], 1.2, 1e-15);
  EXPECT_NEAR(mc.advantages[1], 1.1, 1e-15);
  EXPECT_NEAR(mc.advantages[2], 1.3, 1e-15);
  EXPECT_NEAR(mc.advantages[3], 1.0, 1e-15);

  const std::vector<double> v = {0.5, 0.4, -0.1, 0.2};
  const auto td = gae(r, v, 0.9, 0.0);
  for (std::size_t k = 0; k < 4; ++k) {
    const double next = k + 1 < 4 ? v[k + 1] : 0.0;
    EXPECT_NEAR(td.advantages[k], r[k] + 0.9 * next - v[k], 1e-15);
    EXPECT_NEAR(td.returns[k], td.advantages[k] + v[k], 1e-15);
  }

  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + trial % 9;
    std::vector<double> rr(n), vv(n);
    for (auto& x : rr) x = dist(rng);
    for (auto& x : vv) x = dist(rng);
    const double g = 0.5 + 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double l = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto got = gae(rr, vv, g, l);
    const auto expect = gae_oracle(rr, vv, g, l);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(got.advantages[k], expect[k], 1e-10);
  }
}

TEST(Gae, WhiteningStandardises) {
  std::vector<Rollout> rs(3);
  rs[0].advantages = {1.0, 2.0};
  rs[1].advantages = {-3.0};
  rs[2].advantages = {0.5, 0.5, 4.0};
  whiten_advantages(rs);
  double sum = 0.0, sq = 0.0;
  for (const auto& r : rs) {
    for (double a : r.advantages) {
      sum += a;
      sq += a * a;
    }
  }
  EXPECT_NEAR(sum / 6.0, 0.0, 1e-12);
  EXPECT_NEAR(sq / 6.0, 1.0, 1e-12);
}

struct Fixture {
  prompting::Vocabulary vocab{2, 1};
  lm::ModelConfig cfg = [] {
    lm::ModelConfig c;
    c.vocab = 20;
    c.d_model = 16;
    c.layers = 2;
    c.heads = 2;
    c.context = 40;
    c.output_std = 0.5;
    c.seed = 8;
    return c;
  }();
  lm::BaseLanguageModel base{cfg};
  lm::AdapterSet adapters{cfg, {}};
  lm::ValueHead head{cfg.d_model, 3};
  std::vector<std::vector<prompting::TokenId>> prompts;

  Fixture() {
    base.set_trainable(false);
    for (prompting::TokenId t = 0; t < 8; ++t) prompts.push_back({prompting::token::kBos, 14u + t % 4, 5});
  }
  Policy policy() { return {&base, &adapters, &head}; }
  std::vector<Tensor> base_values() {
    std::vector<Tensor> out;
    for (auto* p : base.parameters()) out.push_back(p->value);
    return out;
  }
};

double length_reward(std::size_t, std::span<const prompting::TokenId> e) {
  return std::min(1.0, static_cast<double>(e.size()) / 10.0);
}

PpoConfig small_ppo() {
  PpoConfig c;
  c.batch_size = 8;
  c.minibatch_size = 4;
  c.max_tokens = 10;
  return c;
}

TEST(CollectRollouts, ShapeRangeAndDeterminism) {
  Fixture f;
  const PpoConfig cfg = small_ppo();
  std::mt19937_64 rng1(5), rng2(5);
  const auto a = collect_rollouts(f.policy(), f.prompts, length_reward, rewards::RewardKind::kLc, cfg, rng1);
  const auto b = collect_rollouts(f.policy(), f.prompts, length_reward, rewards::RewardKind::kLc, cfg, rng2);
  ASSERT_EQ(a.rollouts.size(), f.prompts.size());
  for (std::size_t i = 0; i < a.rollouts.size(); ++i) {
    const Rollout& r = a.rollouts[i];
    EXPECT_EQ(r.tokens, b.rollouts[i].tokens);
    EXPECT_EQ(r.advantages, b.rollouts[i].advantages);
    EXPECT_GE(r.raw_reward, 0.0);
    EXPECT_LE(r.raw_reward, 1.0);
    EXPECT_LE(std::abs(r.normalized_reward), cfg.delta);
    EXPECT_EQ(r.rewards.size(), r.length());
    EXPECT_EQ(r.values.size(), r.length());
    EXPECT_EQ(r.advantages.size(), r.length());
    EXPECT_EQ(r.returns.size(), r.length());
    EXPECT_EQ(r.old_logprobs.size(), r.length());
    for (double x : r.advantages) EXPECT_TRUE(std::isfinite(x));
    if (r.degenerate) EXPECT_EQ(r.raw_reward, 0.0);
  }
}

TEST(PpoUpdate, ZeroInitHasNoKlAndNoClipping) {
  Fixture f;
  const PpoConfig cfg = small_ppo();
  std::mt19937_64 rng(6);
  const auto batch = collect_rollouts(f.policy(), f.prompts, length_reward, rewards::RewardKind::kLc, cfg, rng);
  for (const Rollout& r : batch.rollouts) {
    EXPECT_EQ(r.old_logprobs, r.init_logprobs);
    for (std::size_t k = 0; k + 1 < r.length(); ++k) EXPECT_EQ(r.rewards[k], 0.0);
    EXPECT_EQ(r.rewards.back(), r.normalized_reward);
  }
  PpoConfig one_pass = cfg;
  one_pass.epochs_per_batch = 1;
  one_pass.minibatch_size = 8;
  PpoTrainer trainer(f.policy(), one_pass);
  const auto d = trainer.update(batch);
  EXPECT_EQ(d.mean_kl, 0.0);
  EXPECT_EQ(d.clip_fraction, 0.0);
  EXPECT_FALSE(d.skipped);
}

TEST(PpoUpdate, ZeroAdvantagesGiveZeroAdapterGradient) {
  Fixture f;
  std::mt19937_64 rng(7);
  // Move the adapters off zero so the surrogate has a non-trivial gradient path.
  for (auto* p : f.adapters.parameters()) {
    for (double& v : p->value.values()) v = std::normal_distribution<double>(0.0, 0.2)(rng);
  }
  auto batch = collect_rollouts(f.policy(), f.prompts, length_reward, rewards::RewardKind::kLc, small_ppo(), rng);
  for (auto& r : batch.rollouts) std::fill(r.advantages.begin(), r.advantages.end(), 0.0);
  PpoTrainer trainer(f.policy(), small_ppo());
  trainer.optimizer().zero_grad();
  trainer.accumulate_gradients(batch, 0, batch.rollouts.size());
  for (auto* p : f.adapters.parameters()) {
    for (double g : p->grad.values()) EXPECT_EQ(g, 0.0);
  }
}

TEST(PpoUpdate, OnlyAdaptersAndValueHeadMove) {
  Fixture f;
  const auto before = f.base_values();
  const Tensor head_before = f.head.weight.value;
  PpoTrainer trainer(f.policy(), small_ppo());
  std::mt19937_64 rng(9);
  for (int u = 0; u < 3; ++u) {
    const auto batch = collect_rollouts(f.policy(), f.prompts, length_reward, rewards::RewardKind::kLc,
                                        small_ppo(), rng);
    EXPECT_FALSE(trainer.update(batch).skipped);
  }
  EXPECT_EQ(f.base_values(), before);
  EXPECT_FALSE(f.adapters.is_identity());
  EXPECT_NE(f.head.weight.value, head_before);
}

TEST(PpoUpdate, NonFiniteBatchIsSkippedAndRolledBack) {
  Fixture f;
  PpoTrainer trainer(f.policy(), small_ppo());
  std::mt19937_64 rng(10);
  auto batch = collect_rollouts(f.policy(), f.prompts, length_reward, rewards::RewardKind::kLc, small_ppo(), rng);
  trainer.update(batch);
  std::vector<Tensor> saved;
  for (auto* p : trainer.parameters()) saved.push_back(p->value);
  const auto state = trainer.optimizer().state().step;
  batch.rollouts.back().advantages.back() = std::nan("");
  const auto d = trainer.update(batch);
  EXPECT_TRUE(d.skipped);
  EXPECT_EQ(trainer.skipped_batches(), 1u);
  EXPECT_EQ(trainer.optimizer().state().step, state);
  for (std::size_t k = 0; k < saved.size(); ++k) EXPECT_EQ(trainer.parameters()[k]->value, saved[k]);
}

TEST(PpoUpdate, RequiresFrozenBase) {
  Fixture f;
  f.base.set_trainable(true);
  EXPECT_THROW(PpoTrainer(f.policy(), small_ppo()), ValidationError);
}

TEST(PpoConfigTest, Validation) {
  PpoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.clip_ratio = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.beta = -0.1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.delta = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Bandit, ReachesRewardedTokenUnderDefaults) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto result = run_bandit(PpoConfig{}, seed, 200);
    EXPECT_GT(result.first_above, 0u) << "seed " << seed << " final p=" << result.probability.back();
    EXPECT_GT(result.probability.back(), 0.9) << "seed " << seed;
  }
}

}  // namespace
}  // namespace expctr::ppo
