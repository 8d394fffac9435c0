#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "expctr/lm/model.hpp"
#include "expctr/numerics/optimizer.hpp"
#include "expctr/rewards/rewards.hpp"

namespace expctr::ppo {

using prompting::TokenId;

struct PpoConfig {
  double beta = 0.05;          // KL penalty coefficient
  double delta = 1.0;          // reward clip bound
  double clip_ratio = 0.2;
  double learning_rate = 1e-3;
  std::size_t epochs_per_batch = 2;
  std::size_t batch_size = 64;
  std::size_t minibatch_size = 64;  // rollouts per optimizer step
  double gae_lambda = 0.95;
  double gamma = 1.0;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  std::size_t max_tokens = 24;  // generation length cap
  double temperature = 1.0;
  std::uint64_t seed = 51;

  void validate() const;
};

struct Rollout {
  std::vector<TokenId> prompt;
  std::vector<TokenId> tokens;  // generated, EOS included when produced
  std::vector<double> old_logprobs;
  std::vector<double> init_logprobs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> advantages;
  std::vector<double> returns;
  double raw_reward = 0.0;
  double normalized_reward = 0.0;
  bool degenerate = false;

  std::size_t length() const noexcept { return tokens.size(); }
  /// Sum of per-token log-ratios between the sampling policy and the initial policy.
  double kl() const;
};

struct RolloutBatch {
  std::vector<Rollout> rollouts;
  rewards::RewardBatch reward_stats;
  std::size_t degenerate = 0;
};

/// Token k gets -beta * (policy - init); the last token also gets R.
/// Throws ValidationError on length mismatch or an empty sequence.
std::vector<double> compose_token_rewards(double terminal_reward, std::span<const double> policy_logprobs,
                                          std::span<const double> init_logprobs, double beta);

struct AdvantageResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation with a zero bootstrap after the last token.
AdvantageResult gae(std::span<const double> rewards, std::span<const double> values, double gamma, double lambda);

/// Rescales advantages over every token in the batch to mean 0 and std 1.
void whiten_advantages(std::vector<Rollout>& rollouts, double std_floor = 1e-8);

/// Everything PPO touches. Only adapters and the value head are trained.
struct Policy {
  lm::BaseLanguageModel* base = nullptr;
  lm::AdapterSet* adapters = nullptr;
  lm::ValueHead* value_head = nullptr;
};

/// Raw reward for rollout `index` given its explanation (EOS removed, never
/// empty). May throw prompting::EmptyExplanationError, which is treated as a
/// degenerate generation.
using RewardFn = std::function<double(std::size_t index, std::span<const TokenId> explanation)>;

/// Generates one rollout per prompt in order, scores, normalizes, composes
/// token rewards and computes whitened advantages.
RolloutBatch collect_rollouts(const Policy& policy, std::span<const std::vector<TokenId>> prompts,
                              const RewardFn& reward_fn, rewards::RewardKind kind, const PpoConfig& cfg,
                              std::mt19937_64& rng);

struct UpdateDiagnostics {
  std::size_t rollouts = 0;
  double mean_raw_reward = 0.0;
  double raw_reward_std = 0.0;
  double norm_min = 0.0;
  double norm_max = 0.0;
  double mean_kl = 0.0;
  double mean_length = 0.0;
  double clip_fraction = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  std::size_t degenerate = 0;
  bool skipped = false;
};

struct LossTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  std::size_t tokens = 0;
  std::size_t clipped = 0;
};

class PpoTrainer {
 public:
  PpoTrainer(Policy policy, const PpoConfig& cfg);

  /// Runs epochs_per_batch passes of clipped-surrogate updates over the
  /// batch. A non-finite loss or gradient restores the adapters, value head
  /// and optimizer to their state before the call and marks it skipped.
  UpdateDiagnostics update(const RolloutBatch& batch);

  /// Accumulates gradients of the token-mean loss over rollouts [begin, end)
  /// into the parameters' grad fields.
  LossTerms accumulate_gradients(const RolloutBatch& batch, std::size_t begin, std::size_t end);

  numerics::ParameterRefs parameters() const { return params_; }
  const numerics::Adam& optimizer() const noexcept { return adam_; }
  numerics::Adam& optimizer() noexcept { return adam_; }
  std::size_t skipped_batches() const noexcept { return skipped_; }
  void set_skipped_batches(std::size_t n) noexcept { skipped_ = n; }
  const PpoConfig& config() const noexcept { return cfg_; }

 private:
  Policy policy_;
  PpoConfig cfg_;
  numerics::ParameterRefs params_;
  numerics::Adam adam_;
  std::size_t skipped_ = 0;
};

}  // namespace expctr::ppo
