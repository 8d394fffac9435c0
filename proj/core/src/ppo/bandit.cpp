#include "expctr/ppo/bandit.hpp"

#include <cmath>

#include "expctr/lm/inference.hpp"
#include "expctr/numerics/kernels.hpp"
#include "expctr/prompting/vocabulary.hpp"

namespace expctr::ppo {

namespace {

// Id 1 doubles as the end-of-sequence token, so choosing b ends the episode
// with an empty explanation and takes the zero floor reward.
constexpr TokenId kRewarded = 0;
static_assert(prompting::token::kEos == 1);

double rewarded_probability(const lm::BaseLanguageModel& base, const lm::AdapterSet& adapters) {
  lm::InferenceSession session(base, &adapters);
  session.append(kRewarded);
  std::vector<double> probs(2);
  numerics::kernels::softmax_row(session.logits(), probs);
  return probs[kRewarded];
}

}  // namespace

BanditResult run_bandit(const PpoConfig& cfg, std::uint64_t seed, std::size_t updates, double threshold) {
  lm::ModelConfig model_cfg;
  model_cfg.vocab = 2;
  model_cfg.d_model = 16;
  model_cfg.layers = 1;
  model_cfg.heads = 2;
  model_cfg.context = 4;
  model_cfg.output_std = 0.3;
  model_cfg.seed = seed;
  lm::BaseLanguageModel base(model_cfg);
  base.set_trainable(false);
  lm::AdapterSet adapters(model_cfg, {.seed = seed + 1});
  lm::ValueHead head(model_cfg.d_model, seed + 2);

  PpoConfig run_cfg = cfg;
  run_cfg.max_tokens = 1;
  PpoTrainer trainer({&base, &adapters, &head}, run_cfg);
  const std::vector<std::vector<TokenId>> prompts(run_cfg.batch_size, std::vector<TokenId>{kRewarded});
  const RewardFn reward = [](std::size_t, std::span<const TokenId> explanation) {
    return explanation.front() == kRewarded ? 1.0 : 0.0;
  };
  std::mt19937_64 rng(seed + 3);

  BanditResult result;
  result.initial_probability = rewarded_probability(base, adapters);
  for (std::size_t u = 1; u <= updates; ++u) {
    const RolloutBatch batch = collect_rollouts({&base, &adapters, &head}, prompts, reward,
                                                rewards::RewardKind::kLc, run_cfg, rng);
    trainer.update(batch);
    const double p = rewarded_probability(base, adapters);
    result.probability.push_back(p);
    if (result.first_above == 0 && p > threshold) result.first_above = u;
  }
  return result;
}

}  // namespace expctr::ppo
