#include "expctr/ppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "expctr/error.hpp"
#include "expctr/lm/inference.hpp"
#include "expctr/numerics/kernels.hpp"
#include "expctr/numerics/ops.hpp"
#include "expctr/prompting/prompts.hpp"

namespace expctr::ppo {

namespace ops = numerics;
using numerics::Tensor;
using numerics::Var;

void PpoConfig::validate() const {
  if (!(beta >= 0.0)) throw ValidationError("ppo: beta must be >= 0");
  if (!(delta > 0.0)) throw ValidationError("ppo: delta must be > 0");
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) throw ValidationError("ppo: clip_ratio must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("ppo: gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ValidationError("ppo: gae_lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw ValidationError("ppo: learning_rate must be > 0");
  if (!(value_coef >= 0.0)) throw ValidationError("ppo: value_coef must be >= 0");
  if (epochs_per_batch == 0) throw ValidationError("ppo: epochs_per_batch must be >= 1");
  if (batch_size == 0 || minibatch_size == 0) throw ValidationError("ppo: batch sizes must be >= 1");
  if (max_tokens == 0) throw ValidationError("ppo: max_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw ValidationError("ppo: temperature must be >= 0");
}

double Rollout::kl() const {
  double total = 0.0;
  for (std::size_t k = 0; k < old_logprobs.size(); ++k) total += old_logprobs[k] - init_logprobs[k];
  return total;
}

std::vector<double> compose_token_rewards(double terminal_reward, std::span<const double> policy_logprobs,
                                          std::span<const double> init_logprobs, double beta) {
  if (policy_logprobs.size() != init_logprobs.size()) throw ValidationError("ppo: logprob lists differ in length");
  if (policy_logprobs.empty()) throw ValidationError("ppo: empty token sequence");
  std::vector<double> out(policy_logprobs.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = -beta * (policy_logprobs[k] - init_logprobs[k]);
  out.back() += terminal_reward;
  return out;
}

AdvantageResult gae(std::span<const double> rewards, std::span<const double> values, double gamma, double lambda) {
  if (rewards.size() != values.size()) throw ValidationError("ppo: rewards and values differ in length");
  AdvantageResult out;
  out.advantages.assign(rewards.size(), 0.0);
  out.returns.assign(rewards.size(), 0.0);
  double next_value = 0.0, running = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    const double td = rewards[k] + gamma * next_value - values[k];
    running = td + gamma * lambda * running;
    out.advantages[k] = running;
    out.returns[k] = running + values[k];
    next_value = values[k];
  }
  return out;
}

void whiten_advantages(std::vector<Rollout>& rollouts, double std_floor) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const Rollout& r : rollouts) {
    for (double a : r.advantages) sum += a;
    n += r.advantages.size();
  }
  if (n == 0) return;
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const Rollout& r : rollouts) {
    for (double a : r.advantages) var += (a - mean) * (a - mean);
  }
  const double sd = std::max(std::sqrt(var / static_cast<double>(n)), std_floor);
  for (Rollout& r : rollouts) {
    for (double& a : r.advantages) a = (a - mean) / sd;
  }
}

RolloutBatch collect_rollouts(const Policy& policy, std::span<const std::vector<TokenId>> prompts,
                              const RewardFn& reward_fn, rewards::RewardKind kind, const PpoConfig& cfg,
                              std::mt19937_64& rng) {
  if (prompts.empty()) throw ValidationError("ppo: no prompts to roll out");
  RolloutBatch batch;
  batch.rollouts.resize(prompts.size());
  std::vector<double> raw(prompts.size());
  const lm::GenerationConfig gen_cfg{cfg.max_tokens, cfg.temperature, true};
  std::vector<Tensor> hidden(prompts.size());

  for (std::size_t i = 0; i < prompts.size(); ++i) {
    lm::GenerationResult gen = lm::generate(*policy.base, policy.adapters, prompts[i], gen_cfg, rng);
    Rollout& r = batch.rollouts[i];
    r.prompt = prompts[i];
    r.tokens = std::move(gen.tokens);
    r.old_logprobs = std::move(gen.policy_logprobs);
    r.init_logprobs = std::move(gen.init_logprobs);
    hidden[i] = std::move(gen.hidden);

    const auto explanation = prompting::strip_eos(r.tokens);
    r.degenerate = explanation.empty();
    if (!r.degenerate) {
      try {
        raw[i] = reward_fn(i, explanation);
      } catch (const prompting::EmptyExplanationError&) {
        r.degenerate = true;
      }
    }
    if (r.degenerate) {
      raw[i] = rewards::degenerate_explanation_reward(kind);
      ++batch.degenerate;
    }
    if (!std::isfinite(raw[i])) throw numerics::NonFiniteError("ppo: non-finite raw reward");
    r.raw_reward = raw[i];
  }

  batch.reward_stats = rewards::normalize_clip(raw, cfg.delta, kind);
  const lm::ValueHead& head = *policy.value_head;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    Rollout& r = batch.rollouts[i];
    r.normalized_reward = batch.reward_stats.normalized[i];
    r.rewards = compose_token_rewards(r.normalized_reward, r.old_logprobs, r.init_logprobs, cfg.beta);
    r.values.resize(r.tokens.size());
    double v = 0.0;
    for (std::size_t k = 0; k < r.tokens.size(); ++k) {
      numerics::kernels::affine_row(hidden[i].row(k), head.weight.value, head.bias.value.values(), {&v, 1});
      r.values[k] = v;
    }
    AdvantageResult adv = gae(r.rewards, r.values, cfg.gamma, cfg.gae_lambda);
    r.advantages = std::move(adv.advantages);
    r.returns = std::move(adv.returns);
  }
  whiten_advantages(batch.rollouts);
  return batch;
}

PpoTrainer::PpoTrainer(Policy policy, const PpoConfig& cfg)
    : policy_(policy), cfg_(cfg), params_([&] {
        if (!policy.base || !policy.adapters || !policy.value_head) {
          throw ValidationError("ppo: policy is missing a component");
        }
        auto p = policy.adapters->parameters();
        for (auto* q : policy.value_head->parameters()) p.push_back(q);
        return p;
      }()),
      adam_(params_, {.learning_rate = cfg.learning_rate}) {
  cfg.validate();
  if (!policy.base->frozen()) throw ValidationError("ppo: base model must be frozen before fine-tuning");
}

LossTerms PpoTrainer::accumulate_gradients(const RolloutBatch& batch, std::size_t begin, std::size_t end) {
  LossTerms terms;
  for (std::size_t i = begin; i < end; ++i) terms.tokens += batch.rollouts[i].length();
  if (terms.tokens == 0) return terms;
  const double inv_tokens = 1.0 / static_cast<double>(terms.tokens);
  const double lo = 1.0 - cfg_.clip_ratio, hi = 1.0 + cfg_.clip_ratio;

  for (std::size_t i = begin; i < end; ++i) {
    const Rollout& r = batch.rollouts[i];
    const std::size_t t = r.length();
    std::vector<TokenId> input = r.prompt;
    input.insert(input.end(), r.tokens.begin(), r.tokens.end() - 1);

    numerics::Tape tape;
    const lm::ForwardResult fwd = lm::forward(tape, *policy_.base, policy_.adapters, input, r.prompt.size() - 1);
    const Var new_lp = lm::token_logprobs(fwd.logits, r.tokens);
    const Var ratio = ops::exp(ops::sub(new_lp, tape.constant(Tensor({1, t}, r.old_logprobs))));
    const Var adv = tape.constant(Tensor({1, t}, r.advantages));
    const Var surrogate = ops::minimum(ops::mul(ratio, adv), ops::mul(ops::clamp(ratio, lo, hi), adv));
    const Var policy_loss = ops::scale(ops::sum(surrogate), -inv_tokens);
    const Var v = lm::values(tape, *policy_.value_head, fwd.hidden);
    const Var err = ops::sub(v, tape.constant(Tensor({t, 1}, r.returns)));
    const Var value_loss = ops::scale(ops::sum(ops::square(err)), cfg_.value_coef * inv_tokens);
    const Var loss = ops::add(policy_loss, value_loss);

    const double pl = policy_loss.value().item(), vl = value_loss.value().item();
    if (!std::isfinite(pl) || !std::isfinite(vl)) throw numerics::NonFiniteError("ppo: non-finite loss");
    terms.policy_loss += pl;
    terms.value_loss += vl;
    for (double x : ratio.value().values()) {
      if (x < lo || x > hi) ++terms.clipped;
    }
    tape.backward(loss);
  }
  return terms;
}

UpdateDiagnostics PpoTrainer::update(const RolloutBatch& batch) {
  UpdateDiagnostics d;
  const auto& rs = batch.rollouts;
  d.rollouts = rs.size();
  d.degenerate = batch.degenerate;
  d.mean_raw_reward = batch.reward_stats.mean;
  d.raw_reward_std = batch.reward_stats.std;
  if (!batch.reward_stats.normalized.empty()) {
    const auto [mn, mx] = std::minmax_element(batch.reward_stats.normalized.begin(),
                                              batch.reward_stats.normalized.end());
    d.norm_min = *mn;
    d.norm_max = *mx;
  }
  if (rs.empty()) return d;
  double kl = 0.0, len = 0.0;
  for (const Rollout& r : rs) {
    kl += r.kl();
    len += static_cast<double>(r.length());
  }
  d.mean_kl = kl / static_cast<double>(rs.size());
  d.mean_length = len / static_cast<double>(rs.size());

  std::vector<Tensor> saved;
  for (auto* p : params_) saved.push_back(p->value);
  const numerics::OptimizerState saved_state = adam_.state();

  std::size_t tokens = 0, clipped = 0, steps = 0;
  try {
    for (std::size_t epoch = 0; epoch < cfg_.epochs_per_batch; ++epoch) {
      for (std::size_t begin = 0; begin < rs.size(); begin += cfg_.minibatch_size) {
        const std::size_t end = std::min(rs.size(), begin + cfg_.minibatch_size);
        adam_.zero_grad();
        const LossTerms terms = accumulate_gradients(batch, begin, end);
        if (cfg_.max_grad_norm > 0.0) {
          const double norm = adam_.clip_grad_norm(cfg_.max_grad_norm);
          if (!std::isfinite(norm)) throw numerics::NonFiniteError("ppo: non-finite gradient norm");
        }
        adam_.step();
        d.policy_loss += terms.policy_loss;
        d.value_loss += terms.value_loss;
        tokens += terms.tokens;
        clipped += terms.clipped;
        ++steps;
      }
    }
  } catch (const numerics::NonFiniteError&) {
    for (std::size_t k = 0; k < params_.size(); ++k) params_[k]->value = saved[k];
    adam_.set_state(saved_state);
    adam_.zero_grad();
    ++skipped_;
    d.skipped = true;
    d.policy_loss = d.value_loss = d.clip_fraction = 0.0;
    return d;
  }
  d.policy_loss /= static_cast<double>(steps);
  d.value_loss /= static_cast<double>(steps);
  d.clip_fraction = tokens ? static_cast<double>(clipped) / static_cast<double>(tokens) : 0.0;
  return d;
}

}  // namespace expctr::ppo
