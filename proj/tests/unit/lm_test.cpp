#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expctr/error.hpp"
#include "expctr/lm/inference.hpp"
#include "expctr/numerics/grad_check.hpp"
#include "expctr/numerics/ops.hpp"

namespace expctr::lm {
namespace {

ModelConfig tiny_config(std::size_t vocab = 24) {
  ModelConfig cfg;
  cfg.vocab = vocab;
  cfg.d_model = 16;
  cfg.layers = 2;
  cfg.heads = 4;
  cfg.context = 40;
  cfg.seed = 3;
  // Larger output scale so that logits differ visibly between positions.
  cfg.output_std = 0.5;
  return cfg;
}

void randomize(AdapterSet& adapters, std::uint64_t seed, double sd = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sd);
  for (Parameter* p : adapters.parameters()) {
    for (double& v : p->value.values()) v = dist(rng);
  }
}

std::vector<TokenId> random_tokens(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TokenId> pick(0, static_cast<TokenId>(vocab - 1));
  std::vector<TokenId> t(n);
  for (auto& x : t) x = pick(rng);
  return t;
}

Tensor tape_logits(BaseLanguageModel& m, AdapterSet* a, const std::vector<TokenId>& tokens) {
  Tape tape;
  return forward(tape, m, a, tokens).logits.value();
}

Tensor session_logits(const BaseLanguageModel& m, const AdapterSet* a, const std::vector<TokenId>& tokens) {
  InferenceSession s(m, a);
  Tensor out({tokens.size(), m.config().vocab});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    s.append(tokens[i]);
    std::copy(s.logits().begin(), s.logits().end(), out.row(i).begin());
  }
  return out;
}

TEST(LanguageModel, CachedPathMatchesTapeBitForBit) {
  BaseLanguageModel m(tiny_config());
  AdapterSet a(m.config(), AdapterConfig{});
  randomize(a, 9);
  const auto tokens = random_tokens(30, 24, 1);
  EXPECT_EQ(tape_logits(m, nullptr, tokens), session_logits(m, nullptr, tokens));
  EXPECT_EQ(tape_logits(m, &a, tokens), session_logits(m, &a, tokens));
}

TEST(LanguageModel, ZeroInitAdaptersLeaveLogitsUnchanged) {
  BaseLanguageModel m(tiny_config());
  AdapterSet a(m.config(), AdapterConfig{});
  ASSERT_TRUE(a.is_identity());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto tokens = random_tokens(25, 24, seed);
    const Tensor base = tape_logits(m, nullptr, tokens);
    const Tensor adapted = tape_logits(m, &a, tokens);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) max_diff = std::max(max_diff, std::abs(base[i] - adapted[i]));
    EXPECT_EQ(max_diff, 0.0);
  }
}

TEST(LanguageModel, Causality) {
  BaseLanguageModel m(tiny_config());
  auto tokens = random_tokens(20, 24, 4);
  const Tensor before = tape_logits(m, nullptr, tokens);
  tokens[12] = (tokens[12] + 1) % 24;
  const Tensor after = tape_logits(m, nullptr, tokens);
  for (std::size_t r = 0; r < 12; ++r) {
    for (std::size_t c = 0; c < 24; ++c) EXPECT_EQ(before(r, c), after(r, c));
  }
  bool changed = false;
  for (std::size_t c = 0; c < 24; ++c) changed |= before(12, c) != after(12, c);
  EXPECT_TRUE(changed);
}

TEST(LanguageModel, UntrainedLogitsAreNearUniform) {
  ModelConfig cfg = tiny_config();
  cfg.output_std = 0.02;
  BaseLanguageModel m(cfg);
  const auto tokens = random_tokens(30, 24, 2);
  Tape tape;
  const auto out = forward(tape, m, nullptr, tokens, 0);
  std::vector<std::size_t> targets(tokens.begin() + 1, tokens.end());
  targets.push_back(0);
  const double loss = numerics::cross_entropy(out.logits, targets).value().item();
  EXPECT_NEAR(loss, std::log(24.0), 0.05 * std::log(24.0));
}

TEST(Generation, GreedyIsDeterministic) {
  BaseLanguageModel m(tiny_config());
  const auto prompt = random_tokens(6, 24, 5);
  GenerationConfig g;
  g.temperature = 0.0;
  g.max_tokens = 12;
  std::mt19937_64 r1(1), r2(99);
  const auto a = generate(m, nullptr, prompt, g, r1);
  const auto b = generate(m, nullptr, prompt, g, r2);
  EXPECT_EQ(a.tokens, b.tokens);
  // Greedy picks the argmax at each step.
  InferenceSession s(m, nullptr);
  s.append_all(prompt);
  for (TokenId t : a.tokens) {
    const auto l = s.logits();
    EXPECT_EQ(t, static_cast<TokenId>(std::max_element(l.begin(), l.end()) - l.begin()));
    s.append(t);
  }
}

TEST(Generation, IdentityAdaptersSampleLikeBase) {
  BaseLanguageModel m(tiny_config());
  AdapterSet a(m.config(), AdapterConfig{});
  const auto prompt = random_tokens(5, 24, 6);
  GenerationConfig g;
  g.max_tokens = 20;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 r1(seed), r2(seed);
    const auto base = generate(m, nullptr, prompt, g, r1);
    const auto adapted = generate(m, &a, prompt, g, r2);
    EXPECT_EQ(base.tokens, adapted.tokens);
    EXPECT_EQ(adapted.policy_logprobs, adapted.init_logprobs);
  }
}

TEST(Generation, LogprobsMatchTeacherForcing) {
  BaseLanguageModel m(tiny_config());
  AdapterSet a(m.config(), AdapterConfig{});
  randomize(a, 2);
  const auto prompt = random_tokens(7, 24, 8);
  GenerationConfig g;
  g.max_tokens = 16;
  g.record_hidden = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto res = generate(m, &a, prompt, g, rng);
    ASSERT_EQ(res.policy_logprobs.size(), res.tokens.size());
    ASSERT_EQ(res.init_logprobs.size(), res.tokens.size());
    EXPECT_EQ(res.truncated, res.tokens.back() != prompting::token::kEos);
    EXPECT_EQ(logprobs(m, &a, prompt, res.tokens), res.policy_logprobs);
    EXPECT_EQ(logprobs(m, nullptr, prompt, res.tokens), res.init_logprobs);
    for (double lp : res.policy_logprobs) EXPECT_LE(lp, 0.0);

    // Tape re-evaluation over prompt + continuation.
    std::vector<TokenId> seq(prompt);
    seq.insert(seq.end(), res.tokens.begin(), res.tokens.end() - 1);
    Tape tape;
    const auto fwd = forward(tape, m, &a, seq, prompt.size() - 1);
    const auto lp = token_logprobs(fwd.logits, res.tokens).value();
    for (std::size_t k = 0; k < res.tokens.size(); ++k) EXPECT_NEAR(lp[k], res.policy_logprobs[k], 1e-10);
    EXPECT_EQ(fwd.hidden.value(), res.hidden);
  }
}

TEST(Logprobs, SingleTokenAndProbabilityAxioms) {
  BaseLanguageModel m(tiny_config());
  const auto prompt = random_tokens(9, 24, 10);
  InferenceSession s(m, nullptr);
  s.append_all(prompt);
  const auto l = s.logits();
  double z = 0.0;
  const double mx = *std::max_element(l.begin(), l.end());
  for (double v : l) z += std::exp(v - mx);
  for (TokenId t = 0; t < 24; ++t) {
    const double direct = l[t] - mx - std::log(z);
    EXPECT_NEAR(logprobs(m, nullptr, prompt, std::vector<TokenId>{t})[0], direct, 1e-12);
  }
  const auto cont = random_tokens(6, 24, 11);
  double total = 0.0;
  for (double v : logprobs(m, nullptr, prompt, cont)) total += v;
  EXPECT_LE(std::exp(total), 1.0);
  EXPECT_GE(std::exp(total), 0.0);
  EXPECT_THROW(logprobs(m, nullptr, prompt, std::vector<TokenId>{24}), ValidationError);
}

TEST(ScoreYes, TwoWaySoftmaxCases) {
  for (double t : {0.1, 1.0, 7.0}) EXPECT_EQ(two_way_softmax(1.3, 1.3, t), 0.5);
  // 1 / (1 + e^-2)
  EXPECT_NEAR(two_way_softmax(2.0, 0.0, 1.0), 0.8807970779778823, 1e-15);
  EXPECT_EQ(two_way_softmax(2.0, 0.0, 1e-300), 1.0);
  EXPECT_EQ(two_way_softmax(0.0, 2.0, 1e-300), 0.0);
  EXPECT_NEAR(two_way_softmax(5.0, 3.0, 1.0), two_way_softmax(105.0, 103.0, 1.0), 1e-15);
  double prev = 0.0;
  for (double gap = -5.0; gap <= 5.0; gap += 0.25) {
    const double s = two_way_softmax(gap, 0.0, 2.0);
    EXPECT_GT(s, prev);
    prev = s;
  }
  EXPECT_THROW(two_way_softmax(1.0, 0.0, 0.0), ValidationError);
  EXPECT_THROW(two_way_softmax(NAN, 0.0, 1.0), numerics::NonFiniteError);
}

TEST(ScoreYes, ReadsPromptEndLogits) {
  BaseLanguageModel m(tiny_config());
  const auto prompt = random_tokens(8, 24, 12);
  InferenceSession s(m, nullptr);
  s.append_all(prompt);
  const double expected =
      1.0 / (1.0 + std::exp(s.logits()[prompting::token::kNo] - s.logits()[prompting::token::kYes]));
  EXPECT_NEAR(score_yes(m, prompt, 1.0), expected, 1e-12);
}

TEST(GradCheck, PolicyBlockAndValueHead) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ModelConfig cfg = tiny_config(12);
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.context = 10;
    cfg.seed = seed;
    BaseLanguageModel m(cfg);
    AdapterSet a(cfg, AdapterConfig{2, 4.0, seed + 100});
    randomize(a, seed + 7);
    ValueHead vh(cfg.d_model, seed);
    const auto tokens = random_tokens(7, 12, seed + 20);
    const std::vector<TokenId> targets(tokens.begin() + 3, tokens.end());
    std::vector<TokenId> inputs(tokens.begin(), tokens.end() - 1);
    numerics::GraphBuilder policy = [&](Tape& tape) {
      const auto fwd = forward(tape, m, &a, inputs, 2);
      return numerics::sum(token_logprobs(fwd.logits, targets));
    };
    ParameterRefs params = m.parameters();
    for (Parameter* p : a.parameters()) params.push_back(p);
    const auto res = numerics::grad_check(policy, params, 1e-5);
    EXPECT_LT(res.max_relative_error, 1e-4) << res.worst_parameter;
    EXPECT_GT(res.elements_checked, 500u);

    // The value head sees a detached trunk, so only its own parameters are checked.
    numerics::GraphBuilder value = [&](Tape& tape) {
      const auto fwd = forward(tape, m, &a, inputs, 2);
      return values(tape, vh, fwd.hidden);
    };
    const auto vres = numerics::grad_check(value, vh.parameters(), 1e-5);
    EXPECT_LT(vres.max_relative_error, 1e-4) << vres.worst_parameter;
    EXPECT_EQ(vres.elements_checked, cfg.d_model + 1);
  }
}

TEST(GradCheck, FrozenBaseOnlyMovesAdapters) {
  BaseLanguageModel m(tiny_config());
  m.set_trainable(false);
  AdapterSet a(m.config(), AdapterConfig{});
  const auto tokens = random_tokens(10, 24, 13);
  Tape tape;
  const auto fwd = forward(tape, m, &a, tokens, 5);
  const std::vector<TokenId> targets(tokens.begin() + 5, tokens.end());
  tape.backward(numerics::sum(token_logprobs(fwd.logits, targets)));
  EXPECT_TRUE(m.token_embedding.grad.size() == 0 || m.token_embedding.grad.values()[0] == 0.0);
  double up_norm = 0.0;
  for (const auto& b : a.blocks) {
    for (double g : b.q_up.grad.values()) up_norm += g * g;
  }
  EXPECT_GT(up_norm, 0.0);
}

}  // namespace
}  // namespace expctr::lm
