#include "expctr/lm/inference.hpp"

#include <algorithm>
#include <cmath>

#include "expctr/error.hpp"
#include "expctr/numerics/kernels.hpp"

namespace expctr::lm {

namespace kernels = numerics::kernels;

namespace {

std::span<const double> row_of(const Parameter& p, std::size_t r) { return p.value.row(r); }

void add_into(std::span<double> x, std::span<const double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = x[i] + y[i];
}

}  // namespace

InferenceSession::InferenceSession(const BaseLanguageModel& model, const AdapterSet* adapters)
    : model_(model), adapters_(adapters), d_(model.config().d_model) {
  const ModelConfig& cfg = model.config();
  if (adapters && adapters->blocks.size() != cfg.layers) throw ValidationError("session: adapter depth mismatch");
  keys_.assign(cfg.layers, std::vector<double>(cfg.context * d_));
  values_.assign(cfg.layers, std::vector<double>(cfg.context * d_));
  for (auto* buf : {&x_, &h_, &q_, &k_, &v_, &up_, &att_, &proj_, &final_}) buf->resize(d_);
  down_.resize(adapters ? adapters->config().rank : 0);
  ff_.resize(d_ * cfg.ffn_multiplier);
  logits_.resize(cfg.vocab);
}

void InferenceSession::append(TokenId token, bool want_logits) {
  const ModelConfig& cfg = model_.config();
  if (token >= cfg.vocab) throw ValidationError("session: token " + std::to_string(token) + " outside vocabulary");
  if (length_ >= cfg.context) throw ValidationError("session: context window exhausted");
  const std::size_t pos = length_;

  auto te = row_of(model_.token_embedding, token);
  auto pe = row_of(model_.position_embedding, pos);
  for (std::size_t i = 0; i < d_; ++i) x_[i] = te[i] + pe[i];

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const DecoderBlock& b = model_.blocks[l];
    kernels::layer_norm_row(x_, b.ln1_gain.value.values(), b.ln1_bias.value.values(), kernels::kLayerNormEps, h_, {},
                            nullptr);
    kernels::affine_row(h_, b.wq.value, b.bq.value.values(), q_);
    kernels::affine_row(h_, b.wk.value, {}, k_);
    kernels::affine_row(h_, b.wv.value, b.bv.value.values(), v_);
    if (adapters_) {
      const BlockAdapters& a = adapters_->blocks[l];
      const double s = adapters_->scale();
      for (auto [down, up, target] : {std::tuple{&a.q_down, &a.q_up, &q_}, std::tuple{&a.v_down, &a.v_up, &v_}}) {
        kernels::affine_row(h_, down->value, {}, down_);
        kernels::affine_row(down_, up->value, {}, up_);
        for (std::size_t i = 0; i < d_; ++i) (*target)[i] = (*target)[i] + s * up_[i];
      }
    }
    std::copy(k_.begin(), k_.end(), keys_[l].begin() + static_cast<std::ptrdiff_t>(pos * d_));
    std::copy(v_.begin(), v_.end(), values_[l].begin() + static_cast<std::ptrdiff_t>(pos * d_));
    kernels::attention_row(q_, keys_[l].data(), values_[l].data(), pos + 1, d_, cfg.heads, att_, {});
    kernels::affine_row(att_, b.wo.value, b.bo.value.values(), proj_);
    add_into(x_, proj_);
    kernels::layer_norm_row(x_, b.ln2_gain.value.values(), b.ln2_bias.value.values(), kernels::kLayerNormEps, h_, {},
                            nullptr);
    kernels::affine_row(h_, b.w1.value, b.b1.value.values(), ff_);
    for (double& f : ff_) f = kernels::gelu(f);
    kernels::affine_row(ff_, b.w2.value, b.b2.value.values(), proj_);
    add_into(x_, proj_);
  }
  ++length_;
  hidden_ready_ = false;
  if (want_logits) project();
}

void InferenceSession::project() {
  kernels::layer_norm_row(x_, model_.final_gain.value.values(), model_.final_bias.value.values(),
                          kernels::kLayerNormEps, final_, {}, nullptr);
  kernels::affine_row(final_, model_.output_weight.value, model_.output_bias.value.values(), logits_);
  hidden_ready_ = true;
}

void InferenceSession::append_all(std::span<const TokenId> tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) append(tokens[i], i + 1 == tokens.size());
}

namespace {

double logprob_of(std::span<const double> logits, TokenId token, std::vector<double>& scratch) {
  scratch.resize(logits.size());
  kernels::log_softmax_row(logits, scratch);
  return scratch[token];
}

TokenId sample_token(std::span<const double> logits, double temperature, std::mt19937_64& rng,
                     std::vector<double>& scratch) {
  if (temperature == 0.0) {
    return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  scratch.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scratch[i] = logits[i] / temperature;
  kernels::softmax_row(scratch, scratch);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    acc += scratch[i];
    if (u < acc) return static_cast<TokenId>(i);
  }
  // Rounding left u above the final cumulative sum; take the last token with mass.
  for (std::size_t i = scratch.size(); i-- > 0;) {
    if (scratch[i] > 0.0) return static_cast<TokenId>(i);
  }
  return 0;
}

}  // namespace

GenerationResult generate(const BaseLanguageModel& model, const AdapterSet* adapters,
                          std::span<const TokenId> prompt, const GenerationConfig& cfg, std::mt19937_64& rng) {
  if (prompt.empty()) throw ValidationError("generate: empty prompt");
  if (!(cfg.temperature >= 0.0) || !std::isfinite(cfg.temperature))
    throw ValidationError("generate: temperature must be finite and non-negative");
  if (cfg.max_tokens == 0) throw ValidationError("generate: max_tokens must be positive");
  if (prompt.size() + cfg.max_tokens > model.config().context)
    throw ValidationError("generate: prompt of " + std::to_string(prompt.size()) + " tokens leaves no room for " +
                          std::to_string(cfg.max_tokens) + " generated tokens");

  InferenceSession policy(model, adapters);
  InferenceSession init(model, nullptr);
  policy.append_all(prompt);
  if (adapters) init.append_all(prompt);

  GenerationResult out;
  std::vector<double> scratch;
  std::vector<double> hidden_rows;
  const std::size_t d = model.config().d_model;
  for (std::size_t step = 0; step < cfg.max_tokens; ++step) {
    const auto lp = policy.logits();
    if (cfg.record_hidden) hidden_rows.insert(hidden_rows.end(), policy.hidden().begin(), policy.hidden().end());
    const TokenId t = sample_token(lp, cfg.temperature, rng, scratch);
    const double pol = logprob_of(lp, t, scratch);
    out.tokens.push_back(t);
    out.policy_logprobs.push_back(pol);
    out.init_logprobs.push_back(adapters ? logprob_of(init.logits(), t, scratch) : pol);
    if (t == prompting::token::kEos) break;
    if (step + 1 < cfg.max_tokens) {
      policy.append(t);
      if (adapters) init.append(t);
    }
  }
  out.truncated = out.tokens.back() != prompting::token::kEos;
  if (cfg.record_hidden) out.hidden = Tensor({out.tokens.size(), d}, std::move(hidden_rows));
  return out;
}

std::vector<double> logprobs(const BaseLanguageModel& model, const AdapterSet* adapters,
                             std::span<const TokenId> prompt, std::span<const TokenId> continuation) {
  if (prompt.empty()) throw ValidationError("logprobs: empty prompt");
  const std::size_t vocab = model.config().vocab;
  for (TokenId t : continuation) {
    if (t >= vocab) throw ValidationError("logprobs: token " + std::to_string(t) + " outside vocabulary");
  }
  if (prompt.size() + continuation.size() > model.config().context + 1)
    throw ValidationError("logprobs: sequence exceeds context");
  InferenceSession session(model, adapters);
  session.append_all(prompt);
  std::vector<double> out, scratch;
  out.reserve(continuation.size());
  for (std::size_t k = 0; k < continuation.size(); ++k) {
    out.push_back(logprob_of(session.logits(), continuation[k], scratch));
    if (k + 1 < continuation.size()) session.append(continuation[k]);
  }
  return out;
}

double two_way_softmax(double logit_yes, double logit_no, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("score: temperature must be positive");
  if (!std::isfinite(logit_yes) || !std::isfinite(logit_no))
    throw numerics::NonFiniteError("score: non-finite YES/NO logits");
  // Shifting by the larger logit leaves one term at exp(0) = 1.
  const double gap = (logit_yes - logit_no) / temperature;
  const double ea = gap >= 0.0 ? 1.0 : std::exp(gap);
  const double eb = gap >= 0.0 ? std::exp(-gap) : 1.0;
  return ea / (ea + eb);
}

double score_yes(const BaseLanguageModel& model, std::span<const TokenId> scorer_prompt, double temperature) {
  if (scorer_prompt.empty()) throw ValidationError("score_yes: empty prompt");
  InferenceSession session(model, nullptr);
  session.append_all(scorer_prompt);
  const auto l = session.logits();
  return two_way_softmax(l[prompting::token::kYes], l[prompting::token::kNo], temperature);
}

}  // namespace expctr::lm
