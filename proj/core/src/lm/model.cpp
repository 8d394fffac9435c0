#include "expctr/lm/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "expctr/error.hpp"
#include "expctr/numerics/ops.hpp"

namespace expctr::lm {

namespace ops = numerics;

void ModelConfig::validate() const {
  if (vocab < 2) throw ValidationError("model: vocab must hold at least two tokens");
  if (d_model == 0 || layers == 0 || heads == 0 || ffn_multiplier == 0 || context == 0)
    throw ValidationError("model: sizes must be positive");
  if (d_model % heads != 0) throw ValidationError("model: d_model must be divisible by heads");
  if (!(embedding_std > 0.0) || !(output_std > 0.0)) throw ValidationError("model: init scales must be positive");
}

namespace {

Tensor gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double sd) {
  std::normal_distribution<double> dist(0.0, sd);
  Tensor t({rows, cols});
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Parameter make(const std::string& name, Tensor value) { return Parameter(name, std::move(value), true); }

Parameter ones(const std::string& name, std::size_t n) { return make(name, Tensor({1, n}, 1.0)); }
Parameter zeros(const std::string& name, std::size_t n) { return make(name, Tensor({1, n}, 0.0)); }

}  // namespace

BaseLanguageModel::BaseLanguageModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model, f = cfg.d_model * cfg.ffn_multiplier;
  std::mt19937_64 rng(cfg.seed);
  const double sd_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double sd_f = 1.0 / std::sqrt(static_cast<double>(f));

  token_embedding = make("tok_emb", gaussian(rng, cfg.vocab, d, cfg.embedding_std));
  position_embedding = make("pos_emb", gaussian(rng, cfg.context, d, cfg.embedding_std));
  blocks.resize(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    DecoderBlock& b = blocks[l];
    b.ln1_gain = ones(p + "ln1.gain", d);
    b.ln1_bias = zeros(p + "ln1.bias", d);
    b.wq = make(p + "wq", gaussian(rng, d, d, sd_d));
    b.bq = zeros(p + "bq", d);
    b.wk = make(p + "wk", gaussian(rng, d, d, sd_d));
    b.wv = make(p + "wv", gaussian(rng, d, d, sd_d));
    b.bv = zeros(p + "bv", d);
    b.wo = make(p + "wo", gaussian(rng, d, d, sd_d));
    b.bo = zeros(p + "bo", d);
    b.ln2_gain = ones(p + "ln2.gain", d);
    b.ln2_bias = zeros(p + "ln2.bias", d);
    b.w1 = make(p + "w1", gaussian(rng, d, f, sd_d));
    b.b1 = zeros(p + "b1", f);
    b.w2 = make(p + "w2", gaussian(rng, f, d, sd_f));
    b.b2 = zeros(p + "b2", d);
  }
  final_gain = ones("final.gain", d);
  final_bias = zeros("final.bias", d);
  output_weight = make("out.weight", gaussian(rng, d, cfg.vocab, cfg.output_std));
  output_bias = zeros("out.bias", cfg.vocab);
}

ParameterRefs BaseLanguageModel::parameters() {
  ParameterRefs out = {&token_embedding, &position_embedding};
  for (DecoderBlock& b : blocks) {
    for (Parameter* p : {&b.ln1_gain, &b.ln1_bias, &b.wq, &b.bq, &b.wk, &b.wv, &b.bv, &b.wo, &b.bo,
                         &b.ln2_gain, &b.ln2_bias, &b.w1, &b.b1, &b.w2, &b.b2})
      out.push_back(p);
  }
  for (Parameter* p : {&final_gain, &final_bias, &output_weight, &output_bias}) out.push_back(p);
  return out;
}

void BaseLanguageModel::set_trainable(bool trainable) {
  for (Parameter* p : parameters()) {
    p->trainable = trainable;
    if (!trainable) p->grad = Tensor();
  }
}

bool BaseLanguageModel::frozen() const {
  return !token_embedding.trainable && !output_weight.trainable;
}

AdapterSet::AdapterSet(const ModelConfig& model, const AdapterConfig& cfg) : cfg_(cfg), d_model_(model.d_model) {
  if (cfg.rank == 0 || cfg.rank >= model.d_model)
    throw ValidationError("adapters: rank must lie in [1, d_model)");
  if (!(cfg.alpha > 0.0)) throw ValidationError("adapters: alpha must be positive");
  blocks.resize(model.layers);
  reset();
}

void AdapterSet::reset() {
  std::mt19937_64 rng(cfg_.seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d_model_));
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::string p = "adapter" + std::to_string(l) + ".";
    BlockAdapters& a = blocks[l];
    a.q_down = make(p + "q_down", gaussian(rng, d_model_, cfg_.rank, sd));
    a.q_up = make(p + "q_up", Tensor({cfg_.rank, d_model_}));
    a.v_down = make(p + "v_down", gaussian(rng, d_model_, cfg_.rank, sd));
    a.v_up = make(p + "v_up", Tensor({cfg_.rank, d_model_}));
  }
}

ParameterRefs AdapterSet::parameters() {
  ParameterRefs out;
  for (BlockAdapters& a : blocks) {
    for (Parameter* p : {&a.q_down, &a.q_up, &a.v_down, &a.v_up}) out.push_back(p);
  }
  return out;
}

bool AdapterSet::is_identity() const {
  for (const BlockAdapters& a : blocks) {
    for (const Parameter* p : {&a.q_up, &a.v_up}) {
      for (double v : p->value.values()) {
        if (v != 0.0) return false;
      }
    }
  }
  return true;
}

ValueHead::ValueHead(std::size_t d_model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  weight = make("value.weight", gaussian(rng, d_model, 1, 0.01));
  bias = make("value.bias", Tensor({1, 1}));
}

namespace {

Var adapted(Tape& tape, const Var& x, const Var& base, Parameter& down, Parameter& up, double scale) {
  const Var delta = ops::matmul(ops::matmul(x, tape.parameter(down)), tape.parameter(up));
  return ops::add(base, ops::scale(delta, scale));
}

}  // namespace

ForwardResult forward(Tape& tape, BaseLanguageModel& model, AdapterSet* adapters, std::span<const TokenId> tokens,
                      std::size_t first_row) {
  const ModelConfig& cfg = model.config();
  if (tokens.empty()) throw ValidationError("forward: empty token sequence");
  if (tokens.size() > cfg.context)
    throw ValidationError("forward: sequence of " + std::to_string(tokens.size()) + " exceeds context " +
                          std::to_string(cfg.context));
  if (first_row >= tokens.size()) throw ValidationError("forward: first_row beyond sequence");
  std::vector<std::size_t> ids(tokens.begin(), tokens.end());
  std::vector<std::size_t> positions(tokens.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;

  Var x = ops::add(ops::embedding(tape.parameter(model.token_embedding), ids),
                   ops::embedding(tape.parameter(model.position_embedding), positions));
  for (std::size_t l = 0; l < model.blocks.size(); ++l) {
    DecoderBlock& b = model.blocks[l];
    const Var h = ops::layer_norm(x, tape.parameter(b.ln1_gain), tape.parameter(b.ln1_bias));
    Var q = ops::affine(h, tape.parameter(b.wq), tape.parameter(b.bq));
    const Var k = ops::matmul(h, tape.parameter(b.wk));
    Var v = ops::affine(h, tape.parameter(b.wv), tape.parameter(b.bv));
    if (adapters) {
      BlockAdapters& a = adapters->blocks.at(l);
      q = adapted(tape, h, q, a.q_down, a.q_up, adapters->scale());
      v = adapted(tape, h, v, a.v_down, a.v_up, adapters->scale());
    }
    const Var att = ops::causal_attention(q, k, v, cfg.heads);
    x = ops::add(x, ops::affine(att, tape.parameter(b.wo), tape.parameter(b.bo)));
    const Var h2 = ops::layer_norm(x, tape.parameter(b.ln2_gain), tape.parameter(b.ln2_bias));
    const Var ff = ops::gelu(ops::affine(h2, tape.parameter(b.w1), tape.parameter(b.b1)));
    x = ops::add(x, ops::affine(ff, tape.parameter(b.w2), tape.parameter(b.b2)));
  }
  if (first_row > 0) x = ops::slice_rows(x, first_row, tokens.size() - first_row);
  ForwardResult out;
  out.hidden = ops::layer_norm(x, tape.parameter(model.final_gain), tape.parameter(model.final_bias));
  out.logits = ops::affine(out.hidden, tape.parameter(model.output_weight), tape.parameter(model.output_bias));
  return out;
}

Var token_logprobs(const Var& logits, std::span<const TokenId> targets) {
  if (targets.size() != logits.rows()) throw ValidationError("token_logprobs: one target per row required");
  std::vector<std::size_t> rows(targets.size()), cols(targets.begin(), targets.end());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return ops::pick(ops::log_softmax_rows(logits), rows, cols);
}

Var values(Tape& tape, ValueHead& head, const Var& hidden) {
  const Var detached = tape.constant(hidden.value());
  return ops::affine(detached, tape.parameter(head.weight), tape.parameter(head.bias));
}

}  // namespace expctr::lm
