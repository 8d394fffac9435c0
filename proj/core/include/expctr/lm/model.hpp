#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "expctr/numerics/tape.hpp"
#include "expctr/prompting/vocabulary.hpp"

namespace expctr::lm {

using numerics::Parameter;
using numerics::ParameterRefs;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;
using prompting::TokenId;

struct ModelConfig {
  std::size_t vocab = 0;
  std::size_t d_model = 32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_multiplier = 4;
  std::size_t context = 256;
  double embedding_std = 0.02;
  double output_std = 0.02;
  std::uint64_t seed = 11;

  void validate() const;
};

struct AdapterConfig {
  std::size_t rank = 4;
  double alpha = 8.0;
  std::uint64_t seed = 12;
};

struct DecoderBlock {
  Parameter ln1_gain, ln1_bias;
  Parameter wq, bq, wk, wv, bv, wo, bo;  // key bias omitted: softmax ignores it
  Parameter ln2_gain, ln2_bias;
  Parameter w1, b1, w2, b2;
};

/// Decoder-only transformer with pre-norm blocks and learned positions.
class BaseLanguageModel {
 public:
  explicit BaseLanguageModel(const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterRefs parameters();
  void set_trainable(bool trainable);
  bool frozen() const;

  Parameter token_embedding;
  Parameter position_embedding;
  std::vector<DecoderBlock> blocks;
  Parameter final_gain, final_bias;
  Parameter output_weight, output_bias;

 private:
  ModelConfig cfg_;
};

/// Low-rank deltas on the query and value projections of every block:
/// W x + (alpha / r) * (x A) B with B starting at zero.
struct BlockAdapters {
  Parameter q_down, q_up, v_down, v_up;
};

class AdapterSet {
 public:
  AdapterSet(const ModelConfig& model, const AdapterConfig& cfg);

  const AdapterConfig& config() const noexcept { return cfg_; }
  double scale() const noexcept { return cfg_.alpha / static_cast<double>(cfg_.rank); }
  ParameterRefs parameters();
  /// True when every up-projection is exactly zero.
  bool is_identity() const;
  void reset();

  std::vector<BlockAdapters> blocks;

 private:
  AdapterConfig cfg_;
  std::size_t d_model_;
};

/// Scalar state value read from the final hidden row.
struct ValueHead {
  explicit ValueHead(std::size_t d_model, std::uint64_t seed = 13);
  ParameterRefs parameters() { return {&weight, &bias}; }

  Parameter weight;  // [d x 1]
  Parameter bias;    // [1 x 1]
};

struct ForwardResult {
  Var logits;  // rows [first_row, n) of next-token logits
  Var hidden;  // matching rows of the final normalized hidden state
};

/// Full-sequence forward on the tape. Only rows from `first_row` on are
/// projected to the vocabulary.
ForwardResult forward(Tape& tape, BaseLanguageModel& model, AdapterSet* adapters, std::span<const TokenId> tokens,
                      std::size_t first_row = 0);

/// Log-probability of targets[k] under row k of `logits`.
Var token_logprobs(const Var& logits, std::span<const TokenId> targets);

/// Values for each row of `hidden`, detached from the trunk.
Var values(Tape& tape, ValueHead& head, const Var& hidden);

}  // namespace expctr::lm
