#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "expctr/numerics/tape.hpp"
#include "expctr/prompting/vocabulary.hpp"

namespace expctr::encoder {

using numerics::Parameter;
using numerics::Tensor;
using prompting::TokenId;

struct EncoderConfig {
  std::size_t vocab = 0;
  std::size_t dim = 32;
  std::uint64_t seed = 31;
};

/// Frozen bag-of-embeddings encoder: z = (mean of token rows) W + b.
/// The mean is formed from token counts in id order, so it does not depend
/// on token order or on uniform repetition.
class TextEncoder {
 public:
  explicit TextEncoder(const EncoderConfig& cfg);

  std::size_t dim() const noexcept { return cfg_.dim; }
  std::size_t vocab() const noexcept { return cfg_.vocab; }

  /// Throws ValidationError on an empty sequence or unknown id.
  std::vector<double> encode(std::span<const TokenId> tokens) const;
  std::vector<double> zero() const { return std::vector<double>(cfg_.dim, 0.0); }

  /// Same computation recorded on a tape; used for gradient checks.
  numerics::Var encode(numerics::Tape& tape, std::span<const TokenId> tokens);

  numerics::ParameterRefs parameters() { return {&embedding, &weight, &bias}; }

  Parameter embedding;  // [vocab x dim]
  Parameter weight;     // [dim x dim]
  Parameter bias;       // [1 x dim]

 private:
  Tensor mixture(std::span<const TokenId> tokens) const;

  EncoderConfig cfg_;
};

}  // namespace expctr::encoder
