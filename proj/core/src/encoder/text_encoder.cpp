#include "expctr/encoder/text_encoder.hpp"

#include <cmath>
#include <random>

#include "expctr/error.hpp"
#include "expctr/numerics/kernels.hpp"
#include "expctr/numerics/ops.hpp"

namespace expctr::encoder {

TextEncoder::TextEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
  if (cfg.vocab == 0 || cfg.dim == 0) throw ValidationError("encoder: vocab and dim must be positive");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Tensor emb({cfg.vocab, cfg.dim});
  for (double& v : emb.values()) v = unit(rng);
  Tensor w({cfg.dim, cfg.dim});
  const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  for (double& v : w.values()) v = sd * unit(rng);
  embedding = Parameter("encoder.embedding", std::move(emb), false);
  weight = Parameter("encoder.weight", std::move(w), false);
  bias = Parameter("encoder.bias", Tensor({1, cfg.dim}), false);
}

Tensor TextEncoder::mixture(std::span<const TokenId> tokens) const {
  if (tokens.empty()) throw ValidationError("encoder: empty token sequence");
  Tensor counts({1, cfg_.vocab});
  for (TokenId t : tokens) {
    if (t >= cfg_.vocab) throw ValidationError("encoder: token " + std::to_string(t) + " outside vocabulary");
    counts[t] += 1.0;
  }
  const double n = static_cast<double>(tokens.size());
  for (double& c : counts.values()) c /= n;
  return counts;
}

std::vector<double> TextEncoder::encode(std::span<const TokenId> tokens) const {
  const Tensor mix = mixture(tokens);
  std::vector<double> pooled(cfg_.dim), out(cfg_.dim);
  numerics::kernels::affine_row(mix.values(), embedding.value, {}, pooled);
  numerics::kernels::affine_row(pooled, weight.value, bias.value.values(), out);
  return out;
}

numerics::Var TextEncoder::encode(numerics::Tape& tape, std::span<const TokenId> tokens) {
  const numerics::Var mix = tape.constant(mixture(tokens));
  const numerics::Var pooled = numerics::matmul(mix, tape.parameter(embedding));
  return numerics::affine(pooled, tape.parameter(weight), tape.parameter(bias));
}

}  // namespace expctr::encoder
