#pragma once

#include <random>
#include <span>
#include <vector>

#include "expctr/lm/model.hpp"

namespace expctr::lm {

/// Incremental forward pass with a key/value cache. Uses the same row
/// kernels as the tape, so its logits match `forward` bit for bit.
class InferenceSession {
 public:
  InferenceSession(const BaseLanguageModel& model, const AdapterSet* adapters);

  /// Appends one token. Logits for the next position are computed only
  /// when `want_logits` is set.
  void append(TokenId token, bool want_logits = true);
  void append_all(std::span<const TokenId> tokens);

  std::span<const double> logits() const { return logits_; }
  /// Final normalized hidden row of the last appended token.
  std::span<const double> hidden() const { return final_; }
  std::size_t length() const noexcept { return length_; }
  void reset() noexcept { length_ = 0; }

 private:
  void project();

  const BaseLanguageModel& model_;
  const AdapterSet* adapters_;
  std::size_t d_;
  std::vector<std::vector<double>> keys_, values_;  // per layer, context x d
  std::vector<double> x_, h_, q_, k_, v_, down_, up_, att_, proj_, ff_, final_, logits_;
  std::size_t length_ = 0;
  bool hidden_ready_ = false;
};

struct GenerationConfig {
  std::size_t max_tokens = 32;
  double temperature = 1.0;  // 0 selects greedy decoding
  bool record_hidden = false;
};

struct GenerationResult {
  std::vector<TokenId> tokens;         // includes the EOS when one was produced
  std::vector<double> policy_logprobs;  // under base + adapters
  std::vector<double> init_logprobs;    // under the base alone
  bool truncated = false;               // hit max_tokens without EOS
  Tensor hidden;                        // policy hidden row per generated token, if recorded
};

/// Samples a continuation of `prompt`. Log-probabilities are those of the
/// unscaled model distribution for each produced token.
GenerationResult generate(const BaseLanguageModel& model, const AdapterSet* adapters,
                          std::span<const TokenId> prompt, const GenerationConfig& cfg, std::mt19937_64& rng);

/// Teacher-forced log-probability of each continuation token.
std::vector<double> logprobs(const BaseLanguageModel& model, const AdapterSet* adapters,
                             std::span<const TokenId> prompt, std::span<const TokenId> continuation);

/// exp(a/T) / (exp(a/T) + exp(b/T)), evaluated after subtracting the max.
double two_way_softmax(double logit_yes, double logit_no, double temperature);

/// Probability of YES against NO at the end of a scorer prompt.
double score_yes(const BaseLanguageModel& model, std::span<const TokenId> scorer_prompt, double temperature);

}  // namespace expctr::lm
