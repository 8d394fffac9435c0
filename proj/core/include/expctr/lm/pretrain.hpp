#pragma once

#include <cstdint>
#include <vector>

#include "expctr/data/samples.hpp"
#include "expctr/error.hpp"
#include "expctr/lm/model.hpp"

namespace expctr::lm {

enum class SequenceKind { kExplanation, kScorer };

struct CorpusSequence {
  std::vector<TokenId> tokens;
  SequenceKind kind = SequenceKind::kExplanation;
  int label = -1;  // scorer sequences only
  std::size_t prompt_length = 0;
};

/// Explanation-style (prompt, oracle explanation, EOS) and scorer-style
/// (scorer prompt on the oracle explanation, then YES or NO) sequences,
/// one of each per sample.
std::vector<CorpusSequence> build_corpus(const std::vector<data::InteractionSample>& samples,
                                         const data::World& world, std::size_t context,
                                         std::size_t max_explanation_tokens);

struct PretrainConfig {
  std::size_t epochs = 8;
  double learning_rate = 1e-3;
  std::size_t batch_size = 2;
  double max_grad_norm = 1.0;
  double loss_margin = 0.5;    // held-out loss must fall below log(V) - margin
  double min_accuracy = 0.80;  // held-out YES/NO agreement with the label
  std::uint64_t seed = 21;
  // When false, only the continuation after the prompt is scored.
  bool loss_on_prompt = false;
};

struct PretrainEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;
  double heldout_accuracy = 0.0;
};

struct PretrainReport {
  double uniform_loss = 0.0;
  double initial_heldout_loss = 0.0;
  std::vector<PretrainEpoch> curve;

  double final_loss() const { return curve.empty() ? initial_heldout_loss : curve.back().heldout_loss; }
  double final_accuracy() const { return curve.empty() ? 0.0 : curve.back().heldout_accuracy; }
};

class PretrainError : public RuntimeFailure {
 public:
  PretrainError(const std::string& what, PretrainReport report)
      : RuntimeFailure(what), report_(std::move(report)) {}
  const PretrainReport& report() const noexcept { return report_; }

 private:
  PretrainReport report_;
};

/// Token-weighted next-token cross-entropy over the corpus.
double corpus_loss(BaseLanguageModel& model, const std::vector<CorpusSequence>& corpus, bool include_prompt);

/// Fraction of scorer sequences whose YES/NO argmax at the query matches
/// the label. Sequences of the other kind are ignored.
double scorer_accuracy(const BaseLanguageModel& model, const std::vector<CorpusSequence>& corpus);

/// Trains every base parameter, then freezes the model. Throws
/// PretrainError, carrying the curve, if either held-out criterion is missed.
PretrainReport pretrain_base(BaseLanguageModel& model, const std::vector<CorpusSequence>& train,
                             const std::vector<CorpusSequence>& heldout, const PretrainConfig& cfg);

}  // namespace expctr::lm
