#include "expctr/lm/pretrain.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "expctr/lm/inference.hpp"
#include "expctr/numerics/ops.hpp"
#include "expctr/numerics/optimizer.hpp"
#include "expctr/prompting/prompts.hpp"

namespace expctr::lm {

namespace tok = prompting::token;

std::vector<CorpusSequence> build_corpus(const std::vector<data::InteractionSample>& samples,
                                         const data::World& world, std::size_t context,
                                         std::size_t max_explanation_tokens) {
  std::vector<CorpusSequence> corpus;
  corpus.reserve(2 * samples.size());
  for (const auto& s : samples) {
    if (s.oracle_explanation.empty()) throw ValidationError("corpus: sample without oracle explanation");
    // The explanation is capped like a generation would be, EOS included.
    std::vector<TokenId> expl = s.oracle_explanation;
    if (expl.size() + 1 > max_explanation_tokens) expl.resize(max_explanation_tokens - 1);

    CorpusSequence e;
    e.kind = SequenceKind::kExplanation;
    e.tokens = prompting::build_explanation_prompt(s, world, context - max_explanation_tokens).tokens;
    e.prompt_length = e.tokens.size();
    e.tokens.insert(e.tokens.end(), expl.begin(), expl.end());
    e.tokens.push_back(tok::kEos);
    corpus.push_back(std::move(e));

    CorpusSequence c;
    c.kind = SequenceKind::kScorer;
    c.label = s.label;
    c.tokens = prompting::build_scorer_prompt(expl, world.item(s.target_item).title, context - 1).tokens;
    c.prompt_length = c.tokens.size();
    c.tokens.push_back(s.label ? tok::kYes : tok::kNo);
    corpus.push_back(std::move(c));
  }
  return corpus;
}

namespace {

struct SequenceLoss {
  Var loss;
  std::size_t tokens;
};

SequenceLoss sequence_loss(Tape& tape, BaseLanguageModel& model, const CorpusSequence& seq, bool include_prompt) {
  if (seq.tokens.size() < 2) throw ValidationError("corpus: sequence shorter than two tokens");
  if (seq.prompt_length == 0 || seq.prompt_length >= seq.tokens.size())
    throw ValidationError("corpus: sequence has no continuation after its prompt");
  const std::size_t first = include_prompt ? 1 : seq.prompt_length;
  const std::span<const TokenId> all(seq.tokens);
  const auto fwd = forward(tape, model, nullptr, all.first(all.size() - 1), first - 1);
  const std::vector<std::size_t> targets(all.begin() + static_cast<std::ptrdiff_t>(first), all.end());
  return {numerics::cross_entropy(fwd.logits, targets), targets.size()};
}

}  // namespace

double corpus_loss(BaseLanguageModel& model, const std::vector<CorpusSequence>& corpus, bool include_prompt) {
  double total = 0.0;
  std::size_t count = 0;
  Tape tape;
  for (const auto& seq : corpus) {
    tape.clear();
    const auto l = sequence_loss(tape, model, seq, include_prompt);
    total += l.loss.value().item() * static_cast<double>(l.tokens);
    count += l.tokens;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

double scorer_accuracy(const BaseLanguageModel& model, const std::vector<CorpusSequence>& corpus) {
  std::size_t hits = 0, n = 0;
  for (const auto& seq : corpus) {
    if (seq.kind != SequenceKind::kScorer) continue;
    InferenceSession s(model, nullptr);
    s.append_all(std::span<const TokenId>(seq.tokens).first(seq.tokens.size() - 1));
    const int predicted = s.logits()[tok::kYes] > s.logits()[tok::kNo] ? 1 : 0;
    hits += predicted == seq.label ? 1 : 0;
    ++n;
  }
  return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
}

PretrainReport pretrain_base(BaseLanguageModel& model, const std::vector<CorpusSequence>& train,
                             const std::vector<CorpusSequence>& heldout, const PretrainConfig& cfg) {
  if (train.empty() || heldout.empty()) throw ValidationError("pretrain: train and held-out corpora must be non-empty");
  if (cfg.batch_size == 0) throw ValidationError("pretrain: batch_size must be positive");
  model.set_trainable(true);
  PretrainReport report;
  report.uniform_loss = std::log(static_cast<double>(model.config().vocab));
  report.initial_heldout_loss = corpus_loss(model, heldout, cfg.loss_on_prompt);

  numerics::AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  numerics::Adam adam(model.parameters(), adam_cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Tape tape;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      adam.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        tape.clear();
        const auto l = sequence_loss(tape, model, train[order[k]], cfg.loss_on_prompt);
        epoch_loss += l.loss.value().item();
        tape.backward(numerics::scale(l.loss, 1.0 / static_cast<double>(end - start)));
      }
      adam.clip_grad_norm(cfg.max_grad_norm);
      adam.step();
    }
    PretrainEpoch e;
    e.epoch = epoch + 1;
    e.train_loss = epoch_loss / static_cast<double>(order.size());
    e.heldout_loss = corpus_loss(model, heldout, cfg.loss_on_prompt);
    e.heldout_accuracy = scorer_accuracy(model, heldout);
    report.curve.push_back(e);
  }
  model.set_trainable(false);

  const bool loss_ok = report.final_loss() < report.uniform_loss - cfg.loss_margin;
  const bool acc_ok = report.final_accuracy() >= cfg.min_accuracy;
  if (!loss_ok || !acc_ok) {
    std::ostringstream msg;
    msg << "pretraining missed its criteria: held-out loss " << report.final_loss() << " (need < "
        << report.uniform_loss - cfg.loss_margin << "), scorer accuracy " << report.final_accuracy() << " (need >= "
        << cfg.min_accuracy << ")";
    throw PretrainError(msg.str(), report);
  }
  return report;
}

}  // namespace expctr::lm
