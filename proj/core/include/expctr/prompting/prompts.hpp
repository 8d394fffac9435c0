#pragma once

#include <span>
#include <vector>

#include "expctr/data/samples.hpp"
#include "expctr/error.hpp"
#include "expctr/prompting/vocabulary.hpp"

namespace expctr::prompting {

enum class PromptRole { kExplanation, kScorer };

struct PromptSequence {
  std::vector<TokenId> tokens;
  PromptRole role = PromptRole::kExplanation;
  bool truncated = false;
  std::size_t dropped_items = 0;  // history items removed to fit
};

/// Raised when an explanation has no content tokens.
class EmptyExplanationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// BOS LIKED t(l1) SEP t(l2) ... DISLIKED t(d1) SEP ... TARGET t(target) EXPLAIN.
/// Oldest liked items are dropped first, then oldest disliked, until the
/// prompt fits in `max_length`.
PromptSequence build_explanation_prompt(const data::InteractionSample& sample, const data::World& world,
                                        std::size_t max_length);

/// BOS THOUGHT explanation TARGET title QUERY. A trailing EOS on the
/// explanation is removed; overlong explanations lose tokens from the tail.
PromptSequence build_scorer_prompt(std::span<const TokenId> explanation, std::span<const TokenId> target_title,
                                   std::size_t max_length);

/// Drops a single trailing EOS, if present.
std::span<const TokenId> strip_eos(std::span<const TokenId> tokens);

}  // namespace expctr::prompting
