#include "expctr/prompting/prompts.hpp"

namespace expctr::prompting {

namespace {

std::size_t section_length(const std::vector<std::uint32_t>& items, std::size_t first, const data::World& world) {
  std::size_t n = 0;
  for (std::size_t k = first; k < items.size(); ++k) n += world.item(items[k]).title.size();
  const std::size_t count = items.size() - first;
  return n + (count > 1 ? count - 1 : 0);
}

void append_section(std::vector<TokenId>& out, const std::vector<std::uint32_t>& items, std::size_t first,
                    const data::World& world) {
  for (std::size_t k = first; k < items.size(); ++k) {
    if (k > first) out.push_back(token::kSep);
    const auto& title = world.item(items[k]).title;
    out.insert(out.end(), title.begin(), title.end());
  }
}

}  // namespace

PromptSequence build_explanation_prompt(const data::InteractionSample& sample, const data::World& world,
                                        std::size_t max_length) {
  const auto& target_title = world.item(sample.target_item).title;
  const std::size_t fixed = 5 + target_title.size();
  if (fixed > max_length)
    throw ValidationError("explanation prompt: target alone needs " + std::to_string(fixed) +
                          " tokens, budget is " + std::to_string(max_length));

  std::size_t drop_liked = 0, drop_disliked = 0;
  auto length = [&] {
    return fixed + section_length(sample.liked, drop_liked, world) +
           section_length(sample.disliked, drop_disliked, world);
  };
  while (length() > max_length) {
    if (drop_liked < sample.liked.size()) {
      ++drop_liked;
    } else {
      ++drop_disliked;
    }
  }

  PromptSequence p;
  p.role = PromptRole::kExplanation;
  p.dropped_items = drop_liked + drop_disliked;
  p.truncated = p.dropped_items > 0;
  p.tokens.reserve(length());
  p.tokens.push_back(token::kBos);
  p.tokens.push_back(token::kLiked);
  append_section(p.tokens, sample.liked, drop_liked, world);
  p.tokens.push_back(token::kDisliked);
  append_section(p.tokens, sample.disliked, drop_disliked, world);
  p.tokens.push_back(token::kTarget);
  p.tokens.insert(p.tokens.end(), target_title.begin(), target_title.end());
  p.tokens.push_back(token::kExplain);
  return p;
}

std::span<const TokenId> strip_eos(std::span<const TokenId> tokens) {
  if (!tokens.empty() && tokens.back() == token::kEos) return tokens.first(tokens.size() - 1);
  return tokens;
}

PromptSequence build_scorer_prompt(std::span<const TokenId> explanation, std::span<const TokenId> target_title,
                                   std::size_t max_length) {
  explanation = strip_eos(explanation);
  if (explanation.empty()) throw EmptyExplanationError("scorer prompt: explanation is empty");
  const std::size_t fixed = 4 + target_title.size();
  if (fixed + 1 > max_length)
    throw ValidationError("scorer prompt: budget " + std::to_string(max_length) + " leaves no room for an explanation");

  PromptSequence p;
  p.role = PromptRole::kScorer;
  std::size_t keep = explanation.size();
  if (fixed + keep > max_length) {
    keep = max_length - fixed;
    p.truncated = true;
  }
  p.tokens.reserve(fixed + keep);
  p.tokens.push_back(token::kBos);
  p.tokens.push_back(token::kThought);
  p.tokens.insert(p.tokens.end(), explanation.begin(), explanation.begin() + static_cast<std::ptrdiff_t>(keep));
  p.tokens.push_back(token::kTarget);
  p.tokens.insert(p.tokens.end(), target_title.begin(), target_title.end());
  p.tokens.push_back(token::kQuery);
  return p;
}

}  // namespace expctr::prompting
