#include <algorithm>

#include <gtest/gtest.h>

#include "expctr/prompting/prompts.hpp"

namespace expctr::prompting {
namespace {

data::World make_world() {
  data::WorldConfig cfg;
  cfg.n_users = 3;
  cfg.n_items = 30;
  cfg.attributes = 12;
  cfg.attributes_per_item = 3;
  cfg.seed = 5;
  return data::generate_world(cfg);
}

data::InteractionSample sample_with(std::vector<std::uint32_t> liked, std::vector<std::uint32_t> disliked,
                                    std::uint32_t target) {
  data::InteractionSample s;
  s.target_item = target;
  s.liked = std::move(liked);
  s.disliked = std::move(disliked);
  return s;
}

std::ptrdiff_t index_of(const std::vector<TokenId>& v, TokenId t) {
  return std::find(v.begin(), v.end(), t) - v.begin();
}

TEST(Vocabulary, IdsAreUniqueAndClassified) {
  Vocabulary v(5, 3);
  EXPECT_EQ(v.size(), 14u + 5u + 15u);
  EXPECT_NE(token::kYes, token::kNo);
  EXPECT_TRUE(v.is_attribute(v.attribute(4)));
  EXPECT_FALSE(v.is_attribute(v.title_word(0, 0)));
  EXPECT_EQ(v.attribute_of(v.title_word(3, 2)), 3u);
  EXPECT_EQ(v.title_word(4, 2), v.size() - 1);
  EXPECT_THROW(v.attribute(5), ValidationError);
}

TEST(ExplanationPrompt, HeaderOrderAndTitles) {
  const auto w = make_world();
  const auto p = build_explanation_prompt(sample_with({1, 2}, {3}, 4), w, 256);
  const auto& t = p.tokens;
  EXPECT_EQ(p.role, PromptRole::kExplanation);
  EXPECT_EQ(t.front(), token::kBos);
  EXPECT_EQ(t.back(), token::kExplain);
  const auto liked = index_of(t, token::kLiked), disliked = index_of(t, token::kDisliked),
             target = index_of(t, token::kTarget);
  EXPECT_EQ(liked, 1);
  EXPECT_LT(liked, disliked);
  EXPECT_LT(disliked, target);
  // Round trip: target title equals the catalog title.
  const std::vector<TokenId> title(t.begin() + target + 1, t.end() - 1);
  EXPECT_EQ(title, w.items[4].title);
  // 2 liked titles of 3 plus one separator.
  EXPECT_EQ(disliked - liked - 1, 7);
  EXPECT_EQ(t.size(), 5u + 7u + 3u + 3u);
  EXPECT_FALSE(p.truncated);
}

TEST(ExplanationPrompt, EmptyDislikedKeepsHeader) {
  const auto w = make_world();
  const auto t = build_explanation_prompt(sample_with({1}, {}, 2), w, 256).tokens;
  EXPECT_EQ(t[index_of(t, token::kDisliked) + 1], token::kTarget);
  const auto empty = build_explanation_prompt(sample_with({}, {}, 2), w, 256).tokens;
  EXPECT_EQ(empty, (std::vector<TokenId>{token::kBos, token::kLiked, token::kDisliked, token::kTarget,
                                         w.items[2].title[0], w.items[2].title[1], w.items[2].title[2],
                                         token::kExplain}));
}

TEST(ExplanationPrompt, TightBudgetDropsOldestLikedFirst) {
  const auto w = make_world();
  // 8 liked, 4 disliked, every title 3 tokens.
  const auto s = sample_with({0, 1, 2, 3, 4, 5, 6, 7}, {8, 9, 10, 11}, 12);
  // Length with L liked and D disliked kept: 5 + 3 + (4L - 1)+ + (4D - 1)+.
  auto len = [](int l, int d) { return 8 + (l ? 4 * l - 1 : 0) + (d ? 4 * d - 1 : 0); };
  ASSERT_EQ(len(8, 4), 54);
  for (int budget : {54, 53, 40, 23, 19, 12, 8}) {
    int l = 8, d = 4;
    while (len(l, d) > budget) (l > 0 ? l : d)--;
    const auto p = build_explanation_prompt(s, w, static_cast<std::size_t>(budget));
    EXPECT_LE(p.tokens.size(), static_cast<std::size_t>(budget));
    EXPECT_EQ(p.tokens.size(), static_cast<std::size_t>(len(l, d))) << budget;
    EXPECT_EQ(p.dropped_items, static_cast<std::size_t>(12 - l - d));
    if (l > 0) {
      // The first kept liked title belongs to the newest items.
      EXPECT_EQ(p.tokens[2], w.items[static_cast<std::size_t>(8 - l)].title[0]);
    }
    const auto tgt = index_of(p.tokens, token::kTarget);
    EXPECT_EQ(p.tokens[static_cast<std::size_t>(tgt) + 1], w.items[12].title[0]);
  }
  EXPECT_THROW(build_explanation_prompt(s, w, 7), ValidationError);
}

TEST(ExplanationPrompt, PureFunction) {
  const auto w = make_world();
  const auto s = sample_with({5, 6}, {7}, 8);
  EXPECT_EQ(build_explanation_prompt(s, w, 30).tokens, build_explanation_prompt(s, w, 30).tokens);
}

TEST(ScorerPrompt, LayoutAndLength) {
  const std::vector<TokenId> expl = {token::kPos, 20, token::kNeg, 21, token::kPos};
  const std::vector<TokenId> title = {40, 41, 42};
  const auto p = build_scorer_prompt(expl, title, 256);
  EXPECT_EQ(p.tokens.size(), 5u + 3u + 4u);
  EXPECT_EQ(p.tokens, (std::vector<TokenId>{token::kBos, token::kThought, token::kPos, 20, token::kNeg, 21,
                                            token::kPos, token::kTarget, 40, 41, 42, token::kQuery}));
  EXPECT_EQ(p.role, PromptRole::kScorer);
}

TEST(ScorerPrompt, EosStrippedAndEmptyRejected) {
  const std::vector<TokenId> title = {40};
  const std::vector<TokenId> with_eos = {token::kPos, 20, token::kEos};
  EXPECT_EQ(build_scorer_prompt(with_eos, title, 256).tokens.size(), 2u + 1u + 4u);
  const std::vector<TokenId> only_eos = {token::kEos};
  EXPECT_THROW(build_scorer_prompt(only_eos, title, 256), EmptyExplanationError);
  EXPECT_THROW(build_scorer_prompt({}, title, 256), EmptyExplanationError);
}

TEST(ScorerPrompt, OracleExplanationIsValidAndOverlongIsCutFromTail) {
  const auto w = make_world();
  data::InteractionConfig icfg;
  icfg.per_user_count = 4;
  const auto log = data::simulate_interactions(w, icfg);
  const auto p = build_scorer_prompt(log[0].oracle_explanation, w.items[log[0].item].title, 256);
  EXPECT_FALSE(p.truncated);
  EXPECT_EQ(p.tokens.back(), token::kQuery);

  const auto cut = build_scorer_prompt(log[0].oracle_explanation, w.items[log[0].item].title, 9);
  EXPECT_TRUE(cut.truncated);
  EXPECT_EQ(cut.tokens.size(), 9u);
  EXPECT_EQ(cut.tokens[2], log[0].oracle_explanation[0]);
  EXPECT_EQ(cut.tokens[3], log[0].oracle_explanation[1]);
  EXPECT_EQ(cut.tokens[4], token::kTarget);
}

}  // namespace
}  // namespace expctr::prompting
