#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "expctr/data/interactions.hpp"

namespace expctr::data {

struct LabelRule {
  int threshold = 4;
  bool tie_is_positive = true;
};

int binarize(int rating, const LabelRule& rule);
inline int binarize(int rating, int threshold) { return binarize(rating, LabelRule{threshold, true}); }

struct InteractionSample {
  std::uint32_t user = 0;
  std::uint32_t target_item = 0;
  std::vector<std::uint32_t> liked;     // chronological
  std::vector<std::uint32_t> disliked;  // chronological
  int label = 0;
  int target_rating = 0;
  std::vector<TokenId> oracle_explanation;

  bool operator==(const InteractionSample&) const = default;
};

struct SampleConfig {
  LabelRule rule;
  std::size_t max_history = 10;
  std::size_t passes = 1;
  std::uint64_t seed = 3;
};

struct SampleBuildResult {
  std::vector<InteractionSample> samples;
  std::size_t skipped_users = 0;
};

/// `history` is one user's interactions in timestamp order; the target is
/// history[target_index] and up to max_history earlier entries form the context.
InteractionSample make_sample(std::span<const Interaction> history, std::size_t target_index,
                              const LabelRule& rule, std::size_t max_history);

/// One sample per user per pass, target drawn uniformly among positions that
/// have at least one predecessor.
SampleBuildResult build_samples(const std::vector<Interaction>& interactions, const SampleConfig& cfg);

struct DatasetSplit {
  std::vector<InteractionSample> train;
  std::vector<InteractionSample> validation;
  std::vector<InteractionSample> test;
};

DatasetSplit split(std::vector<InteractionSample> samples, std::uint64_t seed);

/// Warning text when one class exceeds 90% of the samples.
std::optional<std::string> imbalance_warning(const std::vector<InteractionSample>& samples);

}  // namespace expctr::data
