#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "expctr/data/world.hpp"

namespace expctr::data {

struct InteractionConfig {
  std::size_t per_user_count = 16;
  double noise_scale = 0.1;
  std::uint64_t seed = 2;
  // Cumulative fractions of the z-scored affinity at which ratings step up.
  std::array<double, 4> rating_cuts = {0.15, 0.30, 0.50, 0.75};

  void validate(const World& world) const;
};

struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  int rating = 0;
  std::int64_t timestamp = 0;
  std::vector<TokenId> oracle_explanation;
};

/// Interactions grouped by user, each user's block in timestamp order.
std::vector<Interaction> simulate_interactions(const World& world, const InteractionConfig& cfg);

/// Maps z-scored affinities to 1..5 through empirical quantile cut points.
std::vector<int> quantize_ratings(const std::vector<double>& affinities, const std::array<double, 4>& cuts);

}  // namespace expctr::data
