#pragma once

#include <cstdint>
#include <vector>

#include "expctr/ppo/ppo.hpp"

namespace expctr::ppo {

struct BanditResult {
  std::vector<double> probability;  // P(rewarded token) after each update
  std::size_t first_above = 0;      // 1-based update index, 0 if never
  double initial_probability = 0.0;
};

/// Two-token bandit: a randomly initialised model with vocabulary {a, b}
/// sees a one-token prompt and emits one token. Token a earns reward 1 and
/// token b reward 0. Runs `updates` PPO updates under `cfg` (generation is
/// capped at one token) and records P(a) after each.
BanditResult run_bandit(const PpoConfig& cfg, std::uint64_t seed, std::size_t updates, double threshold = 0.9);

}  // namespace expctr::ppo
