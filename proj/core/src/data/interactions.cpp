#include "expctr/data/interactions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "expctr/error.hpp"

namespace expctr::data {

void InteractionConfig::validate(const World& world) const {
  if (per_user_count < 2) throw ValidationError("interactions: per_user_count must be at least 2");
  if (per_user_count > world.items.size())
    throw ValidationError("interactions: per_user_count exceeds the number of items");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
    throw ValidationError("interactions: noise_scale must be finite and non-negative");
  double prev = 0.0;
  for (double c : rating_cuts) {
    if (!(c > prev && c < 1.0)) throw ValidationError("interactions: rating cuts must increase strictly inside (0, 1)");
    prev = c;
  }
}

std::vector<int> quantize_ratings(const std::vector<double>& affinities, const std::array<double, 4>& cuts) {
  const std::size_t n = affinities.size();
  std::vector<int> ratings(n, 3);
  if (n == 0) return ratings;
  const double mean = std::accumulate(affinities.begin(), affinities.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double a : affinities) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = sd > 0.0 ? (affinities[i] - mean) / sd : 0.0;

  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end());
  std::array<double, 4> thresholds{};
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    const auto idx = std::min(n - 1, static_cast<std::size_t>(std::floor(cuts[k] * static_cast<double>(n))));
    thresholds[k] = sorted[idx];
  }
  for (std::size_t i = 0; i < n; ++i) {
    int r = 1;
    for (double t : thresholds) r += z[i] >= t ? 1 : 0;
    ratings[i] = r;
  }
  return ratings;
}

std::vector<Interaction> simulate_interactions(const World& world, const InteractionConfig& cfg) {
  cfg.validate(world);
  const prompting::Vocabulary vocab = world.vocabulary();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> start(0, 1000);
  std::uniform_int_distribution<std::int64_t> gap(1, 50);

  std::vector<Interaction> log;
  std::vector<double> affinities;
  log.reserve(world.users.size() * cfg.per_user_count);
  affinities.reserve(log.capacity());
  std::vector<std::uint32_t> pool(world.items.size());
  for (const UserProfile& user : world.users) {
    std::iota(pool.begin(), pool.end(), 0u);
    std::int64_t t = start(rng);
    for (std::size_t k = 0; k < cfg.per_user_count; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      const Item& item = world.items[pool[k]];
      Interaction x;
      x.user = user.id;
      x.item = item.id;
      x.timestamp = t;
      x.oracle_explanation = oracle_explanation(user, item, vocab);
      t += gap(rng);
      const double eps = noise(rng);
      affinities.push_back(affinity(user, item) + cfg.noise_scale * eps);
      log.push_back(std::move(x));
    }
  }
  const std::vector<int> ratings = quantize_ratings(affinities, cfg.rating_cuts);
  for (std::size_t i = 0; i < log.size(); ++i) log[i].rating = ratings[i];
  return log;
}

}  // namespace expctr::data
