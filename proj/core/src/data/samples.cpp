#include "expctr/data/samples.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "expctr/error.hpp"

namespace expctr::data {

int binarize(int rating, const LabelRule& rule) {
  if (rating < 1 || rating > 5) throw ValidationError("binarize: rating " + std::to_string(rating) + " outside 1..5");
  if (rating == rule.threshold) return rule.tie_is_positive ? 1 : 0;
  return rating > rule.threshold ? 1 : 0;
}

InteractionSample make_sample(std::span<const Interaction> history, std::size_t target_index,
                              const LabelRule& rule, std::size_t max_history) {
  if (target_index >= history.size()) throw ValidationError("make_sample: target index out of range");
  const Interaction& target = history[target_index];
  InteractionSample s;
  s.user = target.user;
  s.target_item = target.item;
  s.target_rating = target.rating;
  s.label = binarize(target.rating, rule);
  s.oracle_explanation = target.oracle_explanation;
  const std::size_t first = target_index > max_history ? target_index - max_history : 0;
  for (std::size_t k = first; k < target_index; ++k) {
    if (history[k].timestamp >= target.timestamp)
      throw ValidationError("make_sample: history does not precede the target");
    (binarize(history[k].rating, rule) ? s.liked : s.disliked).push_back(history[k].item);
  }
  return s;
}

SampleBuildResult build_samples(const std::vector<Interaction>& interactions, const SampleConfig& cfg) {
  if (cfg.passes == 0) throw ValidationError("build_samples: passes must be positive");
  std::map<std::uint32_t, std::vector<Interaction>> by_user;
  for (const Interaction& x : interactions) by_user[x.user].push_back(x);
  for (auto& [user, log] : by_user) {
    std::stable_sort(log.begin(), log.end(),
                     [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
    for (std::size_t k = 1; k < log.size(); ++k) {
      if (log[k].timestamp == log[k - 1].timestamp)
        throw ValidationError("build_samples: duplicate timestamp for user " + std::to_string(user));
    }
  }

  SampleBuildResult result;
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t pass = 0; pass < cfg.passes; ++pass) {
    for (const auto& [user, log] : by_user) {
      if (log.size() < 2) {
        if (pass == 0) ++result.skipped_users;
        continue;
      }
      std::uniform_int_distribution<std::size_t> pick(1, log.size() - 1);
      result.samples.push_back(make_sample(log, pick(rng), cfg.rule, cfg.max_history));
    }
  }
  return result;
}

DatasetSplit split(std::vector<InteractionSample> samples, std::uint64_t seed) {
  if (samples.size() < 10) throw ValidationError("split: need at least 10 samples, got " + std::to_string(samples.size()));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  const std::size_t held = samples.size() / 10;
  const std::size_t n_train = samples.size() - 2 * held;
  DatasetSplit out;
  out.train.reserve(n_train);
  out.validation.reserve(held);
  out.test.reserve(held);
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& dst = k < n_train ? out.train : (k < n_train + held ? out.validation : out.test);
    dst.push_back(std::move(samples[order[k]]));
  }
  return out;
}

std::optional<std::string> imbalance_warning(const std::vector<InteractionSample>& samples) {
  if (samples.empty()) return std::nullopt;
  const auto positives = static_cast<double>(
      std::count_if(samples.begin(), samples.end(), [](const InteractionSample& s) { return s.label == 1; }));
  const double frac = positives / static_cast<double>(samples.size());
  if (frac > 0.9 || frac < 0.1)
    return "class imbalance: positive fraction " + std::to_string(frac) + " is outside [0.1, 0.9]";
  return std::nullopt;
}

}  // namespace expctr::data
