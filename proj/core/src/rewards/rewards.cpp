#include "expctr/rewards/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "expctr/error.hpp"

namespace expctr::rewards {

namespace {

void check_label(int label) {
  if (label != 0 && label != 1) throw ValidationError("reward: label must be 0 or 1");
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string("reward: ") + what + " must lie in [0, 1]");
}

}  // namespace

std::string_view to_string(RewardKind kind) { return kind == RewardKind::kLc ? "lc" : "ic"; }

RewardKind parse_reward_kind(std::string_view text) {
  if (text == "lc") return RewardKind::kLc;
  if (text == "ic") return RewardKind::kIc;
  throw ValidationError("unknown reward kind '" + std::string(text) + "' (expected lc or ic)");
}

double lc_reward(double scorer_probability, int label) {
  check_label(label);
  check_probability(scorer_probability, "scorer probability");
  return 1.0 - std::abs(label - scorer_probability);
}

double ic_reward(int label, double with_text, double without_text, bool signed_variant) {
  check_label(label);
  check_probability(with_text, "prediction with text");
  check_probability(without_text, "prediction without text");
  const double fit = 1.0 - std::abs(label - with_text);
  if (signed_variant) return fit + (std::abs(label - without_text) - std::abs(label - with_text));
  return fit + std::abs(with_text - without_text);
}

RewardBatch normalize_clip(std::vector<double> raw, double delta, RewardKind kind, double std_floor) {
  if (raw.empty()) throw ValidationError("reward: empty batch");
  if (!(delta > 0.0)) throw ValidationError("reward: clip bound must be positive");
  RewardBatch batch;
  batch.kind = kind;
  const double n = static_cast<double>(raw.size());
  // Shifted by the first value so a constant batch has an exact mean.
  double offset = 0.0;
  for (double r : raw) offset += r - raw.front();
  const double mean = raw.front() + offset / n;
  double var = 0.0;
  for (double r : raw) var += (r - mean) * (r - mean);
  batch.mean = mean;
  batch.std = std::sqrt(var / n);
  const double denom = std::max(batch.std, std_floor);
  batch.normalized.reserve(raw.size());
  for (double r : raw) batch.normalized.push_back(std::clamp((r - mean) / denom, -delta, delta));
  batch.raw = std::move(raw);
  return batch;
}

}  // namespace expctr::rewards
