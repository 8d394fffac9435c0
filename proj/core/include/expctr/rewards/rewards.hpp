#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace expctr::rewards {

enum class RewardKind { kLc, kIc };

std::string_view to_string(RewardKind kind);
/// Accepts "lc" or "ic"; throws ValidationError otherwise.
RewardKind parse_reward_kind(std::string_view text);

inline constexpr double kStdFloor = 1e-8;

/// 1 - |y - s|. Range [0, 1].
double lc_reward(double scorer_probability, int label);

/// 1 - |y - s| + |s - s0| with s the CTR prediction with text and s0 without.
/// Range [0, 2]. The signed variant replaces the second term with
/// |y - s0| - |y - s|, which rewards only the improvement the text brings
/// (range [-1, 2]).
double ic_reward(int label, double with_text, double without_text, bool signed_variant = false);

/// Floor reward for an empty or unusable explanation.
inline constexpr double degenerate_explanation_reward(RewardKind) { return 0.0; }

struct RewardBatch {
  RewardKind kind = RewardKind::kLc;
  std::vector<double> raw;
  std::vector<double> normalized;
  double mean = 0.0;
  double std = 0.0;  // population
};

/// clip((r - mean) / max(std, std_floor), -delta, delta) over the batch.
/// Throws ValidationError on an empty batch or delta <= 0.
RewardBatch normalize_clip(std::vector<double> raw, double delta, RewardKind kind = RewardKind::kLc,
                           double std_floor = kStdFloor);

}  // namespace expctr::rewards
