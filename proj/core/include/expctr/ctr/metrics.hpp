#pragma once

#include <optional>
#include <span>

namespace expctr::ctr {

struct MetricSet {
  std::optional<double> auc;  // empty when only one class is present
  double logloss = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Rank-statistic AUC with average ranks for ties.
std::optional<double> auc(std::span<const double> predictions, std::span<const int> labels);
double logloss(std::span<const double> predictions, std::span<const int> labels);
double mae(std::span<const double> predictions, std::span<const int> labels);
double rmse(std::span<const double> predictions, std::span<const int> labels);

/// Throws ValidationError unless lengths match and are at least 2.
MetricSet compute_metrics(std::span<const double> predictions, std::span<const int> labels);

}  // namespace expctr::ctr
