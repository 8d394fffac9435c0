#include "expctr/ctr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "expctr/error.hpp"

namespace expctr::ctr {

namespace {

void check(std::span<const double> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ValidationError("metrics: length mismatch");
  if (predictions.size() < 2) throw ValidationError("metrics: need at least two predictions");
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("metrics: labels must be 0 or 1");
  }
}

}  // namespace

std::optional<double> auc(std::span<const double> predictions, std::span<const int> labels) {
  check(predictions, labels);
  const std::size_t n = predictions.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return predictions[a] < predictions[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && predictions[order[j]] == predictions[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double logloss(std::span<const double> predictions, std::span<const int> labels) {
  check(predictions, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(predictions.size());
}

double mae(std::span<const double> predictions, std::span<const int> labels) {
  check(predictions, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) total += std::abs(labels[i] - predictions[i]);
  return total / static_cast<double>(predictions.size());
}

double rmse(std::span<const double> predictions, std::span<const int> labels) {
  check(predictions, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = labels[i] - predictions[i];
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(predictions.size()));
}

MetricSet compute_metrics(std::span<const double> predictions, std::span<const int> labels) {
  return {auc(predictions, labels), logloss(predictions, labels), mae(predictions, labels),
          rmse(predictions, labels)};
}

}  // namespace expctr::ctr
