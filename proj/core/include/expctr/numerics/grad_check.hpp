#pragma once

#include <functional>
#include <string>

#include "expctr/numerics/tape.hpp"

namespace expctr::numerics {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t elements_checked = 0;
};

using GraphBuilder = std::function<Var(Tape&)>;

/// Compares tape gradients against central differences for every element
/// of every trainable parameter in `params`.
///
/// Relative error per element is |analytic - numeric| /
/// max(|analytic|, |numeric|, 1e-8). Outputs with more than one element are
/// contracted with a fixed pseudo-random weighting first. Frozen parameters
/// are skipped, so an all-frozen list passes vacuously.
GradCheckResult grad_check(const GraphBuilder& graph, const ParameterRefs& params, double step = 1e-4);

}  // namespace expctr::numerics
