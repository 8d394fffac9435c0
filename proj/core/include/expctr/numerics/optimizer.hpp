#pragma once

#include <cstdint>
#include <vector>

#include "expctr/numerics/tensor.hpp"

namespace expctr::numerics {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one parameter list, in list order.
struct OptimizerState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// Adaptive-moment optimizer with bias correction. Frozen parameters are
/// skipped; a non-finite gradient aborts the step before anything changes.
class Adam {
 public:
  Adam(ParameterRefs params, AdamConfig config);

  /// Applies one update from the parameters' `grad` fields.
  /// Throws NonFiniteError naming the parameter if any gradient is not finite.
  void step();
  void zero_grad();

  /// Rescales all trainable gradients so their global L2 norm is at most
  /// `max_norm`. Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  const OptimizerState& state() const noexcept { return state_; }
  void set_state(OptimizerState state);
  const AdamConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) noexcept { config_.learning_rate = lr; }
  const ParameterRefs& parameters() const noexcept { return params_; }

 private:
  ParameterRefs params_;
  AdamConfig config_;
  OptimizerState state_;
};

}  // namespace expctr::numerics
