#include "expctr/numerics/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace expctr::numerics {

Adam::Adam(ParameterRefs params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.learning_rate > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  for (Parameter* p : params_) {
    if (!p->grad.same_shape(p->value)) p->grad = Tensor(p->value.shape());
    state_.first_moment.emplace_back(p->value.shape());
    state_.second_moment.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  for (const Parameter* p : params_) {
    if (p->trainable && !p->grad.all_finite()) {
      throw NonFiniteError("adam: non-finite gradient in parameter '" + p->name + "'");
    }
  }
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (!p.trainable) continue;
    auto m = state_.first_moment[k].values();
    auto v = state_.second_moment[k].values();
    auto w = p.value.values();
    auto g = p.grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

double Adam::clip_grad_norm(double max_norm) {
  double total = 0.0;
  for (const Parameter* p : params_) {
    if (!p->trainable) continue;
    for (double g : p->grad.values()) total += g * g;
  }
  const double norm = std::sqrt(total);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double factor = max_norm / norm;
    for (Parameter* p : params_) {
      if (!p->trainable) continue;
      for (double& g : p->grad.values()) g *= factor;
    }
  }
  return norm;
}

void Adam::set_state(OptimizerState state) {
  if (state.first_moment.size() != params_.size() || state.second_moment.size() != params_.size()) {
    throw ShapeError("adam: optimizer state does not match parameter list");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!state.first_moment[k].same_shape(params_[k]->value) ||
        !state.second_moment[k].same_shape(params_[k]->value)) {
      throw ShapeError("adam: moment shape mismatch for '" + params_[k]->name + "'");
    }
  }
  state_ = std::move(state);
}

}  // namespace expctr::numerics
