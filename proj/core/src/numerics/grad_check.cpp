#include "expctr/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace expctr::numerics {

namespace {

Tensor projection_for(const Tensor& out) {
  Tensor weights(out.shape(), 1.0);
  if (out.size() == 1) return weights;
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (double& w : weights.values()) w = dist(rng);
  return weights;
}

double contract(const Tensor& out, const Tensor& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) total += weights[i] * out[i];
  return total;
}

double evaluate(const GraphBuilder& graph, const Tensor& weights, const std::string& name) {
  Tape tape;
  const Tensor& out = graph(tape).value();
  const double f = contract(out, weights);
  if (!std::isfinite(f)) throw NonFiniteError("grad_check: non-finite output while perturbing '" + name + "'");
  return f;
}

}  // namespace

GradCheckResult grad_check(const GraphBuilder& graph, const ParameterRefs& params, double step) {
  if (!(step > 0.0 && step <= 1e-2)) throw std::invalid_argument("grad_check: step must lie in (0, 1e-2]");

  GradCheckResult result;
  for (Parameter* p : params) {
    if (p->trainable) p->grad = Tensor(p->value.shape());
  }

  Tensor weights;
  {
    Tape tape;
    Var out = graph(tape);
    if (!out.value().all_finite()) throw NonFiniteError("grad_check: non-finite forward output");
    weights = projection_for(out.value());
    tape.backward(out, weights);
  }

  for (Parameter* p : params) {
    if (!p->trainable) continue;
    if (!p->grad.all_finite()) throw NonFiniteError("grad_check: non-finite gradient for '" + p->name + "'");
    const Tensor analytic = p->grad;
    auto values = p->value.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = evaluate(graph, weights, p->name);
      values[i] = saved - step;
      const double down = evaluate(graph, weights, p->name);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.elements_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace expctr::numerics
