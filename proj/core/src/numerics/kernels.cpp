#include "expctr/numerics/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace expctr::numerics::kernels {

void affine_row(std::span<const double> x, const Tensor& weight, std::span<const double> bias,
                std::span<double> out) noexcept {
  const std::size_t in = weight.rows();
  const std::size_t width = weight.cols();
  if (bias.empty()) {
    std::fill(out.begin(), out.end(), 0.0);
  } else {
    std::copy(bias.begin(), bias.end(), out.begin());
  }
  double* __restrict o = out.data();
  const double* w = weight.data();
  for (std::size_t k = 0; k < in; ++k) {
    const double xk = x[k];
    const double* __restrict wk = w + k * width;
    for (std::size_t j = 0; j < width; ++j) o[j] += xk * wk[j];
  }
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void layer_norm_row(std::span<const double> x, std::span<const double> gain,
                    std::span<const double> bias, double eps, std::span<double> out,
                    std::span<double> normalized, double* inv_std) noexcept {
  const auto n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xhat = (x[i] - mean) * inv;
    if (!normalized.empty()) normalized[i] = xhat;
    out[i] = xhat * gain[i] + bias[i];
  }
  if (inv_std) *inv_std = inv;
}

void softmax_row(std::span<const double> in, std::span<double> out) noexcept {
  const double m = *std::max_element(in.begin(), in.end());
  double total = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - m);
    total += out[i];
  }
  for (double& v : out) v /= total;
}

void log_softmax_row(std::span<const double> in, std::span<double> out) noexcept {
  const double m = *std::max_element(in.begin(), in.end());
  double total = 0.0;
  for (double v : in) total += std::exp(v - m);
  const double log_total = std::log(total);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - m - log_total;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu(double x) noexcept {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_derivative(double x) noexcept {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

void attention_row(std::span<const double> query, const double* keys, const double* values,
                   std::size_t count, std::size_t stride, std::size_t heads, std::span<double> out,
                   std::span<double> probs) noexcept {
  const std::size_t head_dim = query.size() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  // Weights land in the caller's buffer when one is given.
  thread_local std::vector<double> scratch;
  if (scratch.size() < count) scratch.resize(count);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * head_dim;
    double* p = probs.empty() ? scratch.data() : probs.data() + h * count;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < count; ++j) {
      const double* kj = keys + j * stride + off;
      double s = 0.0;
      for (std::size_t c = 0; c < head_dim; ++c) s += query[off + c] * kj[c];
      p[j] = s * scale;
      m = std::max(m, p[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      p[j] = std::exp(p[j] - m);
      total += p[j];
    }
    for (std::size_t j = 0; j < count; ++j) p[j] /= total;
    for (std::size_t c = 0; c < head_dim; ++c) out[off + c] = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      const double* vj = values + j * stride + off;
      const double pj = p[j];
      for (std::size_t c = 0; c < head_dim; ++c) out[off + c] += pj * vj[c];
    }
  }
}

}  // namespace expctr::numerics::kernels
