#pragma once

// Row-level arithmetic shared by the recording tape and the cached inference
// path. Both routes call exactly these functions, so a row computed
// incrementally is bit-identical to the same row computed inside a full
// matrix op.

#include <cstddef>
#include <span>

#include "expctr/numerics/tensor.hpp"

namespace expctr::numerics::kernels {

/// out = bias + x * weight, weight stored [in x out]. `bias` may be empty.
void affine_row(std::span<const double> x, const Tensor& weight, std::span<const double> bias,
                std::span<double> out) noexcept;

double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// y = (x - mean) / sqrt(var + eps) * gain + bias. Writes the normalized
/// value (before gain/bias) to `normalized` when non-empty.
void layer_norm_row(std::span<const double> x, std::span<const double> gain,
                    std::span<const double> bias, double eps, std::span<double> out,
                    std::span<double> normalized, double* inv_std) noexcept;

void softmax_row(std::span<const double> in, std::span<double> out) noexcept;
void log_softmax_row(std::span<const double> in, std::span<double> out) noexcept;

double sigmoid(double x) noexcept;
double gelu(double x) noexcept;
double gelu_derivative(double x) noexcept;

/// Multi-head causal attention for one query row against `count` cached
/// key/value rows (each `stride` wide, heads laid out contiguously).
/// `probs`, when non-empty, receives heads x count attention weights.
void attention_row(std::span<const double> query, const double* keys, const double* values,
                   std::size_t count, std::size_t stride, std::size_t heads, std::span<double> out,
                   std::span<double> probs) noexcept;

inline constexpr double kLayerNormEps = 1e-5;

}  // namespace expctr::numerics::kernels
