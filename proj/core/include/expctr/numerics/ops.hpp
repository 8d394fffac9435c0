#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "expctr/numerics/tape.hpp"

// Differentiable primitives. Every op checks operand shapes and throws
// ShapeError naming itself on mismatch. Matrix ops treat rank-1 tensors as a
// single row.

namespace expctr::numerics {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);

/// [m x k] * [k x n]
Var matmul(const Var& a, const Var& b);
/// x * weight + bias, weight [in x out], bias [out] broadcast over rows.
Var affine(const Var& x, const Var& weight, const Var& bias);

Var sigmoid(const Var& a);
Var relu(const Var& a);
Var gelu(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);
Var clamp(const Var& a, double lo, double hi);
Var minimum(const Var& a, const Var& b);

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm(const Var& x, const Var& gain, const Var& bias);

/// Mean over rows: [n x d] -> [1 x d].
Var mean_pool(const Var& a);
Var concat_cols(const std::vector<Var>& parts);
Var select_rows(const Var& a, std::span<const std::size_t> rows);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
/// Element gather: out[k] = a(rows[k], cols[k]) as a [1 x K] row.
Var pick(const Var& a, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
/// Row-wise inner product: [n x d], [n x d] -> [n x 1].
Var dot_rows(const Var& a, const Var& b);

/// Table lookup: rows of `table` [V x d] for each id -> [n x d].
Var embedding(const Var& table, std::span<const std::size_t> ids);

/// Causal multi-head self-attention; q, k, v are [n x d] with heads
/// packed along columns.
Var causal_attention(const Var& q, const Var& k, const Var& v, std::size_t heads);

Var sum(const Var& a);
Var mean(const Var& a);

/// Mean next-token cross-entropy of `logits` [n x V] against target ids.
Var cross_entropy(const Var& logits, std::span<const std::size_t> targets);
/// Mean binary cross-entropy on logits [n x 1] with {0,1} labels.
Var bce_with_logits(const Var& logits, std::span<const int> labels);

}  // namespace expctr::numerics
