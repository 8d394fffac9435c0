#include "expctr/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "expctr/numerics/kernels.hpp"

namespace expctr::numerics {

namespace {

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                   to_string(b.shape()));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch(op, a, b);
}

Tape& common_tape(const char* op, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ShapeError(std::string(op) + ": operands live on different tapes");
  return a.tape();
}

template <typename Forward, typename Derivative>
Var unary(const char* op, const Var& a, Forward f, Derivative df) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.tape().record(op, std::move(out), {a}, [df](const BackwardContext& ctx) {
    const Tensor& in = ctx.input(0);
    Tensor* g = ctx.grad(0);
    if (!g) return;
    for (std::size_t i = 0; i < in.size(); ++i) (*g)[i] += ctx.output_grad[i] * df(in[i], ctx.output[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  Tape& tape = common_tape("add", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same("add", x, y);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return tape.record("add", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* g = ctx.grad(k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.output_grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& tape = common_tape("sub", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same("sub", x, y);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return tape.record("sub", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    if (Tensor* g = ctx.grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.output_grad[i];
    }
    if (Tensor* g = ctx.grad(1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= ctx.output_grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& tape = common_tape("mul", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same("mul", x, y);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return tape.record("mul", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& x = ctx.input(0);
    const Tensor& y = ctx.input(1);
    if (Tensor* g = ctx.grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.output_grad[i] * y[i];
    }
    if (Tensor* g = ctx.grad(1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.output_grad[i] * x[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = factor * x[i];
  return a.tape().record("scale", std::move(out), {a}, [factor](const BackwardContext& ctx) {
    if (Tensor* g = ctx.grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += factor * ctx.output_grad[i];
    }
  });
}

namespace {

Var linear(const char* op, const Var& x, const Var& weight, const Var* bias) {
  Tape& tape = common_tape(op, x, weight);
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  if (in.cols() != w.rows()) mismatch(op, in, w);
  std::span<const double> b;
  if (bias) {
    common_tape(op, x, *bias);
    const Tensor& bt = bias->value();
    if (bt.rows() != 1 || bt.cols() != w.cols()) mismatch(op, w, bt);
    b = bt.values();
  }
  Tensor out({in.rows(), w.cols()});
  for (std::size_t i = 0; i < in.rows(); ++i) kernels::affine_row(in.row(i), w, b, out.row(i));

  auto backward = [](const BackwardContext& ctx) {
    const Tensor& xin = ctx.input(0);
    const Tensor& wt = ctx.input(1);
    const Tensor& g = ctx.output_grad;
    const std::size_t n = xin.rows(), k_dim = wt.rows(), width = wt.cols();
    if (Tensor* dx = ctx.grad(0)) {
      for (std::size_t i = 0; i < n; ++i) {
        auto gi = g.row(i);
        for (std::size_t k = 0; k < k_dim; ++k) (*dx)(i, k) += kernels::dot(gi, wt.row(k));
      }
    }
    if (Tensor* dw = ctx.grad(1)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* gi = g.row(i).data();
        for (std::size_t k = 0; k < k_dim; ++k) {
          const double xk = xin(i, k);
          if (xk == 0.0) continue;
          double* __restrict dwk = dw->row(k).data();
          for (std::size_t j = 0; j < width; ++j) dwk[j] += xk * gi[j];
        }
      }
    }
    if (ctx.inputs.size() > 2) {
      if (Tensor* db = ctx.grad(2)) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < width; ++j) (*db)[j] += g(i, j);
        }
      }
    }
  };
  if (bias) return tape.record(op, std::move(out), {x, weight, *bias}, backward);
  return tape.record(op, std::move(out), {x, weight}, backward);
}

}  // namespace

Var matmul(const Var& a, const Var& b) { return linear("matmul", a, b, nullptr); }

Var affine(const Var& x, const Var& weight, const Var& bias) {
  return linear("affine", x, weight, &bias);
}

Var sigmoid(const Var& a) {
  return unary(
      "sigmoid", a, [](double x) { return kernels::sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(const Var& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var gelu(const Var& a) {
  return unary(
      "gelu", a, [](double x) { return kernels::gelu(x); },
      [](double x, double) { return kernels::gelu_derivative(x); });
}

Var exp(const Var& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(const Var& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(const Var& a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var minimum(const Var& a, const Var& b) {
  Tape& tape = common_tape("minimum", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same("minimum", x, y);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::min(x[i], y[i]);
  return tape.record("minimum", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& x = ctx.input(0);
    const Tensor& y = ctx.input(1);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool first = x[i] <= y[i];
      if (Tensor* g = ctx.grad(first ? 0 : 1)) (*g)[i] += ctx.output_grad[i];
    }
  });
}

Var softmax_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor out({x.rows(), x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r) kernels::softmax_row(x.row(r), out.row(r));
  return a.tape().record("softmax", std::move(out), {a}, [](const BackwardContext& ctx) {
    Tensor* g = ctx.grad(0);
    if (!g) return;
    const Tensor& y = ctx.output;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const double inner = kernels::dot(ctx.output_grad.row(r), y.row(r));
      auto gr = g->row(r);
      for (std::size_t c = 0; c < y.cols(); ++c) gr[c] += y(r, c) * (ctx.output_grad(r, c) - inner);
    }
  });
}

Var log_softmax_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor out({x.rows(), x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r) kernels::log_softmax_row(x.row(r), out.row(r));
  return a.tape().record("log_softmax", std::move(out), {a}, [](const BackwardContext& ctx) {
    Tensor* g = ctx.grad(0);
    if (!g) return;
    const Tensor& y = ctx.output;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double total = 0.0;
      for (double v : ctx.output_grad.row(r)) total += v;
      auto gr = g->row(r);
      for (std::size_t c = 0; c < y.cols(); ++c) gr[c] += ctx.output_grad(r, c) - std::exp(y(r, c)) * total;
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias) {
  Tape& tape = common_tape("layer_norm", x, gain);
  common_tape("layer_norm", x, bias);
  const Tensor& in = x.value();
  const Tensor& g = gain.value();
  const Tensor& b = bias.value();
  if (g.size() != in.cols()) mismatch("layer_norm", in, g);
  if (b.size() != in.cols()) mismatch("layer_norm", in, b);
  Tensor out({in.rows(), in.cols()});
  auto normalized = std::make_shared<Tensor>(Shape{in.rows(), in.cols()});
  auto inv_std = std::make_shared<std::vector<double>>(in.rows());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    kernels::layer_norm_row(in.row(r), g.values(), b.values(), kernels::kLayerNormEps, out.row(r),
                            normalized->row(r), &(*inv_std)[r]);
  }
  return tape.record("layer_norm", std::move(out), {x, gain, bias},
                     [normalized, inv_std](const BackwardContext& ctx) {
                       const Tensor& gamma = ctx.input(1);
                       const Tensor& go = ctx.output_grad;
                       const std::size_t n = go.rows(), d = go.cols();
                       const Tensor& xhat = *normalized;
                       if (Tensor* dg = ctx.grad(1)) {
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < d; ++c) (*dg)[c] += go(r, c) * xhat(r, c);
                       }
                       if (Tensor* db = ctx.grad(2)) {
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < d; ++c) (*db)[c] += go(r, c);
                       }
                       if (Tensor* dx = ctx.grad(0)) {
                         for (std::size_t r = 0; r < n; ++r) {
                           double mean_g = 0.0, mean_gx = 0.0;
                           for (std::size_t c = 0; c < d; ++c) {
                             const double gh = go(r, c) * gamma[c];
                             mean_g += gh;
                             mean_gx += gh * xhat(r, c);
                           }
                           mean_g /= static_cast<double>(d);
                           mean_gx /= static_cast<double>(d);
                           const double inv = (*inv_std)[r];
                           for (std::size_t c = 0; c < d; ++c) {
                             const double gh = go(r, c) * gamma[c];
                             (*dx)(r, c) += inv * (gh - mean_g - xhat(r, c) * mean_gx);
                           }
                         }
                       }
                     });
}

Var mean_pool(const Var& a) {
  const Tensor& x = a.value();
  if (x.rows() == 0) throw ShapeError("mean_pool: no rows to pool");
  Tensor out({1, x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x(r, c);
  const double n = static_cast<double>(x.rows());
  for (double& v : out.values()) v /= n;
  return a.tape().record("mean_pool", std::move(out), {a}, [](const BackwardContext& ctx) {
    Tensor* g = ctx.grad(0);
    if (!g) return;
    const double n = static_cast<double>(g->rows());
    for (std::size_t r = 0; r < g->rows(); ++r)
      for (std::size_t c = 0; c < g->cols(); ++c) (*g)(r, c) += ctx.output_grad[c] / n;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Tape& tape = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t width = 0;
  for (const Var& p : parts) {
    common_tape("concat", parts.front(), p);
    if (p.rows() != rows) mismatch("concat", parts.front().value(), p.value());
    width += p.cols();
  }
  Tensor out({rows, width});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(off));
    off += v.cols();
  }
  return tape.record("concat", std::move(out), parts, [offsets](const BackwardContext& ctx) {
    for (std::size_t k = 0; k < ctx.inputs.size(); ++k) {
      Tensor* g = ctx.grad(k);
      if (!g) continue;
      for (std::size_t r = 0; r < g->rows(); ++r)
        for (std::size_t c = 0; c < g->cols(); ++c) (*g)(r, c) += ctx.output_grad(r, offsets[k] + c);
    }
  });
}

Var select_rows(const Var& a, std::span<const std::size_t> rows) {
  const Tensor& x = a.value();
  Tensor out({rows.size(), x.cols()});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= x.rows()) {
      throw ShapeError("select_rows: row " + std::to_string(rows[k]) + " out of range for " +
                       to_string(x.shape()));
    }
    std::copy(x.row(rows[k]).begin(), x.row(rows[k]).end(), out.row(k).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape().record("select_rows", std::move(out), {a}, [idx](const BackwardContext& ctx) {
    Tensor* g = ctx.grad(0);
    if (!g) return;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto dst = g->row(idx[k]);
      auto src = ctx.output_grad.row(k);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + to_string(a.shape()));
  }
  std::vector<std::size_t> rows(count);
  for (std::size_t k = 0; k < count; ++k) rows[k] = begin + k;
  return select_rows(a, rows);
}

Var pick(const Var& a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  const Tensor& x = a.value();
  if (rows.size() != cols.size()) throw ShapeError("pick: row and column index lists differ in length");
  Tensor out({1, rows.size()});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= x.rows() || cols[k] >= x.cols()) {
      throw ShapeError("pick: index out of range for " + to_string(x.shape()));
    }
    out[k] = x(rows[k], cols[k]);
  }
  std::vector<std::size_t> r(rows.begin(), rows.end()), c(cols.begin(), cols.end());
  return a.tape().record("pick", std::move(out), {a}, [r, c](const BackwardContext& ctx) {
    Tensor* g = ctx.grad(0);
    if (!g) return;
    for (std::size_t k = 0; k < r.size(); ++k) (*g)(r[k], c[k]) += ctx.output_grad[k];
  });
}

Var dot_rows(const Var& a, const Var& b) {
  Tape& tape = common_tape("dot_rows", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same("dot_rows", x, y);
  Tensor out({x.rows(), 1});
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = kernels::dot(x.row(r), y.row(r));
  return tape.record("dot_rows", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& x = ctx.input(0);
    const Tensor& y = ctx.input(1);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double g = ctx.output_grad[r];
      if (Tensor* gx = ctx.grad(0))
        for (std::size_t c = 0; c < x.cols(); ++c) (*gx)(r, c) += g * y(r, c);
      if (Tensor* gy = ctx.grad(1))
        for (std::size_t c = 0; c < x.cols(); ++c) (*gy)(r, c) += g * x(r, c);
    }
  });
}

Var embedding(const Var& table, std::span<const std::size_t> ids) {
  const Tensor& t = table.value();
  Tensor out({ids.size(), t.cols()});
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= t.rows()) {
      throw ShapeError("embedding: id " + std::to_string(ids[k]) + " out of range for table " +
                       to_string(t.shape()));
    }
    std::copy(t.row(ids[k]).begin(), t.row(ids[k]).end(), out.row(k).begin());
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return table.tape().record("embedding", std::move(out), {table}, [idx](const BackwardContext& ctx) {
    Tensor* g = ctx.grad(0);
    if (!g) return;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto dst = g->row(idx[k]);
      auto src = ctx.output_grad.row(k);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var causal_attention(const Var& q, const Var& k, const Var& v, std::size_t heads) {
  Tape& tape = common_tape("attention", q, k);
  common_tape("attention", q, v);
  const Tensor& qt = q.value();
  const Tensor& kt = k.value();
  const Tensor& vt = v.value();
  require_same("attention", qt, kt);
  require_same("attention", qt, vt);
  if (heads == 0 || qt.cols() % heads != 0) {
    throw ShapeError("attention: width " + std::to_string(qt.cols()) + " not divisible into " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t n = qt.rows(), d = qt.cols();
  // Row i keeps heads x (i+1) weights starting at heads * i(i+1)/2.
  auto probs = std::make_shared<std::vector<double>>(heads * n * (n + 1) / 2);
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> p(probs->data() + heads * i * (i + 1) / 2, heads * (i + 1));
    kernels::attention_row(qt.row(i), kt.data(), vt.data(), i + 1, d, heads, out.row(i), p);
  }
  return tape.record("attention", std::move(out), {q, k, v}, [probs, heads](const BackwardContext& ctx) {
    const Tensor& qt = ctx.input(0);
    const Tensor& kt = ctx.input(1);
    const Tensor& vt = ctx.input(2);
    const Tensor& go = ctx.output_grad;
    Tensor* dq = ctx.grad(0);
    Tensor* dk = ctx.grad(1);
    Tensor* dv = ctx.grad(2);
    const std::size_t n = qt.rows(), d = qt.cols(), hd = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<double> dp(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* prow = probs->data() + heads * i * (i + 1) / 2;
      for (std::size_t h = 0; h < heads; ++h) {
        const double* p = prow + h * (i + 1);
        const std::size_t off = h * hd;
        const double* g = go.row(i).data() + off;
        double weighted = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          const double* vj = vt.row(j).data() + off;
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) s += g[c] * vj[c];
          dp[j] = s;
          weighted += p[j] * s;
          if (dv) {
            double* dvj = dv->row(j).data() + off;
            for (std::size_t c = 0; c < hd; ++c) dvj[c] += p[j] * g[c];
          }
        }
        const double* qi = qt.row(i).data() + off;
        for (std::size_t j = 0; j <= i; ++j) {
          const double ds = p[j] * (dp[j] - weighted) * scale;
          if (ds == 0.0) continue;
          const double* kj = kt.row(j).data() + off;
          if (dq) {
            double* dqi = dq->row(i).data() + off;
            for (std::size_t c = 0; c < hd; ++c) dqi[c] += ds * kj[c];
          }
          if (dk) {
            double* dkj = dk->row(j).data() + off;
            for (std::size_t c = 0; c < hd; ++c) dkj[c] += ds * qi[c];
          }
        }
      }
    }
  });
}

Var sum(const Var& a) {
  const Tensor& x = a.value();
  double total = 0.0;
  for (double v : x.values()) total += v;
  return a.tape().record("sum", Tensor::scalar(total), {a}, [](const BackwardContext& ctx) {
    Tensor* g = ctx.grad(0);
    if (!g) return;
    const double go = ctx.output_grad[0];
    for (double& v : g->values()) v += go;
  });
}

Var mean(const Var& a) {
  const Tensor& x = a.value();
  if (x.size() == 0) throw ShapeError("mean: empty operand");
  double total = 0.0;
  for (double v : x.values()) total += v;
  const double n = static_cast<double>(x.size());
  return a.tape().record("mean", Tensor::scalar(total / n), {a}, [n](const BackwardContext& ctx) {
    Tensor* g = ctx.grad(0);
    if (!g) return;
    const double go = ctx.output_grad[0] / n;
    for (double& v : g->values()) v += go;
  });
}

Var cross_entropy(const Var& logits, std::span<const std::size_t> targets) {
  const Tensor& x = logits.value();
  if (targets.size() != x.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     to_string(x.shape()));
  }
  if (x.rows() == 0) throw ShapeError("cross_entropy: no rows");
  auto lsm = std::make_shared<Tensor>(Shape{x.rows(), x.cols()});
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (targets[r] >= x.cols()) throw ShapeError("cross_entropy: target id out of range");
    kernels::log_softmax_row(x.row(r), lsm->row(r));
    total -= (*lsm)(r, targets[r]);
  }
  const double n = static_cast<double>(x.rows());
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return logits.tape().record(
      "cross_entropy", Tensor::scalar(total / n), {logits}, [lsm, tgt, n](const BackwardContext& ctx) {
        Tensor* g = ctx.grad(0);
        if (!g) return;
        const double go = ctx.output_grad[0] / n;
        for (std::size_t r = 0; r < g->rows(); ++r) {
          auto gr = g->row(r);
          for (std::size_t c = 0; c < gr.size(); ++c) {
            const double target = c == tgt[r] ? 1.0 : 0.0;
            gr[c] += go * (std::exp((*lsm)(r, c)) - target);
          }
        }
      });
}

Var bce_with_logits(const Var& logits, std::span<const int> labels) {
  const Tensor& x = logits.value();
  if (x.cols() != 1 || x.rows() != labels.size()) {
    throw ShapeError("bce_with_logits: logits " + to_string(x.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ShapeError("bce_with_logits: no rows");
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const double z = x[r];
    total += std::max(z, 0.0) - z * labels[r] + std::log1p(std::exp(-std::abs(z)));
  }
  const double n = static_cast<double>(labels.size());
  std::vector<int> y(labels.begin(), labels.end());
  return logits.tape().record("bce_with_logits", Tensor::scalar(total / n), {logits},
                              [y, n](const BackwardContext& ctx) {
                                Tensor* g = ctx.grad(0);
                                if (!g) return;
                                const double go = ctx.output_grad[0] / n;
                                const Tensor& z = ctx.input(0);
                                for (std::size_t r = 0; r < y.size(); ++r)
                                  (*g)[r] += go * (kernels::sigmoid(z[r]) - y[r]);
                              });
}

}  // namespace expctr::numerics
