#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expctr/numerics/grad_check.hpp"
#include "expctr/numerics/ops.hpp"
#include "expctr/numerics/optimizer.hpp"

namespace expctr::numerics {
namespace {

Tensor random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor t({rows, cols});
  for (double& v : t.values()) v = dist(rng);
  return t;
}

TEST(Ops, SigmoidAtZeroIsHalf) {
  Tape tape;
  Var x = tape.constant(Tensor::scalar(0.0));
  EXPECT_EQ(sigmoid(x).value().item(), 0.5);
}

TEST(Ops, SoftmaxOfEqualLogitsIsUniform) {
  for (double c : {-40.0, 0.0, 3.5, 700.0}) {
    Tape tape;
    Var x = tape.constant(Tensor::row({c, c}));
    const Tensor& y = softmax_rows(x).value();
    EXPECT_EQ(y[0], 0.5);
    EXPECT_EQ(y[1], 0.5);
  }
}

TEST(Ops, MeanPoolOfSingleRowIsIdentity) {
  Tape tape;
  Tensor row = Tensor::matrix(1, 3, {1.25, -2.0, 7.5});
  EXPECT_EQ(mean_pool(tape.constant(row)).value().values()[2], 7.5);
  EXPECT_EQ(mean_pool(tape.constant(row)).value(), Tensor::matrix(1, 3, {1.25, -2.0, 7.5}));
}

TEST(Ops, ShapeMismatchNamesTheOp) {
  Tape tape;
  Var a = tape.constant(Tensor::zeros(2, 3));
  Var b = tape.constant(Tensor::zeros(4, 5));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(causal_attention(a, a, a, 2), ShapeError);
}

TEST(Ops, EmbeddingRejectsUnknownId) {
  Tape tape;
  Var table = tape.constant(Tensor::zeros(4, 2));
  std::vector<std::size_t> ids{1, 4};
  EXPECT_THROW(embedding(table, ids), ShapeError);
}

TEST(Backward, SquareHasDerivativeSixAtThree) {
  Parameter x("x", Tensor::scalar(3.0));
  Tape tape;
  Var v = tape.parameter(x);
  tape.backward(mul(v, v));
  // Central finite difference oracle with step 1e-4.
  const double h = 1e-4;
  const double numeric = ((3.0 + h) * (3.0 + h) - (3.0 - h) * (3.0 - h)) / (2 * h);
  EXPECT_NEAR(x.grad.item(), 6.0, 1e-12);
  EXPECT_NEAR(x.grad.item(), numeric, 1e-8);
}

TEST(Backward, ConstantGraphGivesZeroGradients) {
  Parameter w("w", Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Tape tape;
  tape.parameter(w);
  Var c = tape.constant(Tensor::matrix(1, 2, {5, 6}));
  tape.backward(sum(c));
  for (double g : w.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, CrossEntropyGradientVanishesAtPerfectPrediction) {
  Parameter logits("logits", Tensor::matrix(1, 3, {60.0, 0.0, 0.0}));
  Tape tape;
  std::vector<std::size_t> target{0};
  tape.backward(cross_entropy(tape.parameter(logits), target));
  for (double g : logits.grad.values()) EXPECT_LT(std::abs(g), 1e-9);
  // Finite-difference oracle agrees.
  const double h = 1e-4;
  auto loss = [](double z0) { return -(z0 - std::log(std::exp(z0) + 2.0)); };
  EXPECT_LT(std::abs((loss(60.0 + h) - loss(60.0 - h)) / (2 * h)), 1e-9);
}

TEST(Backward, RejectsVariableFromAnotherForwardPass) {
  Tape tape;
  Parameter p("p", Tensor::scalar(1.0));
  Var out = mul(tape.parameter(p), tape.parameter(p));
  tape.clear();
  EXPECT_THROW(tape.backward(out), std::logic_error);
  Tape other;
  EXPECT_THROW(other.backward(out), std::logic_error);
  EXPECT_THROW(Var().value(), std::logic_error);
}

TEST(Backward, FrozenParametersAreUntouched) {
  Parameter frozen("frozen", Tensor::scalar(2.0), false);
  Parameter live("live", Tensor::scalar(3.0));
  Tape tape;
  tape.backward(mul(tape.parameter(frozen), tape.parameter(live)));
  EXPECT_EQ(frozen.grad.item(), 0.0);
  EXPECT_EQ(live.grad.item(), 2.0);
}

TEST(Forward, IsBitIdenticalAcrossRuns) {
  std::mt19937_64 rng(11);
  Tensor x = random_matrix(rng, 5, 8);
  Tensor w = random_matrix(rng, 8, 8);
  auto run = [&] {
    Tape tape;
    Var h = layer_norm(tape.constant(x), tape.constant(Tensor({8}, 1.0)), tape.constant(Tensor({8})));
    Var q = matmul(h, tape.constant(w));
    return softmax_rows(causal_attention(q, q, q, 2)).value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Forward, SoftmaxRowsSumToOneAndSigmoidStaysInside) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    Tensor x = random_matrix(rng, 4, 17, 10.0);
    const Tensor& s = softmax_rows(tape.constant(x)).value();
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double total = 0.0;
      for (double v : s.row(r)) total += v;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    const Tensor& y = sigmoid(tape.constant(x)).value();
    for (double v : y.values()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

// Builds a graph touching every primitive from the set the models use.
struct ComposedGraph {
  Parameter emb, w1, b1, gain, bias, wq, wk, wv, w2, b2;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> targets;
  std::vector<int> labels;

  explicit ComposedGraph(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    emb = Parameter("emb", random_matrix(rng, 7, 6, 0.7));
    w1 = Parameter("w1", random_matrix(rng, 6, 8, 0.5));
    b1 = Parameter("b1", random_matrix(rng, 1, 8, 0.1));
    gain = Parameter("gain", random_matrix(rng, 1, 8, 0.3));
    for (double& g : gain.value.values()) g += 1.0;
    bias = Parameter("bias", random_matrix(rng, 1, 8, 0.1));
    wq = Parameter("wq", random_matrix(rng, 8, 8, 0.4));
    wk = Parameter("wk", random_matrix(rng, 8, 8, 0.4));
    wv = Parameter("wv", random_matrix(rng, 8, 8, 0.4));
    w2 = Parameter("w2", random_matrix(rng, 16, 7, 0.4));
    b2 = Parameter("b2", random_matrix(rng, 1, 7, 0.1));
    std::uniform_int_distribution<std::size_t> tok(0, 6);
    for (int i = 0; i < 5; ++i) ids.push_back(tok(rng));
    for (int i = 0; i < 5; ++i) targets.push_back(tok(rng));
    labels = {1, 0, 1, 1, 0};
  }

  ParameterRefs params() { return {&emb, &w1, &b1, &gain, &bias, &wq, &wk, &wv, &w2, &b2}; }

  Var build(Tape& tape) {
    Var x = embedding(tape.parameter(emb), ids);
    Var h = gelu(affine(x, tape.parameter(w1), tape.parameter(b1)));
    Var n = layer_norm(h, tape.parameter(gain), tape.parameter(bias));
    Var att = causal_attention(matmul(n, tape.parameter(wq)), matmul(n, tape.parameter(wk)),
                               matmul(n, tape.parameter(wv)), 2);
    Var both = concat_cols({att, sigmoid(n)});
    Var logits = affine(both, tape.parameter(w2), tape.parameter(b2));
    Var ce = cross_entropy(logits, targets);
    Var pooled = mean_pool(softmax_rows(logits));
    Var logit_col = dot_rows(att, n);
    Var bce = bce_with_logits(logit_col, labels);
    std::vector<std::size_t> rows{0, 2, 4}, cols{1, 3, 5};
    Var picked = pick(log_softmax_rows(logits), rows, cols);
    Var ratio = exp(scale(picked, 0.1));
    Var clipped = minimum(mul(ratio, ratio), clamp(ratio, 0.2, 5.0));
    return add(add(add(ce, bce), add(mean(square(pooled)), sum(clipped))), sum(relu(slice_rows(att, 1, 2))));
  }
};

class ComposedGradCheck : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(ComposedGradCheck, AgreesWithFiniteDifferences) {
  ComposedGraph g(GetParam());
  auto result = grad_check([&](Tape& t) { return g.build(t); }, g.params(), 1e-4);
  EXPECT_LT(result.max_relative_error, 1e-4) << result.worst_parameter;
  EXPECT_GT(result.elements_checked, 100u);
}

INSTANTIATE_TEST_SUITE_P(Seeds, ComposedGradCheck, ::testing::Values(1, 2, 3, 4, 5));

TEST(GradCheck, LinearGraphIsExact) {
  std::mt19937_64 rng(9);
  Parameter w("W", random_matrix(rng, 4, 3));
  Tensor x = random_matrix(rng, 1, 4);
  auto result = grad_check([&](Tape& t) { return matmul(t.constant(x), t.parameter(w)); }, {&w}, 1e-4);
  EXPECT_LT(result.max_relative_error, 1e-8);
}

TEST(GradCheck, AllFrozenPassesVacuously) {
  Parameter w("W", Tensor::matrix(1, 1, {2.0}), false);
  auto result = grad_check([&](Tape& t) { return square(t.parameter(w)); }, {&w}, 1e-4);
  EXPECT_EQ(result.elements_checked, 0u);
  EXPECT_EQ(result.max_relative_error, 0.0);
}

TEST(GradCheck, RejectsBadStepAndReportsNonFinite) {
  Parameter w("weird", Tensor::scalar(0.0));
  auto graph = [&](Tape& t) { return scale(t.parameter(w), 1.0); };
  EXPECT_THROW(grad_check(graph, {&w}, 0.0), std::invalid_argument);
  EXPECT_THROW(grad_check(graph, {&w}, 0.02), std::invalid_argument);
  Parameter bad("bad_param", Tensor::scalar(800.0));
  try {
    grad_check([&](Tape& t) { return exp(t.parameter(bad)); }, {&bad}, 1e-4);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(Adam, ZeroGradientLeavesValuesExactlyUnchanged) {
  Parameter p("p", Tensor::matrix(1, 3, {0.1, -2.0, 3.3}));
  Adam adam({&p}, {});
  const Tensor before = p.value;
  for (int i = 0; i < 5; ++i) adam.step();
  EXPECT_EQ(p.value, before);
  EXPECT_EQ(adam.state().step, 5u);
}

TEST(Adam, ConstantGradientMatchesScalarSimulation) {
  for (double g : {0.7, -0.3}) {
    Parameter p("p", Tensor::scalar(1.0));
    AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
    Adam adam({&p}, cfg);
    // Independent scalar recursion.
    double x = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 100; ++t) {
      p.grad[0] = g;
      adam.step();
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    }
    EXPECT_NEAR(p.value.item(), x, 1e-12);
    if (g > 0) EXPECT_LT(p.value.item(), 1.0);
    else EXPECT_GT(p.value.item(), 1.0);
  }
}

TEST(Adam, FrozenParameterIsNotUpdated) {
  Parameter p("frozen", Tensor::scalar(1.5), false);
  Adam adam({&p}, {});
  p.grad[0] = 4.0;
  adam.step();
  EXPECT_EQ(p.value.item(), 1.5);
}

TEST(Adam, NonFiniteGradientAbortsStep) {
  Parameter a("a", Tensor::scalar(1.0));
  Parameter b("b", Tensor::scalar(2.0));
  Adam adam({&a, &b}, {});
  a.grad[0] = 1.0;
  b.grad[0] = std::nan("");
  EXPECT_THROW(adam.step(), NonFiniteError);
  EXPECT_EQ(a.value.item(), 1.0);
  EXPECT_EQ(adam.state().step, 0u);
}

}  // namespace
}  // namespace expctr::numerics
