#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "expctr/ctr/metrics.hpp"
#include "expctr/lm/inference.hpp"
#include "expctr/numerics/kernels.hpp"
#include "expctr/numerics/ops.hpp"

namespace {

using namespace expctr;
using numerics::Tensor;

lm::ModelConfig bench_model() {
  lm::ModelConfig cfg;
  cfg.vocab = 38;
  return cfg;
}

std::vector<lm::TokenId> random_tokens(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<lm::TokenId> pick(0, static_cast<lm::TokenId>(vocab - 1));
  std::vector<lm::TokenId> out(n);
  for (auto& t : out) t = pick(rng);
  return out;
}

void BM_AffineRow(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Tensor w({d, d});
  for (double& v : w.values()) v = g(rng);
  std::vector<double> x(d, 0.5), b(d, 0.1), out(d);
  for (auto _ : state) {
    numerics::kernels::affine_row(x, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d * d));
}
BENCHMARK(BM_AffineRow)->Arg(32)->Arg(64)->Arg(128);

void BM_Generate(benchmark::State& state) {
  lm::BaseLanguageModel model(bench_model());
  lm::AdapterSet adapters(model.config(), {});
  const auto prompt = random_tokens(static_cast<std::size_t>(state.range(0)), 38, 2);
  lm::GenerationConfig gen;
  gen.max_tokens = 24;
  std::mt19937_64 rng(3);
  for (auto _ : state) {
    auto result = lm::generate(model, &adapters, prompt, gen, rng);
    benchmark::DoNotOptimize(result.tokens.data());
  }
}
BENCHMARK(BM_Generate)->Arg(64)->Arg(160)->Unit(benchmark::kMillisecond);

void BM_TapeForwardBackward(benchmark::State& state) {
  lm::BaseLanguageModel model(bench_model());
  model.set_trainable(false);
  lm::AdapterSet adapters(model.config(), {});
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto tokens = random_tokens(n, 38, 4);
  const std::vector<lm::TokenId> targets(tokens.begin() + 1, tokens.end());
  for (auto _ : state) {
    numerics::Tape tape;
    auto fwd = lm::forward(tape, model, &adapters, std::span(tokens).first(n - 1));
    auto loss = numerics::mean(lm::token_logprobs(fwd.logits, targets));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.size());
  }
}
BENCHMARK(BM_TapeForwardBackward)->Arg(64)->Arg(184)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  std::vector<double> p(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = u(rng);
    y[i] = u(rng) < p[i] ? 1 : 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(ctr::auc(p, y));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
