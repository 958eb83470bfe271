#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ehalt/backbones.hpp"
#include "ehalt/halting.hpp"
#include "ehalt/model.hpp"
#include "ehalt/objective.hpp"
#include "ehalt/ops.hpp"

using namespace ehalt;

namespace {

std::vector<double> random_series(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::vector<double> v(n);
  for (auto& x : v) x = n01(rng);
  return v;
}

void bm_halting_trace(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> d(std::size_t(state.range(0)));
  for (auto& v : d) v = uni(rng);
  for (auto _ : state) {
    auto tr = make_halting_trace(d);
    benchmark::DoNotOptimize(tr.halt_prob.data());
  }
}
BENCHMARK(bm_halting_trace)->Arg(100)->Arg(1000);

void bm_halting_backward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uni(0.1, 0.9);
  const std::size_t n = std::size_t(state.range(0));
  std::vector<double> d(n), c(n);
  for (auto& v : d) v = uni(rng);
  for (auto& v : c) v = uni(rng);
  Tensor cost = Tensor::leaf(Shape{n}, c);
  for (auto _ : state) {
    Tensor delta = Tensor::leaf(Shape{n}, d, true);
    backward(dot(cost, halting_probabilities(delta)));
    benchmark::DoNotOptimize(delta.grad().data());
  }
}
BENCHMARK(bm_halting_backward)->Arg(100)->Arg(1000);

void bm_conv_forward(benchmark::State& state) {
  std::mt19937_64 rng(3);
  ConvShapeletConfig cfg;  // paper-style desk defaults
  ConvShapeletBackbone conv(cfg, rng);
  auto xs = random_series(std::size_t(state.range(0)), rng);
  for (auto _ : state) {
    Tensor h = conv.prefix_features(xs, xs.size(), false, nullptr);
    benchmark::DoNotOptimize(h.values().data());
  }
}
BENCHMARK(bm_conv_forward)->Arg(100)->Arg(300);

void bm_lstm_forward_backward(benchmark::State& state) {
  std::mt19937_64 rng(4);
  LstmConfig cfg{2, 32, 1};
  StackedLstmBackbone net(cfg, rng);
  auto xs = random_series(std::size_t(state.range(0)), rng);
  for (auto _ : state) {
    Tensor h = net.prefix_features(xs, xs.size(), false, nullptr);
    backward(mean(h));
    benchmark::DoNotOptimize(h.values().data());
  }
}
BENCHMARK(bm_lstm_forward_backward)->Arg(100)->Arg(300);

void bm_model_train_step(benchmark::State& state) {
  std::mt19937_64 rng(5);
  ModelConfig mc;
  mc.kind = BackboneKind::kConvShapelet;
  mc.num_classes = 2;
  Model model(mc, 5);
  LabeledSeries s;
  s.length = 100;
  s.dim = 1;
  s.values = random_series(100, rng);
  s.label = 0;
  for (auto _ : state) {
    auto fwd = model.forward_batch({&s, &s}, true, &rng);
    Tensor p = halting_probabilities(fwd[0].delta);
    Tensor lc = add_scalar(scale(pick_col(fwd[0].probs, 0), -1.0), 1.0);
    backward(expected_loss(p, lc, TradeOff{0.8}));
    for (auto& [name, t] : model.named_parameters()) t.zero_grad();
  }
}
BENCHMARK(bm_model_train_step);

}  // namespace

BENCHMARK_MAIN();
