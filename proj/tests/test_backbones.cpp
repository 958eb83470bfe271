#include <doctest.h>

#include <cmath>
#include <random>

#include "ehalt/backbones.hpp"
#include "ehalt/model.hpp"
#include "ehalt/ops.hpp"

using namespace ehalt;

namespace {

std::vector<double> random_series(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::vector<double> v(n);
  for (auto& x : v) x = n01(rng);
  return v;
}

}  // namespace

TEST_CASE("lstm_step with zero parameters gives zero hidden state") {
  std::mt19937_64 rng(1);
  LstmConfig cfg{2, 4, 1};
  StackedLstmBackbone lstm(cfg, rng);
  NamedParams params;
  lstm.named_params(params);
  for (auto& [name, p] : params)
    std::fill(p.mutable_values().begin(), p.mutable_values().end(), 0.0);
  auto [h, st] = lstm.step(Tensor::leaf(Shape{1}, {2.5}), lstm.initial_state());
  for (std::size_t i = 0; i < h.numel(); ++i) CHECK(h.at(i) == 0.0);
}

TEST_CASE("lstm_step is pure in (input, state)") {
  std::mt19937_64 rng(2);
  StackedLstmBackbone lstm(LstmConfig{2, 6, 1}, rng);
  LstmState st = lstm.initial_state();
  Tensor x = Tensor::leaf(Shape{1}, {0.4});
  auto [h1, s1] = lstm.step(x, st);
  auto [h2, s2] = lstm.step(x, st);
  for (std::size_t i = 0; i < h1.numel(); ++i) CHECK(h1.at(i) == h2.at(i));
}

TEST_CASE("lstm_step rejects wrong input dim") {
  std::mt19937_64 rng(3);
  StackedLstmBackbone lstm(LstmConfig{1, 4, 2}, rng);
  CHECK_THROWS_AS(lstm.step(Tensor::leaf(Shape{1}, {0.0}), lstm.initial_state()),
                  std::invalid_argument);
}

TEST_CASE("lstm gradient check through 3 unrolled steps") {
  std::mt19937_64 rng(4);
  LstmConfig cfg{1, 3, 1};
  std::vector<double> xs = random_series(3, rng);
  (void)cfg;
  auto build = [&xs](const std::vector<Tensor>& leaves) {
    // single-layer LSTM unrolled by hand so the parameters are graph leaves
    LstmState st;
    const std::size_t r = 3;
    st.h = {Tensor::zeros(Shape{r})};
    st.c = {Tensor::zeros(Shape{r})};
    Tensor h;
    for (double xv : xs) {
      Tensor in = concat_features({Tensor::leaf(Shape{1}, {xv}), st.h[0]});
      Tensor z = linear(reshape(in, Shape{1, in.numel()}), leaves[0], leaves[1]);
      Tensor i = sigmoid(reshape(slice_cols(z, 0, r), Shape{r}));
      Tensor f = sigmoid(reshape(slice_cols(z, r, r), Shape{r}));
      Tensor g = ehalt::tanh(reshape(slice_cols(z, 2 * r, r), Shape{r}));
      Tensor o = sigmoid(reshape(slice_cols(z, 3 * r, r), Shape{r}));
      Tensor c = add(mul(f, st.c[0]), mul(i, g));
      h = mul(o, ehalt::tanh(c));
      st.h[0] = h;
      st.c[0] = c;
    }
    return sum(h);
  };
  std::mt19937_64 init(5);
  Tensor w = init_uniform(Shape{4, 12}, 4, init);
  Tensor b = init_uniform(Shape{12}, 4, init);
  CHECK(check_gradients(build, {w, b}) < 1e-4);
}

TEST_CASE("fused lstm prefix_features agrees with step-by-step unroll") {
  std::mt19937_64 rng(6);
  LstmConfig cfg{2, 5, 1};
  StackedLstmBackbone lstm(cfg, rng);
  const std::size_t n = 9;
  auto xs = random_series(n, rng);

  Tensor all = lstm.prefix_features(xs, n, false, nullptr);
  LstmState st = lstm.initial_state();
  for (std::size_t t = 0; t < n; ++t) {
    auto [h, next] =
        lstm.step(Tensor::leaf(Shape{1}, {xs[t]}), st);
    st = std::move(next);
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(all.at(t * 5 + j) == doctest::Approx(h.at(j)).epsilon(1e-12));
  }
}

TEST_CASE("fused lstm backward matches central differences") {
  std::mt19937_64 rng(7);
  LstmConfig cfg{2, 3, 1};
  const std::size_t n = 5;
  auto xs = random_series(n, rng);
  StackedLstmBackbone net(cfg, rng);
  NamedParams params;
  net.named_params(params);
  // weight rows unevenly so every timestep matters
  std::vector<double> wv(n * 3);
  for (std::size_t i = 0; i < wv.size(); ++i) wv[i] = 0.1 * double(i % 7) - 0.3;
  auto loss_value = [&] {
    Tensor h = net.prefix_features(xs, n, false, nullptr);
    return sum(mul(h, Tensor::leaf(Shape{n, 3}, wv)));
  };
  Tensor loss = loss_value();
  backward(loss);
  double worst = 0.0;
  for (auto& [name, p] : params) {
    const auto analytic = p.grad();
    auto& vals = p.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      const double step = 1e-5;
      vals[i] = saved + step;
      const double up = loss_value().item();
      vals[i] = saved - step;
      const double dn = loss_value().item();
      vals[i] = saved;
      const double numeric = (up - dn) / (2 * step);
      const double denom =
          std::max(1e-6, std::max(std::fabs(analytic[i]), std::fabs(numeric)));
      worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("conv backbone shapes and t=0 prefix") {
  std::mt19937_64 rng(8);
  ConvShapeletConfig cfg;
  cfg.num_blocks = 2;
  cfg.kernels_per_block = 3;
  cfg.width_step = 2;
  ConvShapeletBackbone conv(cfg, rng);
  CHECK(conv.feature_dim() == 6);  // L·d exactly

  const std::size_t n = 7;
  auto xs = random_series(n, rng);
  Tensor h0 = conv.features_at(xs, n, 0, false, nullptr);
  CHECK(h0.numel() == 6);
  CHECK_THROWS_AS(conv.features_at(xs, n, n, false, nullptr),
                  std::out_of_range);
}

TEST_CASE("conv prefix features match per-t recomputation (inference)") {
  std::mt19937_64 rng(9);
  ConvShapeletConfig cfg;
  cfg.num_blocks = 3;
  cfg.kernels_per_block = 2;
  cfg.width_step = 2;
  ConvShapeletBackbone conv(cfg, rng);
  const std::size_t n = 10;
  auto xs = random_series(n, rng);
  Tensor all = conv.prefix_features(xs, n, false, nullptr);
  for (std::size_t t = 0; t < n; ++t) {
    Tensor one = conv.features_at(xs, n, t, false, nullptr);
    for (std::size_t d = 0; d < one.numel(); ++d)
      CHECK(all.at(t * one.numel() + d) == one.at(d));
  }
}

TEST_CASE("N=1 prefix works in inference mode") {
  std::mt19937_64 rng(10);
  ConvShapeletConfig cfg;
  cfg.num_blocks = 1;
  cfg.kernels_per_block = 2;
  ConvShapeletBackbone conv(cfg, rng);
  Tensor h = conv.prefix_features({0.7}, 1, false, nullptr);
  CHECK(h.shape() == Shape{1, 2});

  StackedLstmBackbone lstm(LstmConfig{1, 3, 1}, rng);
  CHECK(lstm.prefix_features({0.7}, 1, false, nullptr).shape() == Shape{1, 3});
  CHECK_THROWS_AS(lstm.prefix_features({}, 0, false, nullptr),
                  std::invalid_argument);
}

TEST_CASE("both backbones are strictly causal through the model") {
  std::mt19937_64 rng(11);
  const std::size_t n = 12;
  auto xs = random_series(n, rng);
  for (auto kind : {BackboneKind::kConvShapelet, BackboneKind::kStackedLstm}) {
    ModelConfig mc;
    mc.kind = kind;
    mc.num_classes = 3;
    mc.conv = {2, 3, 2, 1, 0.5};
    mc.lstm = {2, 4, 1};
    Model model(mc, 99);
    auto f0 = model.forward(xs, n, false, nullptr);
    std::uniform_int_distribution<std::size_t> pick(1, n - 1);
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t tp = pick(rng);
      auto perturbed = xs;
      perturbed[tp] += 2.0;
      auto f1 = model.forward(perturbed, n, false, nullptr);
      const std::size_t hdim = f0.hidden.shape()[1];
      for (std::size_t t = 0; t < tp; ++t) {
        for (std::size_t d = 0; d < hdim; ++d)
          CHECK(f0.hidden.at(t * hdim + d) == f1.hidden.at(t * hdim + d));
        for (int c = 0; c < 3; ++c)
          CHECK(f0.probs.at(t * 3 + std::size_t(c)) ==
                f1.probs.at(t * 3 + std::size_t(c)));
        CHECK(f0.delta.at(t) == f1.delta.at(t));
      }
    }
  }
}

TEST_CASE("full conv backbone gradient check at N=8") {
  std::mt19937_64 rng(12);
  ConvShapeletConfig cfg;
  cfg.num_blocks = 2;
  cfg.kernels_per_block = 2;
  cfg.width_step = 2;
  cfg.dropout_rate = 0.0;  // keep the graph deterministic for the check
  ConvShapeletBackbone conv(cfg, rng);
  const std::size_t n = 8;
  auto xs = random_series(n, rng);
  NamedParams params;
  conv.named_params(params);
  // avoid argmax flips from the perturbation: de-tie with a forward pass
  Tensor h = conv.prefix_features(xs, n, true, nullptr);
  backward(sum(ehalt::tanh(h)));
  double worst = 0.0;
  for (auto& [name, p] : params) {
    const auto analytic = p.grad();
    auto& vals = p.mutable_values();
    // save running stats so each rebuild starts identically
    for (std::size_t i = 0; i < vals.size(); ++i) {
      auto bn_mean = conv.bn_state().running_mean;
      auto bn_var = conv.bn_state().running_var;
      const double saved = vals[i];
      const double step = 1e-5;
      vals[i] = saved + step;
      const double up =
          sum(ehalt::tanh(conv.prefix_features(xs, n, true, nullptr))).item();
      vals[i] = saved - step;
      const double dn =
          sum(ehalt::tanh(conv.prefix_features(xs, n, true, nullptr))).item();
      vals[i] = saved;
      conv.bn_state().running_mean = bn_mean;
      conv.bn_state().running_var = bn_var;
      const double numeric = (up - dn) / (2e-5);
      // absolute differences below 1e-7 are pool-tie / finite-difference
      // noise, not gradient errors
      if (std::fabs(analytic[i] - numeric) <= 1e-7) continue;
      const double denom =
          std::max(1e-6, std::max(std::fabs(analytic[i]), std::fabs(numeric)));
      worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("classify head: uniform at zero weights, shift invariance") {
  std::mt19937_64 rng(13);
  ModelConfig mc;
  mc.kind = BackboneKind::kConvShapelet;
  mc.num_classes = 4;
  mc.conv = {1, 3, 2, 1, 0.5};
  Model model(mc, 7);
  std::fill(model.cls_weight().mutable_values().begin(),
            model.cls_weight().mutable_values().end(), 0.0);
  std::fill(model.cls_bias().mutable_values().begin(),
            model.cls_bias().mutable_values().end(), 0.0);
  auto xs = random_series(6, rng);
  auto f = model.forward(xs, 6, false, nullptr);
  for (std::size_t t = 0; t < 6; ++t) {
    double s = 0.0;
    for (int c = 0; c < 4; ++c) {
      CHECK(f.probs.at(t * 4 + std::size_t(c)) == doctest::Approx(0.25));
      s += f.probs.at(t * 4 + std::size_t(c));
    }
    CHECK(std::fabs(s - 1.0) <= 1e-12);
  }

  // adding a constant to every logit does not move the argmax
  Tensor logits = Tensor::leaf(Shape{1, 4}, {0.3, -1.0, 2.0, 0.1});
  Tensor shifted = add_scalar(logits, 13.7);
  Tensor p1 = softmax_rows(logits);
  Tensor p2 = softmax_rows(shifted);
  std::size_t a1 = 0, a2 = 0;
  for (std::size_t c = 1; c < 4; ++c) {
    if (p1.at(c) > p1.at(a1)) a1 = c;
    if (p2.at(c) > p2.at(a2)) a2 = c;
  }
  CHECK(a1 == a2);
}

TEST_CASE("conv config invariants") {
  ConvShapeletConfig cfg;
  cfg.width_step = 5;
  CHECK(cfg.kernel_width(0) == 5);
  CHECK(cfg.kernel_width(3) == 20);
  std::mt19937_64 rng(14);
  ConvShapeletConfig bad;
  bad.num_blocks = 0;
  CHECK_THROWS_AS(ConvShapeletBackbone(bad, rng), std::invalid_argument);
  CHECK_THROWS_AS(StackedLstmBackbone(LstmConfig{0, 4, 1}, rng),
                  std::invalid_argument);
}
