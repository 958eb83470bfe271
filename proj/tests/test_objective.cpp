#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ehalt/halting.hpp"
#include "ehalt/objective.hpp"
#include "ehalt/ops.hpp"

using namespace ehalt;

TEST_CASE("evaluation_cost closed forms") {
  CHECK(evaluation_cost({0, 0, 0, 10}, TradeOff{0.7}) == doctest::Approx(0.0));
  CHECK(evaluation_cost({1, 0, 10, 10}, TradeOff{0.7}) == doctest::Approx(1.0));
  CHECK(evaluation_cost({1, 0, 50, 100}, TradeOff{0.8}) ==
        doctest::Approx(0.9));
  // T = 0: earliness term defined as 0
  CHECK(evaluation_cost({1, 0, 0, 0}, TradeOff{0.8}) == doctest::Approx(0.8));
}

TEST_CASE("earliness_loss") {
  CHECK(earliness_loss(0, 10) == 0.0);
  CHECK(earliness_loss(10, 10) == 1.0);
  CHECK(earliness_loss(85, 100) == doctest::Approx(0.85));
  CHECK(earliness_loss(0, 0) == 0.0);
  CHECK_THROWS_AS(earliness_loss(5, 3), std::invalid_argument);
}

TEST_CASE("linear_class_loss") {
  CHECK(linear_class_loss(Tensor::leaf(Shape{2}, {1, 0}), 0).item() ==
        doctest::Approx(0.0));
  CHECK(linear_class_loss(Tensor::leaf(Shape{2}, {0, 1}), 0).item() ==
        doctest::Approx(1.0));
  CHECK(linear_class_loss(Tensor::leaf(Shape{4}, {0.25, 0.25, 0.25, 0.25}), 2)
            .item() == doctest::Approx(0.75));
  CHECK_THROWS_AS(linear_class_loss(Tensor::leaf(Shape{2}, {1, 0}), 2),
                  std::out_of_range);
}

TEST_CASE("cross_entropy_loss from logits") {
  // a strongly confident correct prediction
  CHECK(cross_entropy_loss(Tensor::leaf(Shape{2}, {50.0, 0.0}), 0).item() ==
        doctest::Approx(0.0).epsilon(1e-9));
  // uniform over C classes -> log C
  CHECK(cross_entropy_loss(Tensor::leaf(Shape{3}, {1.0, 1.0, 1.0}), 1).item() ==
        doctest::Approx(std::log(3.0)));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  std::vector<double> lv(4);
  for (auto& v : lv) v = n01(rng);
  auto build = [](const std::vector<Tensor>& leaves) {
    return cross_entropy_loss(leaves[0], 2);
  };
  CHECK(check_gradients(build, {Tensor::leaf(Shape{4}, lv, true)}) < 1e-6);
}

TEST_CASE("decision_loss reductions") {
  Tensor probs = Tensor::leaf(Shape{2}, {0.8, 0.2});
  CHECK(decision_loss(probs, 0, 3, 10, TradeOff{1.0}).item() ==
        doctest::Approx(linear_class_loss(probs, 0).item()));
  CHECK(decision_loss(probs, 0, 3, 10, TradeOff{0.0}).item() ==
        doctest::Approx(0.3));
  CHECK(decision_loss(probs, 0, 50, 100, TradeOff{0.8}).item() ==
        doctest::Approx(0.8 * 0.2 + 0.2 * 0.5));
}

TEST_CASE("expected_loss closed forms") {
  // P=[0.5,0.5], L_c=[0.2,0.0], L_e=[0,1], alpha=0.8 -> 0.18
  Tensor p = Tensor::leaf(Shape{2}, {0.5, 0.5});
  Tensor lc = Tensor::leaf(Shape{2}, {0.2, 0.0});
  CHECK(expected_loss(p, lc, TradeOff{0.8}).item() == doctest::Approx(0.18));

  // one-hot P reduces to the decision loss at that t
  Tensor onehot = Tensor::leaf(Shape{4}, {0, 0, 1, 0});
  Tensor lc4 = Tensor::leaf(Shape{4}, {0.9, 0.7, 0.4, 0.1});
  const double expect = 0.8 * 0.4 + 0.2 * (2.0 / 3.0);
  CHECK(expected_loss(onehot, lc4, TradeOff{0.8}).item() ==
        doctest::Approx(expect));

  // uniform P equals the arithmetic mean of per-prefix decision losses
  Tensor uni = Tensor::full(Shape{4}, 0.25);
  double acc = 0.0;
  for (int t = 0; t < 4; ++t)
    acc += 0.8 * lc4.at(std::size_t(t)) + 0.2 * earliness_loss(t, 3);
  CHECK(expected_loss(uni, lc4, TradeOff{0.8}).item() ==
        doctest::Approx(acc / 4.0));

  CHECK_THROWS_AS(
      expected_loss(p, Tensor::leaf(Shape{3}, {0, 0, 0}), TradeOff{0.5}),
      std::invalid_argument);
}

TEST_CASE("expected_loss stays in [0,1] for the linear class loss") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> d(6), l(6);
    for (auto& v : d) v = uni(rng);
    for (auto& v : l) v = uni(rng);
    auto tr = make_halting_trace(d);
    Tensor p = Tensor::leaf(Shape{6}, tr.halt_prob);
    Tensor lc = Tensor::leaf(Shape{6}, l);
    const double v = expected_loss(p, lc, TradeOff{uni(rng)}).item();
    CHECK(v >= -1e-12);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("expected_loss is a plain inner product (joint permutation)") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> d(5), l(5);
  for (auto& v : d) v = uni(rng);
  for (auto& v : l) v = uni(rng);
  auto tr = make_halting_trace(d);
  std::vector<double> e(5);
  for (int t = 0; t < 5; ++t) e[std::size_t(t)] = earliness_loss(t, 4);

  auto inner = [&](const std::vector<double>& p, const std::vector<double>& lc,
                   const std::vector<double>& le) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      s += p[i] * (0.6 * lc[i] + 0.4 * le[i]);
    return s;
  };
  const double base = inner(tr.halt_prob, l, e);
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<double> pp(5), lp(5), ep(5);
  for (std::size_t i = 0; i < 5; ++i) {
    pp[i] = tr.halt_prob[perm[i]];
    lp[i] = l[perm[i]];
    ep[i] = e[perm[i]];
  }
  CHECK(inner(pp, lp, ep) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("evaluation_cost equals one-hot expected_loss with 0/1 indicator") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> cls(0, 3);
  std::uniform_int_distribution<int> horizon(1, 20);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = horizon(rng);
    std::uniform_int_distribution<int> when(0, T);
    DecisionOutcome o{cls(rng), cls(rng), when(rng), T};
    const TradeOff a{0.37};
    std::vector<double> p(std::size_t(T) + 1, 0.0), lc(std::size_t(T) + 1, 0.0);
    p[std::size_t(o.t)] = 1.0;
    lc[std::size_t(o.t)] = o.predicted != o.truth ? 1.0 : 0.0;
    const double el = expected_loss(Tensor::leaf(Shape{p.size()}, p),
                                    Tensor::leaf(Shape{lc.size()}, lc), a)
                          .item();
    CHECK(evaluation_cost(o, a) == doctest::Approx(el).epsilon(1e-12));
  }
}
