#pragma once

#include <vector>

#include "ehalt/tensor.hpp"

namespace ehalt {

struct TradeOff {
  double alpha = 0.5;  // weight of the classification component
};

struct DecisionOutcome {
  int predicted = 0;
  int truth = 0;
  int t = 0;        // decision index
  int horizon = 0;  // final index T (length - 1)
};

// α·[predicted != truth] + (1-α)·t/T; the earliness term is 0 when T == 0.
double evaluation_cost(const DecisionOutcome& o, TradeOff a);

// t/T, 0 when T == 0.
double earliness_loss(int t, int horizon);

// 1 - ŷ⁺ for the true class. probs is a [C] probability row.
Tensor linear_class_loss(const Tensor& probs, int label);

// -log softmax(logits)[label] from a [C] (or [1×C]) logit row, via
// log-sum-exp.
Tensor cross_entropy_loss(const Tensor& logits, int label);

// Eq.-style per-decision loss: α·(1-ŷ⁺) + (1-α)·t/T.
Tensor decision_loss(const Tensor& probs, int label, int t, int horizon,
                     TradeOff a);

// Halting-weighted expectation Σ_t P(t)·[α·L_c(t) + (1-α)·t/T].
// halt_prob and class_losses are [N]; horizon is N-1.
Tensor expected_loss(const Tensor& halt_prob, const Tensor& class_losses,
                     TradeOff a);

// The two logged components of expected_loss: Σ P·L_c and Σ P·L_e.
struct LossComponents {
  double classification = 0.0;
  double earliness = 0.0;
};
LossComponents expected_loss_components(const std::vector<double>& halt_prob,
                                        const std::vector<double>& class_losses);

// Constant earliness vector (0/T, 1/T, ..., T/T) as a non-learnable leaf.
Tensor earliness_vector(std::size_t n);

}  // namespace ehalt
