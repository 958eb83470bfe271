#pragma once

#include <random>
#include <vector>

#include "ehalt/tensor.hpp"

namespace ehalt {

// Per-timestep stop probabilities, the surviving budget, and the halting
// distribution for one series.
struct HaltingTrace {
  std::vector<double> delta;      // δ_0..δ_T, δ_T forced to 1
  std::vector<double> budget;     // B_t = Π_{τ<=t} (1-δ_τ), B_T = 0
  std::vector<double> halt_prob;  // P(t) = δ_t · B_{t-1}, sums to 1
};

// Numeric trace from raw stop probabilities. The final entry is overridden to
// exactly 1 so the remaining budget is consumed and P sums to one.
HaltingTrace make_halting_trace(std::vector<double> delta);

// Differentiable halting distribution over a [N] vector of stop
// probabilities. The final δ is hard-set to 1 (no gradient through it); the
// others are clamped to [1e-7, 1-1e-7] inside the budget products.
Tensor halting_probabilities(const Tensor& delta);

// Scalar stop probability head: sigmoid(weight·h + bias).
// h [D], weight [D×1], bias [1].
Tensor stop_probability(const Tensor& h, const Tensor& weight,
                        const Tensor& bias);

// Late-stopping initialization: weights zeroed, bias set to -5, so the
// initial halting mass concentrates on the last observations.
void init_late(Tensor& stop_weight, Tensor& stop_bias);

enum class StopMode { kBernoulli, kThresholdHalf, kExpectedTime };

StopMode parse_stop_mode(const std::string& name);
std::string stop_mode_name(StopMode mode);

// Decision time in [0, N-1]. Bernoulli mode draws stop ~ Bernoulli(δ_t) in
// order; threshold mode stops at the first δ_t >= 0.5; expected-time mode
// returns round(Σ t·P(t)).
int sample_stop(const HaltingTrace& trace, StopMode mode, std::mt19937_64& rng);

}  // namespace ehalt
