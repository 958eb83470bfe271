#include "ehalt/halting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ehalt/ops.hpp"

namespace ehalt {

namespace {
constexpr double kDeltaClamp = 1e-7;
}

HaltingTrace make_halting_trace(std::vector<double> delta) {
  if (delta.empty())
    throw std::invalid_argument("make_halting_trace: empty delta sequence");
  for (double d : delta)
    if (!(d >= 0.0 && d <= 1.0))
      throw std::invalid_argument("make_halting_trace: delta outside [0,1]");
  const std::size_t n = delta.size();
  delta[n - 1] = 1.0;

  HaltingTrace tr;
  tr.delta = std::move(delta);
  tr.budget.resize(n);
  tr.halt_prob.resize(n);
  double b_prev = 1.0;  // B_{-1}
  for (std::size_t t = 0; t < n; ++t) {
    tr.halt_prob[t] = tr.delta[t] * b_prev;
    b_prev *= 1.0 - tr.delta[t];
    tr.budget[t] = b_prev;
  }
  return tr;
}

Tensor halting_probabilities(const Tensor& delta) {
  if (delta.shape().rank() != 1)
    throw std::invalid_argument("halting_probabilities: expected rank-1 input");
  const std::size_t n = delta.numel();
  if (n == 0)
    throw std::invalid_argument("halting_probabilities: empty delta sequence");

  std::vector<double> d(n);
  for (std::size_t t = 0; t + 1 < n; ++t)
    d[t] = std::clamp(delta.at(t), kDeltaClamp, 1.0 - kDeltaClamp);
  d[n - 1] = 1.0;

  std::vector<double> p(n), b_prev(n);  // b_prev[t] = B_{t-1}
  double b = 1.0;
  for (std::size_t t = 0; t < n; ++t) {
    b_prev[t] = b;
    p[t] = d[t] * b;
    b *= 1.0 - d[t];
  }

  std::vector<double> pv = p;
  return Tensor::from_op(
      Shape{n}, std::move(pv), {delta},
      [d = std::move(d), p = std::move(p), b_prev = std::move(b_prev),
       n](detail::Node& node) {
        detail::Node& pd = *node.parents[0];
        if (!pd.requires_grad) return;
        detail::ensure_grad(pd);
        // dP_t/dδ_s = B_{s-1}            for s == t
        //           = -P_t / (1-δ_s)     for s < t
        // suffix[s] = Σ_{t>s} g_t·P_t, accumulated right to left.
        double suffix = 0.0;
        for (std::size_t s = n; s-- > 0;) {
          if (s + 1 < n) {
            const double raw = pd.values[s];
            if (raw > kDeltaClamp && raw < 1.0 - kDeltaClamp)
              pd.grad[s] +=
                  node.grad[s] * b_prev[s] - suffix / (1.0 - d[s]);
          }
          suffix += node.grad[s] * p[s];
        }
      });
}

Tensor stop_probability(const Tensor& h, const Tensor& weight,
                        const Tensor& bias) {
  Tensor x = reshape(h, Shape{1, h.numel()});
  Tensor z = linear(x, weight, bias);  // [1×1]
  return reshape(sigmoid(z), Shape{1});
}

void init_late(Tensor& stop_weight, Tensor& stop_bias) {
  std::fill(stop_weight.mutable_values().begin(),
            stop_weight.mutable_values().end(), 0.0);
  std::fill(stop_bias.mutable_values().begin(), stop_bias.mutable_values().end(),
            -5.0);
}

StopMode parse_stop_mode(const std::string& name) {
  if (name == "bernoulli") return StopMode::kBernoulli;
  if (name == "threshold") return StopMode::kThresholdHalf;
  if (name == "expected") return StopMode::kExpectedTime;
  throw std::invalid_argument("unknown stop mode: " + name);
}

std::string stop_mode_name(StopMode mode) {
  switch (mode) {
    case StopMode::kBernoulli:
      return "bernoulli";
    case StopMode::kThresholdHalf:
      return "threshold";
    case StopMode::kExpectedTime:
      return "expected";
  }
  return "?";
}

int sample_stop(const HaltingTrace& trace, StopMode mode,
                std::mt19937_64& rng) {
  const std::size_t n = trace.delta.size();
  switch (mode) {
    case StopMode::kBernoulli: {
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      for (std::size_t t = 0; t + 1 < n; ++t)
        if (uni(rng) < trace.delta[t]) return int(t);
      return int(n - 1);  // δ_T = 1
    }
    case StopMode::kThresholdHalf: {
      for (std::size_t t = 0; t < n; ++t)
        if (trace.delta[t] >= 0.5) return int(t);
      return int(n - 1);
    }
    case StopMode::kExpectedTime: {
      double e = 0.0;
      for (std::size_t t = 0; t < n; ++t) e += double(t) * trace.halt_prob[t];
      return int(std::lround(std::min(e, double(n - 1))));
    }
  }
  return int(n - 1);
}

}  // namespace ehalt
