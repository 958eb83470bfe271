#include "ehalt/objective.hpp"

#include <stdexcept>

#include "ehalt/ops.hpp"

namespace ehalt {

double evaluation_cost(const DecisionOutcome& o, TradeOff a) {
  if (o.t < 0 || o.t > o.horizon)
    throw std::invalid_argument("evaluation_cost: t outside [0, T]");
  const double miss = o.predicted != o.truth ? 1.0 : 0.0;
  return a.alpha * miss + (1.0 - a.alpha) * earliness_loss(o.t, o.horizon);
}

double earliness_loss(int t, int horizon) {
  if (t < 0 || t > horizon)
    throw std::invalid_argument("earliness_loss: t outside [0, T]");
  if (horizon == 0) return 0.0;
  return double(t) / double(horizon);
}

Tensor linear_class_loss(const Tensor& probs, int label) {
  if (label < 0 || std::size_t(label) >= probs.numel())
    throw std::out_of_range("linear_class_loss: class index out of range");
  Tensor flat = probs.shape().rank() == 1
                    ? probs
                    : reshape(probs, Shape{probs.numel()});
  Tensor onehot = Tensor::zeros(Shape{probs.numel()});
  onehot.mutable_values()[std::size_t(label)] = 1.0;
  return add_scalar(scale(dot(flat, onehot), -1.0), 1.0);
}

Tensor cross_entropy_loss(const Tensor& logits, int label) {
  Tensor m = logits.shape().rank() == 2
                 ? logits
                 : reshape(logits, Shape{1, logits.numel()});
  return reshape(cross_entropy_with_logits(m, std::size_t(label)), Shape{1});
}

Tensor decision_loss(const Tensor& probs, int label, int t, int horizon,
                     TradeOff a) {
  Tensor lc = linear_class_loss(probs, label);
  return add_scalar(scale(lc, a.alpha),
                    (1.0 - a.alpha) * earliness_loss(t, horizon));
}

Tensor expected_loss(const Tensor& halt_prob, const Tensor& class_losses,
                     TradeOff a) {
  if (halt_prob.numel() != class_losses.numel())
    throw std::invalid_argument("expected_loss: length mismatch");
  Tensor e = earliness_vector(halt_prob.numel());
  return add(scale(dot(halt_prob, class_losses), a.alpha),
             scale(dot(halt_prob, e), 1.0 - a.alpha));
}

LossComponents expected_loss_components(
    const std::vector<double>& halt_prob,
    const std::vector<double>& class_losses) {
  if (halt_prob.size() != class_losses.size())
    throw std::invalid_argument("expected_loss_components: length mismatch");
  LossComponents c;
  const std::size_t n = halt_prob.size();
  for (std::size_t t = 0; t < n; ++t) {
    c.classification += halt_prob[t] * class_losses[t];
    c.earliness += halt_prob[t] * (n > 1 ? double(t) / double(n - 1) : 0.0);
  }
  return c;
}

Tensor earliness_vector(std::size_t n) {
  if (n == 0) throw std::invalid_argument("earliness_vector: empty");
  std::vector<double> v(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    v[t] = n > 1 ? double(t) / double(n - 1) : 0.0;
  return Tensor::leaf(Shape{n}, std::move(v), false);
}

}  // namespace ehalt
