#include "ehalt/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace ehalt {

std::string Shape::str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

namespace detail {

void ensure_grad(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.values.size(), 0.0);
}

}  // namespace detail

Tensor Tensor::leaf(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape.rank() < 1 || shape.rank() > 3)
    throw std::invalid_argument("Tensor: rank must be 1..3, got " +
                                shape.str());
  if (shape.numel() != values.size())
    throw std::invalid_argument("Tensor: shape " + shape.str() +
                                " does not match value count " +
                                std::to_string(values.size()));
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape.numel(), 0.0);
  return leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape.numel(), value);
  return leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return leaf(Shape{1}, {value}, requires_grad);
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values,
                       const std::vector<Tensor>& parents,
                       std::function<void(detail::Node&)> backprop) {
  Tensor out = leaf(std::move(shape), std::move(values), false);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    out.n_->requires_grad = true;
    out.n_->parents.reserve(parents.size());
    for (const auto& p : parents) out.n_->parents.push_back(p.ptr());
    out.n_->backprop = std::move(backprop);
  }
  return out;
}

double Tensor::item() const {
  if (numel() != 1)
    throw std::logic_error("Tensor::item: not a scalar, shape " +
                           shape().str());
  return n_->values[0];
}

std::vector<double>& Tensor::grad() {
  if (!n_->requires_grad)
    throw std::logic_error("Tensor::grad: node does not require grad");
  detail::ensure_grad(*n_);
  return n_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (!n_->requires_grad)
    throw std::logic_error("Tensor::grad: node does not require grad");
  detail::ensure_grad(*n_);
  return n_->grad;
}

void Tensor::zero_grad() {
  n_->grad.clear();
  n_->backward_done = false;
}

void backward(const Tensor& root) {
  if (!root.defined()) throw std::invalid_argument("backward: empty tensor");
  detail::Node* r = root.node();
  if (r->values.size() != 1)
    throw std::logic_error("backward: root must be scalar, shape " +
                           r->shape.str());
  if (r->backward_done)
    throw std::logic_error("backward: already called on this root");
  r->backward_done = true;
  if (!r->requires_grad) return;

  // Iterative post-order topological sort.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack{{r, 0}};
  visited.insert(r);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && visited.insert(p).second)
        stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  detail::ensure_grad(*r);
  r->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backprop) {
      detail::ensure_grad(*n);
      n->backprop(*n);
    }
  }
}

double check_gradients(
    const std::function<Tensor(const std::vector<Tensor>&)>& build,
    std::vector<Tensor> leaves, double step) {
  Tensor out = build(leaves);
  if (!std::isfinite(out.item()))
    throw std::runtime_error("check_gradients: non-finite output");
  backward(out);

  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) {
    if (l.requires_grad())
      analytic.push_back(l.grad());
    else
      analytic.emplace_back(l.numel(), 0.0);
  }

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    if (!leaves[li].requires_grad()) continue;
    auto& vals = leaves[li].mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      for (auto& l : leaves) l.zero_grad();
      vals[i] = saved + step;
      const double plus = build(leaves).item();
      vals[i] = saved - step;
      const double minus = build(leaves).item();
      vals[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus))
        throw std::runtime_error("check_gradients: non-finite output");
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[li][i];
      const double denom =
          std::max(1e-8, std::max(std::fabs(a), std::fabs(numeric)));
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace ehalt
