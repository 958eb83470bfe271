#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace ehalt {

// Dense shape, 1 to 3 axes (batch, time, feature).
struct Shape {
  std::vector<std::size_t> dims;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> d) : dims(d) {}
  explicit Shape(std::vector<std::size_t> d) : dims(std::move(d)) {}

  std::size_t rank() const { return dims.size(); }
  std::size_t operator[](std::size_t i) const { return dims[i]; }
  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
  }
  bool operator==(const Shape& o) const { return dims == o.dims; }
  bool operator!=(const Shape& o) const { return dims != o.dims; }
  std::string str() const;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // lazily allocated, same length as values
  bool requires_grad = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates this node's grad into its parents' grads.
  std::function<void(Node&)> backprop;
};

void ensure_grad(Node& n);

}  // namespace detail

// A value array participating in a recorded computation graph. Copies are
// shallow; the underlying node is shared.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  // Builds a non-leaf node. Parents and the backprop closure are dropped when
  // no parent requires grad.
  static Tensor from_op(Shape shape, std::vector<double> values,
                        const std::vector<Tensor>& parents,
                        std::function<void(detail::Node&)> backprop);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  std::size_t numel() const { return n_->values.size(); }
  bool requires_grad() const { return n_->requires_grad; }
  bool is_leaf() const { return n_->parents.empty(); }

  const std::vector<double>& values() const { return n_->values; }
  std::vector<double>& mutable_values() { return n_->values; }
  double item() const;
  double at(std::size_t i) const { return n_->values[i]; }

  bool has_grad() const { return n_ && !n_->grad.empty(); }
  // Lazily allocates a zero grad; throws for requires_grad=false nodes.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  detail::Node* node() const { return n_.get(); }
  const std::shared_ptr<detail::Node>& ptr() const { return n_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
  std::shared_ptr<detail::Node> n_;
};

// Reverse-mode pass from a scalar root. Each reachable node is visited once;
// calling backward twice on the same root throws.
void backward(const Tensor& root);

// Central-difference check of backward() for a scalar-valued graph builder.
// Rebuilds the graph twice per perturbed entry (step h) and returns the worst
// relative error over all leaf entries, with a 1e-8 denominator floor.
double check_gradients(
    const std::function<Tensor(const std::vector<Tensor>&)>& build,
    std::vector<Tensor> leaves, double step = 1e-5);

}  // namespace ehalt
