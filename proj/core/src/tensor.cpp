#include "ifthen/tensor.hpp"

#include <unordered_set>

#include "ifthen/common.hpp"

namespace ifthen {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->value.assign(shape_size(shape), fill);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("from_data: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar_value(double v) { return from_data({1}, {v}); }

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::size() const { return node_->value.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(node_->shape));
  }
  return node_->shape[axis];
}

std::span<const double> Tensor::value() const { return node_->value; }

std::span<double> Tensor::value_mut() const { return node_->value; }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ValidationError("tensor has no gradient buffer");
  return node_->grad;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

void Tensor::zero_grad() const {
  if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::scalar() const {
  if (size() != 1) {
    throw ValidationError("expected a scalar tensor, got shape " + shape_str(shape()));
  }
  return node_->value[0];
}

const std::string& Tensor::name() const { return node_->name; }

void Tensor::set_name(std::string name) { node_->name = std::move(name); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ValidationError("backward requires a scalar loss");
  }

  // Iterative post-order DFS; child-after-parents order, then reversed.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next_parent++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
  }
}

}  // namespace ifthen
