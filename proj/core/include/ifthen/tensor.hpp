#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ifthen {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

// One node of the dynamic computation graph. Values are written once by the
// producing op; backward_fn reads this node's grad and accumulates into the
// parents' grads.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  std::string name;  // non-empty for parameters

  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& grad_buffer();
};

}  // namespace detail

// Value-semantic handle to a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar_value(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const double> value() const;
  std::span<double> value_mut() const;  // leaf mutation (parameter updates)
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad() const;

  bool requires_grad() const;
  double scalar() const;  // requires size() == 1

  const std::string& name() const;
  void set_name(std::string name);

  std::shared_ptr<detail::Node> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

// Reverse-mode sweep from a scalar loss. Grads accumulate (+=) across every
// use of a node, so parameters used multiple times receive summed gradients.
// Throws ValidationError when loss is not a scalar.
void backward(const Tensor& loss);

}  // namespace ifthen
