#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mltsf {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the recorded computation graph. Leaves have no parents and
// keep their gradient across backward passes; interior nodes only hold a
// gradient buffer while a backward pass is running.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and adds into the parents' grad buffers.
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";

  bool is_leaf() const { return parents.empty(); }
  // Allocates a zero gradient if none is present yet.
  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient slot.
///
/// A Tensor is a handle: copies share the same storage and graph node, the
/// way parameters are shared between a model and its optimizer. Use clone()
/// for an independent copy. Operations in ops.hpp record a graph edge only
/// when at least one input requires a gradient, so evaluating with detached
/// parameters builds no graph at all.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }

  std::span<const double> values() const { return node_->values; }
  // Mutating values of a tensor that already feeds a recorded graph invalidates that graph.
  std::span<double> mutable_values() { return node_->values; }
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad();

  const char* op_name() const { return node_->op; }

  /// Reverse-mode sweep from this scalar. Gradients accumulate into leaves.
  void backward() const;

  Tensor clone() const;    // deep copy of values, new leaf
  Tensor detach() const;   // shares nothing with the graph, no grad

  // Used by ops to build result nodes.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs, const char* op,
                            std::function<void(detail::Node&)> backward_fn);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

}  // namespace mltsf
