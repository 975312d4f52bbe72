// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hecto {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// Backward rule of a graph node: reads `self.grad` and accumulates into the
/// grads of `self.inputs`.
using BackwardFn = std::function<void(Node& self)>;

/// One vertex of the reverse-mode graph. Leaves (parameters, constants) have
/// no inputs and no backward rule; their grads accumulate across backward
/// passes until zeroed.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  BackwardFn backward;
  const char* op = "leaf";
};

/// Shared handle to a graph node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Builds the result node of a primitive. When grad mode is off or no input
  /// requires a gradient, the inputs and backward rule are dropped.
  static Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs, BackwardFn backward);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> data();
  std::span<const double> grad() const;
  std::span<double> grad();

  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  void zero_grad();

  /// Reverse-mode sweep from this scalar. See hecto::backward.
  void backward() const;

  /// Value copy without graph history.
  Tensor detach() const;

  const NodePtr& node() const noexcept { return node_; }

 private:
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}
  NodePtr node_;
};

/// Populates grads of every leaf reachable from `loss`. The loss must be a
/// scalar. Non-leaf grads are reset at the start of each call, leaf grads
/// accumulate.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool saved_;
};

/// A trainable tensor with its registry name.
struct Parameter {
  std::string name;
  Tensor value;
};

}  // namespace hecto
