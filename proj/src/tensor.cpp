// SPDX-License-Identifier: Apache-2.0
#include "hecto/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "hecto/error.hpp"

namespace hecto {

namespace {
thread_local bool t_grad_enabled = true;

Node& checked(const NodePtr& node) {
  if (!node) throw ContractError("use of an undefined tensor");
  return *node;
}
}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->grad.assign(values.size(), 0.0);
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::make_result(const char* op, Shape shape, std::vector<double> values,
                           std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out = from(std::move(shape), std::move(values));
  Node& node = *out.node_;
  node.op = op;
  if (!t_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!any) return out;
  node.requires_grad = true;
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.node_);
  node.backward = std::move(backward);
  return out;
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t i) const {
  const auto& s = shape();
  if (i >= s.size()) throw DimensionError("dimension index out of range for " + shape_string(s));
  return s[i];
}

std::size_t Tensor::size() const { return checked(node_).data.size(); }
std::span<const double> Tensor::data() const { return checked(node_).data; }
std::span<double> Tensor::data() { return checked(node_).data; }
std::span<const double> Tensor::grad() const { return checked(node_).grad; }
std::span<double> Tensor::grad() { return checked(node_).grad; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
void Tensor::set_requires_grad(bool flag) { checked(node_).requires_grad = flag; }

void Tensor::zero_grad() {
  auto& g = checked(node_).grad;
  std::fill(g.begin(), g.end(), 0.0);
}

void Tensor::backward() const { hecto::backward(*this); }

Tensor Tensor::detach() const {
  const Node& n = checked(node_);
  return from(n.shape, n.data);
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* root = loss.node().get();
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->backward) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  if (root->backward) {
    root->grad[0] = 1.0;
  } else {
    root->grad[0] += 1.0;
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : saved_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = saved_; }

}  // namespace hecto
