#include "kpj/core/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "kpj/core/errors.hpp"

namespace kpj::ad {

namespace {

thread_local Precision g_precision = Precision::f32;
thread_local bool g_grad_enabled = true;

}  // namespace

Precision precision() noexcept { return g_precision; }
void set_precision(Precision p) noexcept { g_precision = p; }

PrecisionScope::PrecisionScope(Precision p) noexcept : saved_(g_precision) { g_precision = p; }
PrecisionScope::~PrecisionScope() { g_precision = saved_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradScope::NoGradScope() noexcept : saved_(g_grad_enabled) { g_grad_enabled = false; }
NoGradScope::~NoGradScope() { g_grad_enabled = saved_; }

double round_to_precision(double x) noexcept {
  return g_precision == Precision::f32 ? static_cast<double>(static_cast<float>(x)) : x;
}

std::size_t shape_size(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  if (data.empty()) data.assign(n, 0.0);
  if (data.size() != n) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_string(shape));
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

Node& Tensor::node() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.empty() ? 1 : s.back();
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return node().value[0];
}

double Tensor::at(std::size_t i) const { return node().value.at(i); }

double Tensor::at(std::size_t r, std::size_t c) const { return node().value.at(r * cols() + c); }

void Tensor::set_requires_grad(bool on) { node().requires_grad = on; }

std::vector<double> Tensor::grad() const {
  const auto& n = node();
  return n.grad.empty() ? std::vector<double>(n.value.size(), 0.0) : n.grad;
}

void Tensor::zero_grad() {
  auto& g = node().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

void Tensor::clear_grad() { node().grad.clear(); }

Tensor Tensor::detach() const { return Tensor(shape(), node().value, false); }

Tensor Tensor::clone() const { return Tensor(shape(), node().value, requires_grad()); }

Tensor make_op(const char* op, Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward) {
  if (g_precision == Precision::f32) {
    for (auto& v : value) v = static_cast<double>(static_cast<float>(v));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  Node* root = &loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion
  // depth limits on long LSTM chains.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
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

  // Interior gradients are recomputed from scratch on every pass.
  for (Node* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

}  // namespace kpj::ad
