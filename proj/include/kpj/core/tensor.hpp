#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kpj::ad {

/// Storage precision of forward values. Values are always held in doubles;
/// in f32 mode every op result (and every optimizer update) is rounded to
/// the nearest float, so arithmetic matches float32 storage.
enum class Precision { f32, f64 };

Precision precision() noexcept;
void set_precision(Precision p) noexcept;

/// Sets the thread's precision for the lifetime of the scope.
class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p) noexcept;
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision saved_;
};

bool grad_enabled() noexcept;

/// Disables graph recording on this thread (inference, oracles).
class NoGradScope {
 public:
  NoGradScope() noexcept;
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  bool saved_;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// One vertex of the gradient graph. Leaves have no inputs; interior nodes
/// keep their inputs alive together with the closure that pushes `grad`
/// back into them.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  std::vector<double>& ensure_grad();
};

/// Shape-carrying dense array with shared ownership of its graph node.
/// Copies alias the same storage; use `clone()` for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const { return node().value.size(); }
  /// Leading dimension for rank-2 tensors, 1 otherwise.
  std::size_t rows() const;
  /// Trailing dimension (1 for scalars).
  std::size_t cols() const;

  std::span<const double> data() const { return node().value; }
  std::span<double> mutable_data() { return node().value; }
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return node().requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return !node().grad.empty(); }
  /// Gradient values, zeros when nothing has been accumulated.
  std::vector<double> grad() const;
  void zero_grad();
  void clear_grad();

  /// Leaf sharing no graph history; `requires_grad` is false.
  Tensor detach() const;
  Tensor clone() const;

  Node& node() const;
  const std::shared_ptr<Node>& node_ptr() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds an interior node. `value` is rounded according to the current
/// precision. When no input needs gradients (or recording is disabled) the
/// backward closure is dropped and the result is a constant.
Tensor make_op(const char* op, Shape shape, std::vector<double> value,
               std::vector<Tensor> inputs, std::function<void(Node&)> backward);

/// Reverse pass from a scalar loss. Seeds 1.0 at `loss` and accumulates into
/// every reachable node that requires gradients; leaf gradients accumulate
/// across calls until cleared.
void backward(const Tensor& loss);

double round_to_precision(double x) noexcept;

}  // namespace kpj::ad
