#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sct::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized only when requires_grad
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the grads of its inputs.
  std::function<void(Node&)> backward;
};

// Shared handle to a node of the differentiation graph. Copies alias the same
// storage; image tensors use (batch, channel, height, width) layout.
template <typename T>
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<T> values() const { return node_->value; }
  std::span<T> grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  T item() const;

  void zero_grad() const;
  // Independent leaf holding a copy of the values.
  Tensor detach_copy(bool requires_grad = false) const;

  Node<T>* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const noexcept { return node_; }

private:
  std::shared_ptr<Node<T>> node_;
};

// Graph recording is on by default; a guard turns it off for the current
// thread (inference, validation sweeps).
bool grad_enabled() noexcept;

class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool previous_;
};

// Nodes reachable from a root that take part in differentiation, in
// topological order: every node appears after all producers of its inputs.
template <typename T>
class Tape {
public:
  static Tape record(const Tensor<T>& root);

  const std::vector<Node<T>*>& nodes() const noexcept { return nodes_; }
  void run_backward(Node<T>& root) const;

private:
  std::vector<Node<T>*> nodes_;
};

// Populates grads of every requires_grad leaf reachable from a scalar loss.
// Leaf grads accumulate across calls; intermediate grads are reset.
template <typename T>
void backward(const Tensor<T>& loss);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t padding = 0);

template <typename T>
Tensor<T> relu(const Tensor<T>& t);
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& t, T slope);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& t);

// Per (batch, channel) plane: (x - mean) / sqrt(var + eps) * gain + shift,
// population variance.
template <typename T>
Tensor<T> instance_norm2d(const Tensor<T>& t, const Tensor<T>& gain, const Tensor<T>& shift,
                          T epsilon = T(1e-5));

// 2x2 window, stride 2. Gradient goes to the first maximum in row-major order.
template <typename T>
Tensor<T> max_pool2(const Tensor<T>& t);

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& t);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, std::size_t begin, std::size_t count);

template <typename T>
Tensor<T> crop2d(const Tensor<T>& t, std::size_t top, std::size_t left, std::size_t height,
                 std::size_t width);

// Mean |pred - target|, or sum(w |pred - target|) / sum(w) when a weight is
// given. The subgradient of |x| at 0 is 0.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& weight = {});

template <typename T>
Tensor<T> sum(const Tensor<T>& t);
// sum(a * b) over all elements.
template <typename T>
Tensor<T> sum_product(const Tensor<T>& a, const Tensor<T>& b);

struct GradCheckEntry {
  std::size_t input = 0;
  std::size_t max_index = 0;
  double max_rel_error = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> inputs;
  double max_rel_error = 0.0;
  bool passed = true;
};

// Compares analytic gradients of a scalar function against central
// differences, element by element. Relative error is
// |a - n| / max(|a|, |n|, floor) with the floor guarding zero gradients.
template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& function,
                           const std::vector<Tensor<T>>& inputs, double h = 1e-5,
                           double tolerance = 1e-4, double floor = 1e-6);

} // namespace sct::ad
