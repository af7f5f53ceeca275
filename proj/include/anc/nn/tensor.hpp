#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace anc::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tensor;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first written
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor& output)> backward;
};

}  // namespace detail

/// Dense row-major tensor with an optional gradient slot and, for op
/// results, a record of how to push gradients back to its inputs.
///
/// Tensor is a shared handle: copies alias the same storage. Leaves created
/// with requires_grad = true are trainable parameters; their gradients
/// accumulate across backward() calls until zero_grad().
class Tensor {
 public:
  using BackwardFn = std::function<void(const Tensor& output)>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Builds an op result. When any parent requires grad the result records
  /// `backward`, which receives the result (whose grad() is populated) and
  /// must add into its parents' grad_buffer().
  static Tensor from_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Direct write access. Mutating a tensor that is already part of a
  /// recorded graph invalidates that graph's gradients.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient storage, allocated (zero-filled) on first use.
  std::span<double> grad_buffer() const;
  void zero_grad() const;

  /// Reverse-mode sweep from this scalar. Intermediate gradients are reset
  /// first; leaf gradients accumulate.
  void backward() const;

  /// Leaf copy of the values with no history.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Throws InvalidArgument unless `t` has exactly the given shape.
void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace anc::nn
