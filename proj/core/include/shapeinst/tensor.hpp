#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shapeinst {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct TensorNode;

/// One reverse sweep. Backward functions ask for a parent's gradient buffer
/// through this interface; a null return means the parent does not require
/// gradients and the work can be skipped.
class BackwardPass {
 public:
  virtual ~BackwardPass() = default;
  virtual double* grad_for(const std::shared_ptr<TensorNode>& parent) = 0;
};

using BackpropFn = std::function<void(const double* self_grad, BackwardPass& pass)>;

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // persistent leaf accumulator, lazily allocated
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  BackpropFn backprop;  // empty on leaves
};

}  // namespace detail

/// Dense row-major float64 tensor with reverse-mode autodiff.
///
/// A Tensor is a shared handle to an immutable-after-construction value
/// node. Operations record the graph; backward() on a scalar accumulates
/// d(loss)/d(leaf) into every reachable leaf that requires gradients.
/// Gradients accumulate across backward calls until zero_grad().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const;
  bool requires_grad() const;

  std::span<const double> data() const;
  /// In-place access for optimizers; the autodiff graph must not be alive.
  std::span<double> mutable_data();

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Value of a scalar tensor.
  double value() const;

  /// Reverse-mode sweep from a scalar loss. Rejects non-scalar tensors.
  void backward();

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

/// Graph node factory for custom differentiable operations (used by the
/// geometry losses). `backprop` receives this node's pass gradient.
Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
               detail::BackpropFn backprop);

// --- operations ------------------------------------------------------------

/// 2-D convolution, NHWC input [N,H,W,Cin], kernel [Cin,K,K,Cout], bias
/// [Cout]. Zero padding of K/2 on each side; output extents are exactly
/// H/stride x W/stride (floor), so stride 1 preserves the spatial extent.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride);

/// Affine map: input [N,Din] * weight [Din,Dout] + bias [Dout].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Elementwise max(x, 0); gradient flows only where input > 0.
Tensor relu(const Tensor& input);

/// weight * sum over all listed parameters of sum(x^2).
Tensor l2_penalty(std::span<const Tensor> params, double weight);

/// Same data, new shape (element counts must match).
Tensor reshape(const Tensor& input, Shape shape);

/// Sum of all elements, as a scalar tensor.
Tensor sum(const Tensor& input);

/// Elementwise sum of two same-shape tensors.
Tensor add(const Tensor& a, const Tensor& b);

/// Multiply every element by a constant.
Tensor scale(const Tensor& a, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator*(double factor, const Tensor& a) { return scale(a, factor); }

}  // namespace shapeinst
