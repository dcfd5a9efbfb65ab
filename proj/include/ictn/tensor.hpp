#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace ictn {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl;
struct OpAccess;
}  // namespace detail

// Dense multi-dimensional array of doubles, row-major, with optional
// gradient buffer and a backlink into the computation graph. Copies are
// shallow: a Tensor is a handle onto a shared node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t rank() const;
  std::int64_t size() const;

  const double* data() const;
  double* data();
  std::vector<double> values() const;

  // Scalar accessor; throws unless size() == 1.
  double value() const;
  double at(std::initializer_list<std::int64_t> index) const;
  void set(std::initializer_list<std::int64_t> index, double value);

  bool requires_grad() const;
  bool has_grad() const;
  const double* grad_data() const;
  std::vector<double> grad() const;
  void zero_grad();

  // Reverse-mode differentiation from a scalar. Gradients of leaf tensors
  // accumulate across calls; interior gradients are recomputed each call.
  void backward() const;

  bool same_node(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl);
  std::shared_ptr<detail::TensorImpl> impl_;
  friend struct detail::OpAccess;
};

// Disables graph recording while alive (inference, finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Elementwise arithmetic; operand shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor log(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Reductions.
Tensor sum(const Tensor& x);
Tensor sum_last(const Tensor& x);

// Shape surgery. All of these copy; views are not part of this engine.
Tensor slice_last(const Tensor& x, std::int64_t index);
Tensor stack_last(const std::vector<Tensor>& parts);
Tensor concat(const std::vector<Tensor>& parts, std::int64_t axis);
Tensor squeeze_last(const Tensor& x);
Tensor take_front(const Tensor& x, std::int64_t count);

// Matrix product of rank-2 tensors, (P x Q) * (Q x R).
Tensor matmul(const Tensor& a, const Tensor& b);

// Activations.
Tensor relu(const Tensor& x);
Tensor prelu(const Tensor& x, const Tensor& slope);
Tensor sigmoid(const Tensor& x);

// Pointwise (1x1) convolution along one axis: the extent of `x` along
// `axis` changes from weight rows to weight cols, all other axes pass
// through. weight is (in x out), bias is (out).
Tensor pointwise_conv(const Tensor& x, std::int64_t axis, const Tensor& weight,
                      const Tensor& bias);

// Per-channel dilated convolution with 3-tap kernels and zero padding of
// `dilation` on each side, so the output shape equals the input shape.
// 1-D: x is (L x N), kernel (N x 3), bias (N); convolution runs over time.
// 2-D: x is (L x N x C), kernel (C x 3 x 3), bias (C); convolution runs
// over (time, feature) independently per channel.
Tensor dilated_depthwise_conv1d(const Tensor& x, const Tensor& kernel,
                                const Tensor& bias, std::int64_t dilation);
Tensor dilated_depthwise_conv2d(const Tensor& x, const Tensor& kernel,
                                const Tensor& bias, std::int64_t dilation);

// Layer normalization with statistics over the whole map (all axes jointly)
// and affine gain/bias broadcast along `affine_axis`. epsilon = 1e-8.
Tensor global_layer_norm(const Tensor& x, std::int64_t affine_axis,
                         const Tensor& gain, const Tensor& bias);

// A named trainable tensor.
struct Parameter {
  std::string name;
  Tensor tensor;
};

}  // namespace ictn
