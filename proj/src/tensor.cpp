#include "ictn/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "tensor_impl.hpp"

namespace ictn {

using detail::check;
using detail::impl_of;
using detail::OpAccess;
using detail::TensorImpl;

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

std::int64_t flat_index(const Shape& shape, std::initializer_list<std::int64_t> index) {
  check(static_cast<std::int64_t>(index.size()) == static_cast<std::int64_t>(shape.size()),
        "index rank does not match tensor rank");
  std::int64_t flat = 0;
  std::int64_t axis = 0;
  for (auto i : index) {
    check(i >= 0 && i < shape[axis], "index out of range");
    flat = flat * shape[axis] + i;
    ++axis;
  }
  return flat;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check(a.shape() == b.shape(), std::string(op) + ": shapes differ, " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ")";
  return out.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor::Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto e : shape) check(e > 0, "tensor extents must be positive, got " + shape_str(shape));
  check(detail::shape_numel(shape) == static_cast<std::int64_t>(values.size()),
        "value count " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> values(static_cast<std::size_t>(detail::shape_numel(shape)), value);
  return from_data(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  check(defined(), "undefined tensor");
  return impl_->shape;
}

std::int64_t Tensor::rank() const { return static_cast<std::int64_t>(shape().size()); }

std::int64_t Tensor::size() const {
  check(defined(), "undefined tensor");
  return impl_->size();
}

const double* Tensor::data() const {
  check(defined(), "undefined tensor");
  return impl_->values.data();
}

double* Tensor::data() {
  check(defined(), "undefined tensor");
  return impl_->values.data();
}

std::vector<double> Tensor::values() const {
  check(defined(), "undefined tensor");
  return impl_->values;
}

double Tensor::value() const {
  check(size() == 1, "value() expects a scalar, got shape " + shape_str(shape()));
  return impl_->values[0];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  return impl_->values[static_cast<std::size_t>(flat_index(shape(), index))];
}

void Tensor::set(std::initializer_list<std::int64_t> index, double value) {
  impl_->values[static_cast<std::size_t>(flat_index(shape(), index))] = value;
}

bool Tensor::requires_grad() const { return defined() && impl_->requires_grad; }

bool Tensor::has_grad() const {
  return defined() && impl_->grad.size() == impl_->values.size();
}

const double* Tensor::grad_data() const {
  check(has_grad(), "tensor has no gradient buffer");
  return impl_->grad.data();
}

std::vector<double> Tensor::grad() const {
  check(has_grad(), "tensor has no gradient buffer");
  return impl_->grad;
}

void Tensor::zero_grad() {
  check(defined(), "undefined tensor");
  impl_->ensure_grad();
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::backward() const {
  check(defined(), "undefined tensor");
  check(size() == 1, "backward() expects a scalar loss, got shape " + shape_str(shape()));

  // Reverse post-order over the sub-graph that requires grad: every node
  // comes before its operands, so each gradient is final when consumed.
  std::vector<TensorImpl*> order;
  {
    std::unordered_set<TensorImpl*> visited;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    if (impl_->requires_grad || !impl_->is_leaf()) {
      stack.emplace_back(impl_.get(), 0);
      visited.insert(impl_.get());
    }
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        TensorImpl* parent = node->parents[next++].get();
        if (parent->requires_grad && !visited.count(parent)) {
          visited.insert(parent);
          stack.emplace_back(parent, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  // Interior gradients restart from zero on every call; leaf gradients
  // (parameters, inputs) accumulate across calls.
  for (TensorImpl* node : order) {
    node->ensure_grad();
    if (!node->is_leaf()) std::fill(node->grad.begin(), node->grad.end(), 0.0);
  }
  impl_->ensure_grad();
  impl_->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->is_leaf()) continue;
    node->backward_fn(*node);
    // Interior gradient fully consumed; free it to keep training memory flat.
    node->release_grad();
  }
}

namespace detail {

Tensor make_node(Shape shape, std::vector<double> values,
                 std::vector<std::shared_ptr<TensorImpl>> parents,
                 std::function<void(TensorImpl&)> backward_fn) {
  bool record = g_grad_enabled;
  if (record) {
    record = false;
    for (const auto& p : parents)
      if (p->requires_grad) {
        record = true;
        break;
      }
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  if (record) {
    impl->requires_grad = true;
    impl->parents = std::move(parents);
    impl->backward_fn = std::move(backward_fn);
  }
  return OpAccess::wrap(std::move(impl));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto pa = impl_of(a), pb = impl_of(b);
  std::vector<double> out(pa->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa->values[i] + pb->values[i];
  return detail::make_node(a.shape(), std::move(out), {pa, pb}, [pa, pb](TensorImpl& self) {
    if (pa->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    if (pb->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto pa = impl_of(a), pb = impl_of(b);
  std::vector<double> out(pa->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa->values[i] - pb->values[i];
  return detail::make_node(a.shape(), std::move(out), {pa, pb}, [pa, pb](TensorImpl& self) {
    if (pa->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    if (pb->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto pa = impl_of(a), pb = impl_of(b);
  std::vector<double> out(pa->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa->values[i] * pb->values[i];
  return detail::make_node(a.shape(), std::move(out), {pa, pb}, [pa, pb](TensorImpl& self) {
    if (pa->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i] += self.grad[i] * pb->values[i];
    if (pb->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pb->grad[i] += self.grad[i] * pa->values[i];
  });
}

Tensor scale(const Tensor& x, double factor) {
  auto px = impl_of(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * px->values[i];
  return detail::make_node(x.shape(), std::move(out), {px}, [px, factor](TensorImpl& self) {
    if (px->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += factor * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& x, double offset) {
  auto px = impl_of(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = px->values[i] + offset;
  return detail::make_node(x.shape(), std::move(out), {px}, [px](TensorImpl& self) {
    if (px->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
  });
}

Tensor log(const Tensor& x) {
  auto px = impl_of(x);
  std::vector<double> out(px->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    check(px->values[i] > 0.0, "log: input must be positive");
    out[i] = std::log(px->values[i]);
  }
  return detail::make_node(x.shape(), std::move(out), {px}, [px](TensorImpl& self) {
    if (px->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        px->grad[i] += self.grad[i] / px->values[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  auto px = impl_of(x);
  double total = 0.0;
  for (double v : px->values) total += v;
  return detail::make_node({1}, {total}, {px}, [px](TensorImpl& self) {
    if (px->requires_grad) {
      const double g = self.grad[0];
      for (auto& gi : px->grad) gi += g;
    }
  });
}

Tensor sum_last(const Tensor& x) {
  check(x.rank() >= 2, "sum_last: rank must be >= 2, got " + shape_str(x.shape()));
  auto px = impl_of(x);
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  const std::int64_t last = x.shape().back();
  const std::int64_t outer = detail::shape_numel(out_shape);
  std::vector<double> out(static_cast<std::size_t>(outer), 0.0);
  for (std::int64_t o = 0; o < outer; ++o) {
    double acc = 0.0;
    for (std::int64_t c = 0; c < last; ++c) acc += px->values[o * last + c];
    out[o] = acc;
  }
  return detail::make_node(std::move(out_shape), std::move(out), {px},
                           [px, outer, last](TensorImpl& self) {
                             if (!px->requires_grad) return;
                             for (std::int64_t o = 0; o < outer; ++o)
                               for (std::int64_t c = 0; c < last; ++c)
                                 px->grad[o * last + c] += self.grad[o];
                           });
}

// ---------------------------------------------------------------------------
// Shape surgery

Tensor slice_last(const Tensor& x, std::int64_t index) {
  check(x.rank() >= 2, "slice_last: rank must be >= 2, got " + shape_str(x.shape()));
  const std::int64_t last = x.shape().back();
  check(index >= 0 && index < last,
        "slice_last: index " + std::to_string(index) + " out of range for shape " + shape_str(x.shape()));
  auto px = impl_of(x);
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  const std::int64_t outer = detail::shape_numel(out_shape);
  std::vector<double> out(static_cast<std::size_t>(outer));
  for (std::int64_t o = 0; o < outer; ++o) out[o] = px->values[o * last + index];
  return detail::make_node(std::move(out_shape), std::move(out), {px},
                           [px, outer, last, index](TensorImpl& self) {
                             if (!px->requires_grad) return;
                             for (std::int64_t o = 0; o < outer; ++o)
                               px->grad[o * last + index] += self.grad[o];
                           });
}

Tensor stack_last(const std::vector<Tensor>& parts) {
  check(!parts.empty(), "stack_last: no tensors given");
  const Shape& base = parts.front().shape();
  for (const auto& t : parts)
    check(t.shape() == base, "stack_last: shapes differ, " + shape_str(base) + " vs " + shape_str(t.shape()));
  const std::int64_t count = static_cast<std::int64_t>(parts.size());
  const std::int64_t outer = detail::shape_numel(base);
  Shape out_shape = base;
  out_shape.push_back(count);
  std::vector<double> out(static_cast<std::size_t>(outer * count));
  std::vector<std::shared_ptr<TensorImpl>> ps;
  ps.reserve(parts.size());
  for (const auto& t : parts) ps.push_back(impl_of(t));
  for (std::int64_t c = 0; c < count; ++c)
    for (std::int64_t o = 0; o < outer; ++o) out[o * count + c] = ps[c]->values[o];
  return detail::make_node(std::move(out_shape), std::move(out), ps,
                           [ps, outer, count](TensorImpl& self) {
                             for (std::int64_t c = 0; c < count; ++c) {
                               if (!ps[c]->requires_grad) continue;
                               for (std::int64_t o = 0; o < outer; ++o)
                                 ps[c]->grad[o] += self.grad[o * count + c];
                             }
                           });
}

Tensor concat(const std::vector<Tensor>& parts, std::int64_t axis) {
  check(!parts.empty(), "concat: no tensors given");
  check(axis == 1, "concat: only axis 1 of rank-2 tensors is supported");
  const std::int64_t rows = parts.front().shape()[0];
  std::int64_t total_cols = 0;
  std::vector<std::shared_ptr<TensorImpl>> ps;
  std::vector<std::int64_t> widths;
  for (const auto& t : parts) {
    check(t.rank() == 2, "concat: expects rank-2 tensors, got " + shape_str(t.shape()));
    check(t.shape()[0] == rows, "concat: row counts differ");
    ps.push_back(impl_of(t));
    widths.push_back(t.shape()[1]);
    total_cols += t.shape()[1];
  }
  std::vector<double> out(static_cast<std::size_t>(rows * total_cols));
  std::int64_t col0 = 0;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t c = 0; c < widths[p]; ++c)
        out[r * total_cols + col0 + c] = ps[p]->values[r * widths[p] + c];
    col0 += widths[p];
  }
  return detail::make_node({rows, total_cols}, std::move(out), ps,
                           [ps, widths, rows, total_cols](TensorImpl& self) {
                             std::int64_t base = 0;
                             for (std::size_t p = 0; p < ps.size(); ++p) {
                               if (ps[p]->requires_grad) {
                                 for (std::int64_t r = 0; r < rows; ++r)
                                   for (std::int64_t c = 0; c < widths[p]; ++c)
                                     ps[p]->grad[r * widths[p] + c] +=
                                         self.grad[r * total_cols + base + c];
                               }
                               base += widths[p];
                             }
                           });
}

Tensor squeeze_last(const Tensor& x) {
  check(x.rank() >= 2 && x.shape().back() == 1,
        "squeeze_last: trailing extent must be 1, got " + shape_str(x.shape()));
  auto px = impl_of(x);
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  std::vector<double> out = px->values;
  return detail::make_node(std::move(out_shape), std::move(out), {px}, [px](TensorImpl& self) {
    if (!px->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
  });
}

Tensor take_front(const Tensor& x, std::int64_t count) {
  check(x.rank() == 1, "take_front: expects a rank-1 tensor, got " + shape_str(x.shape()));
  check(count >= 1 && count <= x.size(), "take_front: count out of range");
  auto px = impl_of(x);
  std::vector<double> out(px->values.begin(), px->values.begin() + count);
  return detail::make_node({count}, std::move(out), {px}, [px, count](TensorImpl& self) {
    if (!px->requires_grad) return;
    for (std::int64_t i = 0; i < count; ++i) px->grad[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Matrix product

Tensor matmul(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2,
        "matmul: expects rank-2 tensors, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  check(a.shape()[1] == b.shape()[0],
        "matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  auto pa = impl_of(a), pb = impl_of(b);
  const std::int64_t p = a.shape()[0], q = a.shape()[1], r = b.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(p * r));
  {
    CMapRM ma(pa->values.data(), p, q);
    CMapRM mb(pb->values.data(), q, r);
    MapRM mo(out.data(), p, r);
    mo.noalias() = ma * mb;
  }
  return detail::make_node({p, r}, std::move(out), {pa, pb}, [pa, pb, p, q, r](TensorImpl& self) {
    CMapRM gy(self.grad.data(), p, r);
    if (pa->requires_grad) {
      CMapRM mb(pb->values.data(), q, r);
      MapRM ga(pa->grad.data(), p, q);
      ga.noalias() += gy * mb.transpose();
    }
    if (pb->requires_grad) {
      CMapRM ma(pa->values.data(), p, q);
      MapRM gb(pb->grad.data(), q, r);
      gb.noalias() += ma.transpose() * gy;
    }
  });
}

}  // namespace ictn
