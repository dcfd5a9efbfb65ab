#pragma once

// Internal graph node layout and helpers shared by the op implementations.
// Not installed; everything here is private to the library.

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ictn/tensor.hpp"

namespace ictn::detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward touches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this->grad and accumulates into the parents' grads. Leaves have
  // no backward_fn.
  std::function<void(TensorImpl&)> backward_fn;

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
  bool is_leaf() const { return !backward_fn; }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
  void release_grad() {
    std::vector<double>().swap(grad);
  }
};

struct OpAccess {
  static const std::shared_ptr<TensorImpl>& impl(const Tensor& t) {
    return t.impl_;
  }
  static Tensor wrap(std::shared_ptr<TensorImpl> impl) {
    return Tensor(std::move(impl));
  }
};

inline const std::shared_ptr<TensorImpl>& impl_of(const Tensor& t) {
  return OpAccess::impl(t);
}

inline std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

inline void check(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

// Builds an op result. Records graph structure only when grad mode is on
// and at least one parent requires grad; otherwise the result is a plain
// constant node.
Tensor make_node(Shape shape, std::vector<double> values,
                 std::vector<std::shared_ptr<TensorImpl>> parents,
                 std::function<void(TensorImpl&)> backward_fn);

}  // namespace ictn::detail
