#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "erd/errors.hpp"

namespace erd::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major array with an optional gradient buffer.
///
/// Copies share storage (handle semantics); use clone() for a deep copy.
/// Model code instantiates it with float; gradient checks also run the same
/// operations on double.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  BasicTensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : impl_(std::make_shared<Impl>()) {
    if (values.size() != element_count(shape)) {
      throw DimensionError("tensor data length " +
                           std::to_string(values.size()) +
                           " does not match shape " + shape_string(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
    impl_->requires_grad = requires_grad;
  }

  static BasicTensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = element_count(shape);
    return BasicTensor(std::move(shape), std::vector<T>(n, T(0)),
                       requires_grad);
  }

  static BasicTensor scalar(T value, bool requires_grad = false) {
    return BasicTensor(Shape{}, std::vector<T>{value}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T item() const {
    if (size() != 1) throw DimensionError("item() on non-scalar tensor");
    return impl_->data[0];
  }
  T& at(std::size_t i) { return impl_->data[i]; }
  T at(std::size_t i) const { return impl_->data[i]; }
  T at(std::size_t row, std::size_t col) const {
    return impl_->data[row * impl_->shape.back() + col];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  /// Gradient buffer, allocated as zeros on first access. Gradients are
  /// accumulation state of the shared storage, so this is available through
  /// const handles.
  std::span<T> mutable_grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
  }
  void zero_grad() const {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
  }
  void drop_grad() const { impl_->grad.clear(); }

  BasicTensor clone() const {
    BasicTensor copy(impl_->shape, impl_->data, impl_->requires_grad);
    return copy;
  }

  /// Same values, no gradient tracking. Shares nothing with this tensor.
  BasicTensor detached() const { return BasicTensor(impl_->shape, impl_->data, false); }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(impl_->shape,
                          std::vector<U>(impl_->data.begin(), impl_->data.end()),
                          impl_->requires_grad);
  }

  bool same_storage(const BasicTensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

}  // namespace erd::ad
