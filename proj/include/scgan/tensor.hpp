#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "scgan/common.hpp"

namespace scgan {

// Dense row-major tensor. Activations are N x H x W x C, conv weights
// Kh x Kw x Cin x Cout, linear weights In x Out.
template <typename S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), S(0)) {}
  Tensor(Shape shape, S fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
    SCGAN_CHECK(static_cast<std::int64_t>(data_.size()) == shape_size(shape_),
                "tensor data size does not match shape ", shape_str(shape_));
  }

  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  S& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const S& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // rank-3 H x W x C
  S& at(int h, int w, int c) { return data_[static_cast<std::size_t>((static_cast<std::int64_t>(h) * dim(1) + w) * dim(2) + c)]; }
  const S& at(int h, int w, int c) const { return data_[static_cast<std::size_t>((static_cast<std::int64_t>(h) * dim(1) + w) * dim(2) + c)]; }

  // rank-4 N x H x W x C
  S& at(int n, int h, int w, int c) {
    return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * dim(1) + h) * dim(2) + w) * dim(3) + c)];
  }
  const S& at(int n, int h, int w, int c) const {
    return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * dim(1) + h) * dim(2) + w) * dim(3) + c)];
  }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape s) const {
    SCGAN_CHECK(shape_size(s) == size(), "reshape ", shape_str(shape_), " -> ", shape_str(s), " changes element count");
    Tensor out;
    out.shape_ = std::move(s);
    out.data_ = data_;
    return out;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    for (std::int64_t i = 0; i < size(); ++i) out[i] = static_cast<T>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const S& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  Shape shape_;
  std::vector<S> data_;

  template <typename T>
  friend class Tensor;
};

template <typename S>
S max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  SCGAN_CHECK(a.same_shape(b), "max_abs_diff: shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape()));
  S m = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace scgan
