#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "snapture/errors.hpp"

namespace snapture::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

enum class Mode { train, eval };

inline Index shape_size(const Shape &s) {
  return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape &s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major tensor. Storage is an Eigen column vector, so whole-tensor
/// arithmetic composes as Eigen expressions through values().
template <typename Scalar> class Tensor {
public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), values_(Vector::Constant(shape_size(shape_), fill)) {}
  Tensor(Shape shape, Vector values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_))
      throw ShapeError("tensor data length " + std::to_string(values_.size()) +
                       " does not match shape " + shape_string(shape_));
  }
  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Eigen::Map<const Vector>(values.begin(),
                                                          static_cast<Index>(values.size()))) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor zeros_like(const Tensor &t) { return Tensor(t.shape_); }

  const Shape &shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.size() == 0; }

  Vector &values() noexcept { return values_; }
  const Vector &values() const noexcept { return values_; }
  Scalar *data() noexcept { return values_.data(); }
  const Scalar *data() const noexcept { return values_.data(); }
  std::span<Scalar> span() noexcept { return {values_.data(), static_cast<std::size_t>(size())}; }
  std::span<const Scalar> span() const noexcept {
    return {values_.data(), static_cast<std::size_t>(size())};
  }

  Scalar &operator[](Index i) { return values_[i]; }
  Scalar operator[](Index i) const { return values_[i]; }

  template <typename... Ix> Scalar &operator()(Ix... ix) { return values_[offset(ix...)]; }
  template <typename... Ix> Scalar operator()(Ix... ix) const { return values_[offset(ix...)]; }

  /// First dimension as rows, the rest flattened into columns.
  MatrixMap matrix() { return MatrixMap(data(), dim(0), size() / std::max<Index>(dim(0), 1)); }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(data(), dim(0), size() / std::max<Index>(dim(0), 1));
  }
  MatrixMap matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return MatrixMap(data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return ConstMatrixMap(data(), rows, cols);
  }

  Tensor reshaped(Shape shape) const & {
    if (shape_size(shape) != size())
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), values_);
  }
  Tensor reshaped(Shape shape) && {
    if (shape_size(shape) != size())
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), std::move(values_));
  }

  template <typename Other> Tensor<Other> cast() const {
    return Tensor<Other>(shape_, values_.template cast<Other>().eval());
  }

  void set_zero() { values_.setZero(); }
  bool all_finite() const { return values_.allFinite(); }

  bool operator==(const Tensor &o) const {
    return shape_ == o.shape_ && values_.size() == o.values_.size() &&
           std::equal(values_.data(), values_.data() + values_.size(), o.values_.data());
  }

private:
  template <typename... Ix> Index offset(Ix... ix) const {
    const Index idx[] = {static_cast<Index>(ix)...};
    Index off = 0;
    for (std::size_t d = 0; d < sizeof...(Ix); ++d) off = off * shape_[d] + idx[d];
    return off;
  }
  void check_view(Index rows, Index cols) const {
    if (rows * cols != size())
      throw ShapeError("matrix view " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " of tensor " + shape_string(shape_));
  }

  Shape shape_;
  Vector values_;
};

template <typename Scalar> void require_shape(const Tensor<Scalar> &t, const Shape &s, const char *what) {
  if (t.shape() != s)
    throw ShapeError(std::string(what) + ": expected " + shape_string(s) + ", got " +
                     shape_string(t.shape()));
}

template <typename Scalar> void require_rank(const Tensor<Scalar> &t, Index rank, const char *what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
}

/// A trainable tensor and its accumulated gradient.
template <typename Scalar> struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<Scalar> v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor<Scalar>::zeros_like(value)) {}
  void zero_grad() { grad.set_zero(); }
};

/// Non-trainable state saved with a model (batch-norm running statistics).
template <typename Scalar> struct Buffer {
  std::string name;
  Tensor<Scalar> *value;
};

} // namespace snapture::nn
