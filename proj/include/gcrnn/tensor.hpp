#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gcrnn/errors.hpp"

namespace gcrnn {

/// Row-major dense matrix used for every node signal and filter tap block.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense real array of rank 0..3 in row-major order.
///
/// Storage is a row-major matrix so that rank-2 tensors map directly onto
/// Eigen expressions. Rank-0 and rank-1 tensors are stored as a single
/// column; a rank-3 tensor of shape (a, b, c) is stored as an (a*b) x c
/// matrix, which keeps the flat element order identical to the shape order.
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    detail::require(shape_.size() <= 3, "Tensor: rank must be <= 3, got " + shape_string(shape_));
    for (auto d : shape_) detail::require(d > 0, "Tensor: zero-sized dimension in " + shape_string(shape_));
    auto [r, c] = storage_dims(shape_);
    data_ = Matrix::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

  Tensor(Shape shape, double fill) : Tensor(std::move(shape)) { data_.setConstant(fill); }

  /// Rank-2 tensor that copies `m`.
  static Tensor from_matrix(const Matrix& m) {
    Tensor t(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    t.data_ = m;
    return t;
  }

  static Tensor scalar(double v) {
    Tensor t;
    t.data_(0, 0) = v;
    return t;
  }

  static Tensor from_values(Shape shape, std::initializer_list<double> values) {
    Tensor t(std::move(shape));
    detail::require(values.size() == t.numel(), "Tensor: value count does not match shape " + shape_string(t.shape_));
    std::copy(values.begin(), values.end(), t.data());
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return static_cast<std::size_t>(data_.size()); }
  bool is_scalar() const noexcept { return numel() == 1; }

  Eigen::Index rows() const noexcept { return data_.rows(); }
  Eigen::Index cols() const noexcept { return data_.cols(); }

  Matrix& matrix() noexcept { return data_; }
  const Matrix& matrix() const noexcept { return data_; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_.data()[i]; }
  double operator[](std::size_t i) const noexcept { return data_.data()[i]; }

  double item() const {
    detail::require(is_scalar(), "Tensor::item: tensor of shape " + shape_string(shape_) + " is not a scalar");
    return data_(0, 0);
  }

  /// Block k of a rank-3 tensor, viewed as a shape[1] x shape[2] matrix.
  auto slice(std::size_t k) {
    return data_.middleRows(static_cast<Eigen::Index>(k * shape_[1]), static_cast<Eigen::Index>(shape_[1]));
  }
  auto slice(std::size_t k) const {
    return data_.middleRows(static_cast<Eigen::Index>(k * shape_[1]), static_cast<Eigen::Index>(shape_[1]));
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::pair<std::size_t, std::size_t> storage_dims(const Shape& s) {
    switch (s.size()) {
      case 0: return {1, 1};
      case 1: return {s[0], 1};
      case 2: return {s[0], s[1]};
      default: return {s[0] * s[1], s[2]};
    }
  }

  Shape shape_;
  Matrix data_;
};

}  // namespace gcrnn
