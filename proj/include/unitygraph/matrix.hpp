#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <type_traits>
#include <vector>

#include "unitygraph/error.hpp"

namespace unitygraph {

/// Accumulator used for reductions. Single-precision data is summed in
/// double so that short sums are exact and independent of term order.
template <class S>
using acc_t = std::conditional_t<(sizeof(S) < sizeof(double)), double, S>;

/// Dense row-major matrix. Every tensor in the model is flattened to two
/// axes: rows index entities (joints, nodes, persons), columns features.
template <class S>
class Matrix {
 public:
  using value_type = S;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, S fill = S(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::initializer_list<S> values)
      : rows_(rows), cols_(cols), data_(values) {
    if (data_.size() != rows * cols) {
      throw Error(ErrorKind::shape_mismatch, "initializer size does not match matrix shape");
    }
  }
  Matrix(std::size_t rows, std::size_t cols, std::vector<S> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols) {
      throw Error(ErrorKind::shape_mismatch, "buffer size does not match matrix shape");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  S& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  const S& operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }

  std::span<S> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const S> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  S* data() noexcept { return data_.data(); }
  const S* data() const noexcept { return data_.data(); }
  std::vector<S>& storage() noexcept { return data_; }
  const std::vector<S>& storage() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  /// Reinterprets the buffer with a new shape of equal size.
  Matrix reshaped(std::size_t rows, std::size_t cols) const {
    if (rows * cols != data_.size()) {
      throw Error(ErrorKind::shape_mismatch, "reshape changes element count");
    }
    Matrix out = *this;
    out.rows_ = rows;
    out.cols_ = cols;
    return out;
  }

  void fill(S value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](S v) { return std::isfinite(v); });
  }

  template <class T>
  Matrix<T> cast() const {
    Matrix<T> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
    return out;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<S> data_;
};

template <class S>
S max_abs_diff(const Matrix<S>& a, const Matrix<S>& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::shape_mismatch, "max_abs_diff shape mismatch");
  S best = 0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
  return best;
}

}  // namespace unitygraph
