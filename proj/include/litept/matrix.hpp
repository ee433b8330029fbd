#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <initializer_list>
#include <span>
#include <vector>

#ifndef EIGEN_DONT_PARALLELIZE
#define EIGEN_DONT_PARALLELIZE
#endif
#include <Eigen/Core>

#include "litept/common.hpp"
#include "litept/random.hpp"

namespace litept {

/// Dense row-major matrix of 64-bit floats. The only tensor type in the
/// engine; feature maps are laid out [points x channels].
class Matrix {
 public:
  Matrix() = default;
  Matrix(index_t rows, index_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), fill) {
    require<DimError>(rows >= 0 && cols >= 0, "matrix shape (", rows, "x", cols, ") invalid");
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<index_t>(rows.size()),
             rows.size() ? static_cast<index_t>(rows.begin()->size()) : 0);
    index_t r = 0;
    for (const auto& row : rows) {
      require<DimError>(static_cast<index_t>(row.size()) == m.cols_, "ragged row in matrix literal");
      index_t c = 0;
      for (double v : row) m(r, c++) = v;
      ++r;
    }
    m.check_finite("matrix literal");
    return m;
  }

  static Matrix filled(index_t rows, index_t cols, double v) { return Matrix(rows, cols, v); }

  static Matrix random_uniform(index_t rows, index_t cols, double lo, double hi, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data_) v = rng.uniform(lo, hi);
    return m;
  }

  index_t rows() const { return rows_; }
  index_t cols() const { return cols_; }
  index_t size() const { return rows_ * cols_; }
  bool empty() const { return size() == 0; }

  double operator()(index_t r, index_t c) const { return data_[static_cast<std::size_t>(r * cols_ + c)]; }
  double& operator()(index_t r, index_t c) { return data_[static_cast<std::size_t>(r * cols_ + c)]; }

  const double* data() const { return data_.data(); }
  double* data() { return data_.data(); }
  const double* row(index_t r) const { return data_.data() + r * cols_; }
  double* row(index_t r) { return data_.data() + r * cols_; }
  std::span<const double> flat() const { return {data_.data(), data_.size()}; }
  std::span<double> flat() { return {data_.data(), data_.size()}; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void check_finite(const char* what) const {
#if !defined(NDEBUG) || defined(LITEPT_VALIDATE)
    require<DataError>(all_finite(), what, ": non-finite entry");
#else
    (void)what;
#endif
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ &&
           std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(double)) == 0;
  }

 private:
  index_t rows_ = 0;
  index_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {
using ERow = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
inline Eigen::Map<const ERow> emap(const Matrix& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
inline Eigen::Map<ERow> emap(Matrix& m) {
  return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
}  // namespace detail

inline std::string shape_str(const Matrix& m) { return cat(m.rows(), "x", m.cols()); }

// --- dense kernels -----------------------------------------------------

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require<DimError>(a.cols() == b.rows(), "matmul: inner dims differ (", shape_str(a), " vs ", shape_str(b), ")");
  Matrix c(a.rows(), b.cols());
  detail::emap(c).noalias() = detail::emap(a) * detail::emap(b);
  return c;
}

/// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require<DimError>(a.cols() == b.cols(), "matmul_nt: inner dims differ (", shape_str(a), " vs ", shape_str(b), ")");
  Matrix c(a.rows(), b.rows());
  detail::emap(c).noalias() = detail::emap(a) * detail::emap(b).transpose();
  return c;
}

/// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require<DimError>(a.rows() == b.rows(), "matmul_tn: inner dims differ (", shape_str(a), " vs ", shape_str(b), ")");
  Matrix c(a.cols(), b.cols());
  detail::emap(c).noalias() = detail::emap(a).transpose() * detail::emap(b);
  return c;
}

/// scale * a * b^T with a plain scalar loop, accumulating over the shared
/// dimension in strictly ascending index order. The attention logits go
/// through this kernel so a per-pair reference computation reproduces the
/// exact same float sequence.
inline Matrix scaled_dot_nt_exact(const Matrix& a, const Matrix& b, double scale) {
  require<DimError>(a.cols() == b.cols(), "scaled_dot_nt_exact: dims differ (", shape_str(a), " vs ", shape_str(b), ")");
  const index_t m = a.rows(), n = b.rows(), d = a.cols();
  Matrix c(m, n);
  for (index_t i = 0; i < m; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (index_t j = 0; j < n; ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (index_t t = 0; t < d; ++t) acc += ai[t] * bj[t];
      ci[j] = acc * scale;
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (index_t r = 0; r < a.rows(); ++r)
    for (index_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  require<DimError>(a.same_shape(b), "add: shapes differ (", shape_str(a), " vs ", shape_str(b), ")");
  Matrix c = a;
  double* cd = c.data();
  const double* bd = b.data();
  for (index_t i = 0, n = c.size(); i < n; ++i) cd[i] += bd[i];
  return c;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
  require<DimError>(a.same_shape(b), "add_inplace: shapes differ (", shape_str(a), " vs ", shape_str(b), ")");
  double* ad = a.data();
  const double* bd = b.data();
  for (index_t i = 0, n = a.size(); i < n; ++i) ad[i] += bd[i];
}

inline Matrix scaled(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.flat()) v *= s;
  return c;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  require<DimError>(a.same_shape(b), "hadamard: shapes differ");
  Matrix c = a;
  double* cd = c.data();
  const double* bd = b.data();
  for (index_t i = 0, n = c.size(); i < n; ++i) cd[i] *= bd[i];
  return c;
}

/// Column sums as a 1 x C row.
inline Matrix col_sums(const Matrix& a) {
  Matrix s(1, a.cols());
  for (index_t r = 0; r < a.rows(); ++r)
    for (index_t c = 0; c < a.cols(); ++c) s(0, c) += a(r, c);
  return s;
}

inline double sum_all(const Matrix& a) {
  double s = 0.0;
  for (double v : a.flat()) s += v;
  return s;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  require<DimError>(a.same_shape(b), "max_abs_diff: shapes differ");
  double m = 0.0;
  const double* ad = a.data();
  const double* bd = b.data();
  for (index_t i = 0, n = a.size(); i < n; ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

}  // namespace litept
