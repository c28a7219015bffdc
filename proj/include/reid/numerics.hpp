#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "reid/error.hpp"

namespace reid {

using Vec = std::vector<double>;

inline constexpr double kZeroNormThreshold = 1e-12;

/// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void set_row(std::size_t r, std::span<const double> v) {
    if (v.size() != cols_) {
      throw Error(Errc::dim_mismatch, "row of length " + std::to_string(v.size()) +
                                          " into matrix with " + std::to_string(cols_) + " columns");
    }
    std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(r * cols_));
  }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  void fill(double x) { std::fill(data_.begin(), data_.end(), x); }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::dim_mismatch, "dot of lengths " + std::to_string(a.size()) + " and " +
                                        std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline Vec l2_normalize(std::span<const double> v) {
  const double n = norm2(v);
  if (!(n > kZeroNormThreshold)) {
    throw Error(Errc::zero_vector, "cannot normalize vector with norm " + std::to_string(n));
  }
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

inline void l2_normalize_inplace(std::span<double> v) {
  const double n = norm2(v);
  if (!(n > kZeroNormThreshold)) {
    throw Error(Errc::zero_vector, "cannot normalize vector with norm " + std::to_string(n));
  }
  for (double& x : v) x /= n;
}

/// Inner product of two unit vectors, clamped to [-1, 1].
inline double cosine(std::span<const double> u, std::span<const double> v) {
  return std::clamp(dot(u, v), -1.0, 1.0);
}

/// Cosine similarity between every pair of rows. Diagonal is exactly 1.
inline Mat pairwise_similarity(const Mat& features) {
  const std::size_t n = features.rows();
  Mat s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    const auto fi = features.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = cosine(fi, features.row(j));
      s(i, j) = c;
      s(j, i) = c;
    }
  }
  return s;
}

inline Mat pairwise_similarity(const std::vector<Vec>& features) {
  if (features.empty()) return Mat{};
  const std::size_t d = features.front().size();
  Mat f(features.size(), d);
  for (std::size_t i = 0; i < features.size(); ++i) f.set_row(i, features[i]);
  return pairwise_similarity(f);
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += a * x[k];
}

}  // namespace reid
