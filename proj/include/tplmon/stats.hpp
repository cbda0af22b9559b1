#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "tplmon/errors.hpp"

namespace tplmon {

template <typename Derived>
typename Derived::Scalar sample_mean(const Eigen::DenseBase<Derived>& x) {
  return x.derived().mean();
}

/// Unbiased sample variance (denominator n - 1).
template <typename Derived>
typename Derived::Scalar sample_variance(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.size();
  if (n < 2) throw InsufficientDataError("sample variance needs at least 2 values");
  const Scalar m = x.derived().mean();
  return (x.derived().array() - m).square().sum() / Scalar(n - 1);
}

/// Column means of an observations-by-variables matrix.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> column_means(
    const Eigen::MatrixBase<Derived>& x) {
  return x.colwise().mean().transpose();
}

/// Unbiased sample covariance of an observations-by-variables matrix.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> sample_covariance(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.rows();
  if (n < 2) throw InsufficientDataError("sample covariance needs at least 2 observations");
  const auto centered = (x.rowwise() - x.colwise().mean()).eval();
  return (centered.transpose() * centered) / Scalar(n - 1);
}

/// Linear-interpolation quantile of already sorted values (the "type 7"
/// definition: h = (n - 1) p).
template <typename Scalar>
Scalar sorted_quantile(const std::vector<Scalar>& sorted, double p) {
  if (sorted.empty()) throw InsufficientDataError("quantile of an empty sample");
  p = std::clamp(p, 0.0, 1.0);
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + Scalar(h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

template <typename Scalar>
Scalar quantile(std::vector<Scalar> values, double p) {
  std::sort(values.begin(), values.end());
  return sorted_quantile(values, p);
}

}  // namespace tplmon
