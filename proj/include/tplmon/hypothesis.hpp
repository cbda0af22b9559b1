#pragma once

// Test statistics used by the monitoring methods: pooled two-sample t,
// one-sample Z, one-sample Hotelling T^2 and an empirical (leave-one-out)
// T^2 membership rule. Inputs are any Eigen expression; rows of a matrix are
// observations.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "tplmon/distributions.hpp"
#include "tplmon/errors.hpp"
#include "tplmon/stats.hpp"

namespace tplmon {

/// Bivariate (radius, height) mean in µm; index 0 is R, index 1 is H.
using MeanVector2 = Eigen::Vector2d;

struct DegreesOfFreedom {
  double first = 0.0;
  double second = 0.0;
};

struct TestOutcome {
  double statistic = 0.0;
  double critical_value = 0.0;
  std::optional<double> p_value;
  bool reject_null = false;
  SignificanceLevel alpha{0.10};
  DegreesOfFreedom dof;
};

struct ZTestOptions {
  /// Divide by s / sqrt(n) instead of the sample standard deviation s.
  bool standard_error_z = false;
};

struct CovarianceOptions {
  /// Largest accepted condition number of the sample covariance.
  double condition_cap = 1e12;
};

/// Pooled two-sample t-test with s_p = sqrt((s1^2 + s2^2) / 2), two-sided.
template <typename D1, typename D2>
TestOutcome two_sample_t(const Eigen::DenseBase<D1>& group1, const Eigen::DenseBase<D2>& group2,
                         SignificanceLevel alpha) {
  const auto n1 = static_cast<double>(group1.size());
  const auto n2 = static_cast<double>(group2.size());
  if (group1.size() < 2 || group2.size() < 2) {
    throw InsufficientDataError("two-sample t-test needs at least 2 samples per group");
  }
  const double s_pooled =
      std::sqrt((sample_variance(group1) + sample_variance(group2)) / 2.0);
  if (!(s_pooled > 0.0)) {
    throw DegenerateVarianceError("two-sample t-test: pooled standard deviation is zero");
  }
  const double t = (group1.derived().mean() - group2.derived().mean()) /
                   (s_pooled * std::sqrt(1.0 / n1 + 1.0 / n2));
  const double dof = n1 + n2 - 2.0;

  TestOutcome out;
  out.statistic = t;
  out.critical_value = t_quantile(1.0 - alpha.value() / 2.0, dof);
  out.p_value = 2.0 * t_cdf(-std::abs(t), dof);
  out.reject_null = std::abs(t) > out.critical_value;
  out.alpha = alpha;
  out.dof = {dof, 0.0};
  return out;
}

/// One-sample Z-test of the sample mean against mu0. By default the
/// statistic is (mean - mu0) / s; see ZTestOptions for the s / sqrt(n) form.
template <typename Derived>
TestOutcome one_sample_z(const Eigen::DenseBase<Derived>& samples, double mu0,
                         SignificanceLevel alpha, ZTestOptions options = {}) {
  if (samples.size() < 2) throw InsufficientDataError("Z-test needs at least 2 samples");
  const double s = std::sqrt(sample_variance(samples));
  if (!(s > 0.0)) throw DegenerateVarianceError("Z-test: sample standard deviation is zero");
  const double scale =
      options.standard_error_z ? s / std::sqrt(static_cast<double>(samples.size())) : s;
  const double z = (samples.derived().mean() - mu0) / scale;

  TestOutcome out;
  out.statistic = z;
  out.critical_value = normal_quantile(1.0 - alpha.value() / 2.0);
  out.p_value = 2.0 * normal_cdf(-std::abs(z));
  out.reject_null = std::abs(z) > out.critical_value;
  out.alpha = alpha;
  return out;
}

namespace detail {

// Factorizes a symmetric covariance after checking its conditioning.
template <typename Derived>
Eigen::PartialPivLU<Eigen::MatrixXd> checked_covariance_lu(const Eigen::MatrixBase<Derived>& cov,
                                                           CovarianceOptions options) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.derived(),
                                                           Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || !(hi / lo <= options.condition_cap)) {
    throw SingularCovarianceError("sample covariance is singular or ill-conditioned");
  }
  return Eigen::PartialPivLU<Eigen::MatrixXd>(cov.derived());
}

}  // namespace detail

/// Mahalanobis quadratic form d' S^-1 d with the conditioning check applied.
template <typename DV, typename DS>
double mahalanobis_squared(const Eigen::MatrixBase<DV>& d, const Eigen::MatrixBase<DS>& cov,
                           CovarianceOptions options = {}) {
  const auto lu = detail::checked_covariance_lu(cov, options);
  const Eigen::VectorXd dv = d;
  return dv.dot(lu.solve(dv));
}

/// Critical value p(n-1)/(n-p) F_{alpha; p, n-p} of the one-sample T^2 test.
inline double hotelling_critical(SignificanceLevel alpha, int p, int n) {
  if (n <= p) throw InsufficientDataError("Hotelling T^2 needs n > p");
  return static_cast<double>(p) * (n - 1) / static_cast<double>(n - p) *
         f_critical(alpha, p, n - p);
}

/// Upper-tail p-value of a one-sample T^2 value.
inline double hotelling_p_value(double t2, int p, int n) {
  const double f = t2 * (n - p) / (static_cast<double>(p) * (n - 1));
  return 1.0 - f_cdf(f, static_cast<double>(p), static_cast<double>(n - p));
}

/// One-sample Hotelling T^2 = n (xbar - mu0)' S^-1 (xbar - mu0); rows of
/// `samples` are observations, columns are the p variables.
template <typename DX, typename DM>
TestOutcome hotelling_t2_one_sample(const Eigen::MatrixBase<DX>& samples,
                                    const Eigen::MatrixBase<DM>& mu0, SignificanceLevel alpha,
                                    CovarianceOptions options = {}) {
  const auto n = static_cast<int>(samples.rows());
  const auto p = static_cast<int>(samples.cols());
  if (mu0.size() != p) throw ArgumentError("Hotelling T^2: mu0 dimension does not match samples");
  if (n <= p) throw InsufficientDataError("Hotelling T^2 needs more observations than variables");

  const Eigen::MatrixXd x = samples.template cast<double>();
  const Eigen::VectorXd mean = column_means(x);
  const Eigen::VectorXd diff = mean - mu0.template cast<double>();
  const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
  detail::checked_covariance_lu(sample_covariance(x), options);
  // With centered = QR, (n - 1) S = R'R, so d' S^-1 d = (n - 1) |R'^-1 d|^2.
  // Solving against R avoids the cancellation of forming S explicitly.
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(centered);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(p).template triangularView<Eigen::Upper>();
  const Eigen::VectorXd w = r.transpose().template triangularView<Eigen::Lower>().solve(diff);
  const double t2 = static_cast<double>(n) * (n - 1) * w.squaredNorm();

  TestOutcome out;
  out.statistic = t2;
  out.critical_value = hotelling_critical(alpha, p, n);
  out.p_value = hotelling_p_value(t2, p, n);
  out.reject_null = t2 > out.critical_value;
  out.alpha = alpha;
  out.dof = {static_cast<double>(p), static_cast<double>(n - p)};
  return out;
}

struct MembershipDecision {
  double candidate_t2 = 0.0;
  /// Empirical (1 - alpha) quantile of the leave-one-out values.
  double threshold = 0.0;
  bool member = false;
  std::vector<double> loo_t2;
};

/// Leave-one-out T^2 of each reference point about the mean and covariance of
/// the remaining points.
template <typename DX>
std::vector<double> leave_one_out_t2(const Eigen::MatrixBase<DX>& reference,
                                     CovarianceOptions options = {}) {
  const Eigen::MatrixXd x = reference.template cast<double>();
  const Eigen::Index n = x.rows();
  if (n < x.cols() + 2) {
    throw InsufficientDataError("leave-one-out T^2 needs at least p + 2 reference points");
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n));
  Eigen::MatrixXd rest(n - 1, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    rest.topRows(i) = x.topRows(i);
    rest.bottomRows(n - 1 - i) = x.bottomRows(n - 1 - i);
    const Eigen::VectorXd d = x.row(i).transpose() - column_means(rest);
    values.push_back(mahalanobis_squared(d, sample_covariance(rest), options));
  }
  return values;
}

/// Declares `candidate` a member of the reference cloud when its T^2 about
/// the reference mean does not exceed the (1 - alpha) quantile of the
/// reference's own leave-one-out T^2 values.
template <typename DX, typename DC>
MembershipDecision empirical_t2_membership(const Eigen::MatrixBase<DX>& reference,
                                           const Eigen::MatrixBase<DC>& candidate,
                                           SignificanceLevel alpha, CovarianceOptions options = {}) {
  const Eigen::MatrixXd x = reference.template cast<double>();
  if (candidate.size() != x.cols()) {
    throw ArgumentError("membership: candidate dimension does not match reference");
  }
  MembershipDecision out;
  out.loo_t2 = leave_one_out_t2(x, options);
  const Eigen::VectorXd d = candidate.template cast<double>() - column_means(x);
  out.candidate_t2 = mahalanobis_squared(d, sample_covariance(x), options);
  out.threshold = quantile(out.loo_t2, 1.0 - alpha.value());
  out.member = out.candidate_t2 <= out.threshold;
  return out;
}

}  // namespace tplmon
