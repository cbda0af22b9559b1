#pragma once

// Method 3: monitoring of the fitted model coefficients themselves through
// bootstrap distributions. Same-group comparison uses a Hotelling-type test;
// unknown groups use leave-one-out thresholds with majority voting.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tplmon/dataset.hpp"
#include "tplmon/dimension_model.hpp"
#include "tplmon/monitor.hpp"

namespace tplmon {

struct BootstrapOptions {
  int iterations = 40;
  int samples_per_group = 3;
  /// Fresh resamples tried for an iteration whose fit fails.
  int retry_cap = 5;
  /// Largest tolerated fraction of failed iterations.
  double max_failure_fraction = 0.2;
  FitOptions fit;
};

struct BootstrapDistribution {
  Feature feature = Feature::Radius;
  /// One (a, b, c) row per successful iteration, in iteration order.
  Eigen::Matrix<double, Eigen::Dynamic, 3> samples;
  std::vector<CellKey> source_cells;
  std::uint64_t seed = 0;
  int failed_iterations = 0;

  int iterations() const noexcept { return static_cast<int>(samples.rows()); }
  Eigen::Vector3d mean() const { return samples.colwise().mean().transpose(); }
};

/// Each iteration draws `samples_per_group` records with replacement from
/// every cell and refits one model. Iteration i uses the stream
/// derive_seed(seed, {i, attempt}).
BootstrapDistribution bootstrap_params(std::span<const Cell> cells, Feature feature,
                                       const BootstrapOptions& options, std::uint64_t seed);

enum class SameGroupStatistic {
  /// d' (S_ref + S_query)^-1 d with d the difference of the distribution means.
  Wald,
  /// n d' S_query^-1 d, the one-sample form with the reference mean as mu0.
  OneSample,
};

struct SameGroupOptions {
  SameGroupStatistic statistic = SameGroupStatistic::Wald;
  CovarianceOptions covariance;
};

/// Hotelling-type comparison of two bootstrap distributions of the same
/// model; the critical value is p(n-1)/(n-p) F(alpha; p, n-p) with n the
/// query iteration count.
MonitorVerdict test_same_group_m3(const BootstrapDistribution& reference,
                                  const BootstrapDistribution& query, SignificanceLevel alpha,
                                  const SameGroupOptions& options = {});

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double x) const noexcept { return lower <= x && x <= upper; }
};

enum class CombineRule { Envelope, Mean };

struct ThresholdOptions {
  BootstrapOptions bootstrap;
  double coverage = 0.95;
  /// Central (1 - alpha) quantile interval of each fold distribution.
  double alpha = 0.10;
  double widening_cap = 10.0;
  CombineRule combine = CombineRule::Envelope;
};

struct FoldInterval {
  ProcessParams held_out;
  std::array<std::optional<Bounds>, 3> bounds;
  std::array<double, 3> factor{};
  std::array<double, 3> coverage{};  ///< achieved on the held-out samples
};

struct ThresholdInterval {
  Feature feature = Feature::Radius;
  std::array<std::optional<Bounds>, 3> bounds;
  std::vector<FoldInterval> folds;

  bool complete() const noexcept { return bounds[0] && bounds[1] && bounds[2]; }
};

/// Interval [m - f (m - lo), m + f (hi - m)] for the smallest f in
/// [0, cap] that holds `coverage` of `held_out`; m, lo, hi are the median and
/// central (1 - alpha) quantiles of `fold`. Empty when f would exceed cap.
std::optional<Bounds> widen_to_coverage(std::vector<double> fold, std::span<const double> held_out,
                                        double alpha, double coverage, double cap,
                                        double* factor = nullptr);

/// Companion groups used with a single group to make a model fit possible:
/// the lowest- and highest-dose groups among `candidates` other than `group`.
std::vector<ProcessParams> companion_groups(const ProcessParams& group,
                                            std::span<const ProcessParams> candidates);

/// Algorithm 1 over the known groups of one design. For held-out group i the
/// fold distribution bootstraps the remaining groups and the held-out
/// distribution bootstraps group i with its companions. Parameters whose
/// widening factor exceeds the cap in any fold are left empty.
ThresholdInterval loo_threshold_bounds(std::span<const Cell> known_groups, Feature feature,
                                       const ThresholdOptions& options, std::uint64_t seed);

/// As loo_threshold_bounds but throws ThresholdFailureError naming the
/// parameters that could not be bounded.
ThresholdInterval loo_thresholds(std::span<const Cell> known_groups, Feature feature,
                                 const ThresholdOptions& options, std::uint64_t seed);

/// Majority vote over the six coefficients: a coefficient rejects when the
/// query distribution's mean lies outside its interval; "unchanged" iff at
/// most `vote_cap` reject. Throws IncompleteThresholdError when any interval
/// is missing.
MonitorVerdict monitor_unknown_group_m3(const ThresholdInterval& radius,
                                        const ThresholdInterval& height,
                                        const BootstrapDistribution& query_radius,
                                        const BootstrapDistribution& query_height,
                                        int vote_cap = 2);

nlohmann::ordered_json to_json(const BootstrapDistribution& dist);
BootstrapDistribution bootstrap_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ThresholdInterval& interval);
ThresholdInterval threshold_from_json(const nlohmann::json& j);

}  // namespace tplmon
