#pragma once

// Evaluation harness: synthetic scenarios, per-method accuracy tables, the
// sample-size and training-size sweeps, and the null-calibration report.

#include <cstdint>
#include <span>
#include <vector>

#include "tplmon/method1.hpp"
#include "tplmon/method2.hpp"
#include "tplmon/method3.hpp"
#include "tplmon/twin.hpp"

namespace tplmon {

/// A status-1 reference grid plus independent in-control (status 1) and
/// out-of-control (status 2) query grids of the same shape.
struct Scenario {
  StatusProfile status1;
  StatusProfile status2;
  std::vector<DesignSpec> designs;
  std::vector<ProcessParams> groups;
  DatasetGrid reference;
  DatasetGrid in_control;
  DatasetGrid out_of_control;
};

/// Grids use the streams derive_seed(seed, {1}), {2} and {3}.
Scenario make_scenario(const StatusProfile& base, const OffsetSpec& offset,
                       std::vector<DesignSpec> designs, std::vector<ProcessParams> groups,
                       int n_per_cell, std::uint64_t seed);

struct M1Evaluation {
  GridReportM1 in_control;
  GridReportM1 out_of_control;
  AccuracyTable table;
};

M1Evaluation evaluate_m1(const Scenario& s, SignificanceLevel alpha);

struct M2Evaluation {
  AccuracyTable t2;
  AccuracyTable z_radius;
  AccuracyTable z_height;
  /// Out-of-control cells where the T^2 test rejects but the radius (or
  /// height) Z-test accepts.
  std::vector<CellKey> t2_only_radius;
  std::vector<CellKey> t2_only_height;
  std::vector<MonitorVerdict> verdicts;  ///< T^2, out-of-control
};

/// Leave-one-cell-out: every cell of the reference grid is predicted from the
/// remaining cells and tested with both query grids.
M2Evaluation evaluate_m2(const Scenario& s, SignificanceLevel alpha,
                         const Method2Options& options = {});

/// Trials are every design combined with every 3-subset of its groups. Each
/// trial draws `samples_per_group` records per cell from the reference and
/// from each query grid, then bootstraps and tests both models.
AccuracyTable evaluate_m3_same(const Scenario& s, SignificanceLevel alpha,
                               const BootstrapOptions& bootstrap, const SameGroupOptions& test,
                               std::uint64_t seed);

/// Trials are (design, unknown target group, repetition). Thresholds come
/// from the other groups of the reference grid; the query distributions
/// bootstrap the target group and its companion groups of a query grid.
/// Trials whose thresholds are incomplete are counted as failures.
AccuracyTable evaluate_m3_unknown(const Scenario& s, const ThresholdOptions& thresholds,
                                  int vote_cap, int repetitions, std::uint64_t seed);

/// First `n` records of a seeded shuffle of each cell.
std::vector<Cell> subsample_cells(std::span<const Cell> cells, int n, std::uint64_t seed);

/// Error rates of the two-sample t-test against per-cell sample size.
struct SampleSizeSweep {
  std::vector<int> sizes;
  int repetitions = 0;
  /// Per size: Type I / Type II for radius and height, with standard errors.
  std::vector<double> type1_radius, type2_radius, type1_height, type2_height;
  std::vector<double> type1_radius_se, type2_radius_se, type1_height_se, type2_height_se;
};

/// Each repetition subsamples `n` records without replacement from every
/// cell of the three grids and runs Method 1 on all cells.
SampleSizeSweep sample_size_sweep_m1(const Scenario& s, std::span<const int> sizes,
                                     SignificanceLevel alpha, int repetitions, std::uint64_t seed);

nlohmann::ordered_json to_json(const SampleSizeSweep& sweep);
std::string to_tsv(const SampleSizeSweep& sweep);

struct CalibrationRow {
  std::string test;
  double alpha = 0.0;
  long trials = 0;
  long rejections = 0;
  double rate() const noexcept { return trials ? static_cast<double>(rejections) / trials : 0.0; }
};

struct CalibrationOptions {
  long trials = 10000;
  int t_group_size = 20;
  int z_sample_size = 400;
  int t2_sample_size = 20;
  double t2_correlation = 0.94;
  ZTestOptions z;
};

/// Empirical Type I rates of each test on Gaussian null data.
std::vector<CalibrationRow> null_calibration(std::span<const double> alphas,
                                             const CalibrationOptions& options,
                                             std::uint64_t seed);

nlohmann::ordered_json to_json(std::span<const CalibrationRow> rows);

}  // namespace tplmon
