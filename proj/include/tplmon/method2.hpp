#pragma once

// Method 2: predict the in-control mean (R, H) of a cell the reference data
// does not cover, then test query samples against the prediction with the
// one-sample Z-test, Hotelling's T^2 or the empirical T^2 membership rule.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tplmon/dataset.hpp"
#include "tplmon/dimension_model.hpp"
#include "tplmon/monitor.hpp"

namespace tplmon {

struct Method2Options {
  FitOptions fit;
  /// Jointly refit trend intercepts and slopes to the training cells.
  bool refine_trend = true;
  ZTestOptions z;
  CovarianceOptions covariance;
};

struct BaselinePrediction {
  CellKey cell;
  MeanVector2 mu0 = MeanVector2::Zero();
  FittedModelSet models;
  ParamTrend trend;
  std::size_t training_cells = 0;
};

/// Fits every training design with >= 3 parameter groups, fits the trend
/// over those designs and evaluates it at `key`. Cells matching `key` are
/// excluded from training. Throws CoverageError when fewer than two designs
/// can be fitted.
BaselinePrediction predict_baseline(std::span<const Cell> training, const CellKey& key,
                                    const Method2Options& options = {});
BaselinePrediction predict_baseline(const DatasetGrid& reference, const CellKey& key,
                                    const Method2Options& options = {});

MonitorVerdict test_prediction_z(const BaselinePrediction& prediction,
                                 std::span<const MeasurementRecord> query, Feature feature,
                                 SignificanceLevel alpha, const Method2Options& options = {});
MonitorVerdict test_prediction_t2(const BaselinePrediction& prediction,
                                  std::span<const MeasurementRecord> query,
                                  SignificanceLevel alpha, const Method2Options& options = {});

MonitorVerdict monitor_cell_m2_z(const DatasetGrid& reference,
                                 std::span<const MeasurementRecord> query, const CellKey& key,
                                 Feature feature, SignificanceLevel alpha,
                                 const Method2Options& options = {});
MonitorVerdict monitor_cell_m2_t2(const DatasetGrid& reference,
                                  std::span<const MeasurementRecord> query, const CellKey& key,
                                  SignificanceLevel alpha, const Method2Options& options = {});

struct StatusSamples {
  std::string status;
  std::vector<MeasurementRecord> records;
};

struct StatusMembership {
  std::string status;
  MembershipDecision decision;
};

/// Membership of the predicted mean in each status's (R, H) sample cloud.
std::vector<StatusMembership> classify_status_m2(const DatasetGrid& reference,
                                                 std::span<const StatusSamples> queries,
                                                 const CellKey& key, SignificanceLevel alpha,
                                                 const Method2Options& options = {});

/// Type I / Type II rates of the T^2 monitor as a function of how many
/// designs and parameter groups are available for training.
struct SweepSurface {
  std::vector<int> design_counts;
  std::vector<int> param_counts;
  int repetitions = 0;
  /// (design count index, param count index)
  Eigen::MatrixXd type1;
  Eigen::MatrixXd type2;
  Eigen::MatrixXd type1_se;
  Eigen::MatrixXd type2_se;
  Eigen::MatrixXi failures;
};

/// Each repetition draws a target cell, then n_designs - 1 further designs
/// and n_params - 1 further groups. Training is the resulting sub-grid of
/// `reference` without the target cell; the target cell of `in_control`
/// gives a Type I trial and of `out_of_control` a Type II trial. Repetitions
/// whose prediction fails are counted in `failures` and left out of the
/// rates.
SweepSurface data_efficiency_sweep_m2(const DatasetGrid& reference, const DatasetGrid& in_control,
                                      const DatasetGrid& out_of_control,
                                      std::span<const int> design_counts,
                                      std::span<const int> param_counts, SignificanceLevel alpha,
                                      int repetitions, std::uint64_t seed,
                                      const Method2Options& options = {});

nlohmann::ordered_json to_json(const SweepSurface& surface);
/// Tab-separated rows: n_designs, n_params, type1, type1_se, type2, type2_se, failures.
std::string to_tsv(const SweepSurface& surface);

}  // namespace tplmon
