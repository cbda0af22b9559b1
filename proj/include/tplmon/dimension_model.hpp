#pragma once

// Physics-informed structure-dimension models
//   R = a_R sqrt(ln(b_R LP^2/SR)) + c_R
//   H = a_H sqrt(sqrt(b_H LP^2/SR) - 1) + c_H
// their per-design least-squares fits and the linear trend of the fitted
// coefficients across design dimensions.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tplmon/dataset.hpp"
#include "tplmon/errors.hpp"
#include "tplmon/hypothesis.hpp"
#include "tplmon/levenberg_marquardt.hpp"

namespace tplmon {

enum class Feature { Radius, Height };

std::string_view to_string(Feature f);

/// Coefficients (a, b, c) of one dimension model. `b` scales the dose proxy.
template <Feature F>
struct ModelParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  Eigen::Vector3d vector() const { return {a, b, c}; }
  static ModelParams from_vector(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using RadiusModelParams = ModelParams<Feature::Radius>;
using HeightModelParams = ModelParams<Feature::Height>;

/// Shape term multiplying `a`; NaN outside the model domain.
template <typename Scalar>
Scalar radius_shape(Scalar b, Scalar dose) {
  using std::log;
  using std::sqrt;
  return sqrt(log(b * dose));
}

template <typename Scalar>
Scalar height_shape(Scalar b, Scalar dose) {
  using std::sqrt;
  return sqrt(sqrt(b * dose) - Scalar(1));
}

template <Feature F, typename Scalar>
Scalar model_shape(Scalar b, Scalar dose) {
  if constexpr (F == Feature::Radius) {
    return radius_shape(b, dose);
  } else {
    return height_shape(b, dose);
  }
}

/// Derivative of the shape term with respect to b.
template <Feature F>
double model_shape_db(double b, double dose) {
  if constexpr (F == Feature::Radius) {
    return 1.0 / (2.0 * radius_shape(b, dose) * b);
  } else {
    const double s = std::sqrt(b * dose);
    return dose / (4.0 * height_shape(b, dose) * s);
  }
}

/// Both models are defined iff b * dose > 1.
inline bool in_model_domain(double b, double dose) { return b * dose > 1.0; }

double predict_radius(const RadiusModelParams& params, const ProcessParams& p);
double predict_height(const HeightModelParams& params, const ProcessParams& p);

template <Feature F>
double predict(const ModelParams<F>& params, const ProcessParams& p) {
  if constexpr (F == Feature::Radius) {
    return predict_radius(params, p);
  } else {
    return predict_height(params, p);
  }
}

/// One training observation collapsed to its cell: weight = record count.
struct DosePoint {
  double dose = 0.0;
  double mean = 0.0;
  double weight = 0.0;
  double within_ss = 0.0;  ///< sum of squared deviations from the cell mean
};

template <Feature F>
struct ModelFit {
  ModelParams<F> params;
  double residual_norm = 0.0;  ///< record-level sqrt(sum of squared residuals)
  int starts_converged = 0;
};

struct FitOptions {
  int multi_starts = 16;
  LmOptions lm;
};

/// Least-squares fit of one model to aggregated points (>= 3 distinct
/// groups). b is searched as b = (1 + e^u) / min dose so every iterate stays
/// in the domain; each start solves (a, c) linearly for its b.
template <Feature F>
ModelFit<F> fit_model(std::span<const DosePoint> points, const FitOptions& options = {});

/// Aggregates the records of each parameter group of one design.
std::vector<DosePoint> dose_points(std::span<const Cell> cells, Feature feature);

struct DesignFit {
  DesignSpec design;
  RadiusModelParams radius;
  HeightModelParams height;
  double radius_residual_norm = 0.0;
  double height_residual_norm = 0.0;
  std::vector<ProcessParams> training_groups;

  /// (a_R, b_R, c_R, a_H, b_H, c_H)
  Eigen::Matrix<double, 6, 1> coefficients() const;
};

/// Fits both models to the cells of one design. Needs >= 3 distinct
/// parameter groups with at least one record each.
DesignFit fit_models(std::span<const Cell> cells, const FitOptions& options = {});

/// Per-design fits; ordered by design dimension.
struct FittedModelSet {
  std::vector<DesignFit> designs;
};

inline constexpr std::array<std::string_view, 6> kCoefficientNames = {"a_R", "b_R", "c_R",
                                                                       "a_H", "b_H", "c_H"};

/// Each coefficient as intercept + slope * D.
struct ParamTrend {
  Eigen::Matrix<double, 6, 1> intercept = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> slope = Eigen::Matrix<double, 6, 1>::Zero();
  /// residuals(k, j): coefficient k of design j minus its trend value.
  Eigen::Matrix<double, 6, Eigen::Dynamic> residuals;
  std::vector<DesignSpec> designs;

  Eigen::Matrix<double, 6, 1> at(const DesignSpec& d) const {
    return intercept + slope * d.design_dimension;
  }
  RadiusModelParams radius_at(const DesignSpec& d) const;
  HeightModelParams height_at(const DesignSpec& d) const;
};

/// Ordinary least-squares line of every coefficient against D.
ParamTrend fit_param_trend(const FittedModelSet& models);

/// Refines a trend by fitting intercepts and slopes of each model jointly to
/// the training cells (weighted by record count), starting from `initial`.
/// The result keeps the per-design residuals of `models` against the
/// refined lines.
ParamTrend refine_param_trend(const ParamTrend& initial, const FittedModelSet& models,
                              std::span<const Cell> training_cells, const FitOptions& options = {});

/// Predicted (R, H) for a design and parameter group via the trend.
/// Throws DomainError (extrapolation) when the trend coefficients leave the
/// model domain at this cell.
MeanVector2 predict_for_new_cell(const ParamTrend& trend, const DesignSpec& design,
                                 const ProcessParams& p);

nlohmann::ordered_json to_json(const FittedModelSet& models);
FittedModelSet fitted_models_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ParamTrend& trend);

}  // namespace tplmon
