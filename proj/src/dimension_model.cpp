#include "tplmon/dimension_model.hpp"

#include <algorithm>
#include <limits>

namespace tplmon {

std::string_view to_string(Feature f) { return f == Feature::Radius ? "radius" : "height"; }

namespace {

template <Feature F>
double checked_predict(const ModelParams<F>& params, const ProcessParams& p) {
  const double dose = p.dose();
  if (!in_model_domain(params.b, dose)) {
    throw DomainError(std::string(to_string(F)) + " model undefined at " + to_string(p) +
                      ": b * LP^2/SR = " + format_double(params.b * dose) + " <= 1");
  }
  return params.a * model_shape<F>(params.b, dose) + params.c;
}

// Weighted linear least squares for (a, c) in y = a g + c.
std::pair<double, double> solve_scale_offset(const Eigen::VectorXd& g, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& w) {
  const double sw = w.sum();
  const double gbar = w.dot(g) / sw;
  const double ybar = w.dot(y) / sw;
  const Eigen::VectorXd gc = g.array() - gbar;
  const double sgg = (w.array() * gc.array().square()).sum();
  if (!(sgg > 0.0)) return {0.0, ybar};
  const double a = (w.array() * gc.array() * (y.array() - ybar)).sum() / sgg;
  return {a, ybar - a * gbar};
}

constexpr double kMinLogOffset = -35.0;

}  // namespace

double predict_radius(const RadiusModelParams& params, const ProcessParams& p) {
  return checked_predict(params, p);
}

double predict_height(const HeightModelParams& params, const ProcessParams& p) {
  return checked_predict(params, p);
}

template <Feature F>
ModelFit<F> fit_model(std::span<const DosePoint> points, const FitOptions& options) {
  if (points.size() < 3) {
    throw InsufficientDataError("model fit needs at least 3 distinct parameter groups, got " +
                                std::to_string(points.size()));
  }
  const auto m = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd dose(m), y(m), w(m);
  double within_ss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    dose(i) = points[i].dose;
    y(i) = points[i].mean;
    w(i) = points[i].weight;
    within_ss += points[i].within_ss;
  }
  const double b_floor = 1.0 / dose.minCoeff();

  const auto problem = [&](const Eigen::Vector3d& x, Eigen::VectorXd& r,
                           Eigen::Matrix<double, Eigen::Dynamic, 3>& J) {
    if (x(1) < kMinLogOffset) return false;
    const double e = std::exp(x(1));
    const double b = b_floor * (1.0 + e);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!in_model_domain(b, dose(i))) return false;
      const double g = model_shape<F>(b, dose(i));
      r(i) = x(0) * g + x(2) - y(i);
      J(i, 0) = g;
      J(i, 1) = x(0) * model_shape_db<F>(b, dose(i)) * b_floor * e;
      J(i, 2) = 1.0;
    }
    return true;
  };

  ModelFit<F> best;
  double best_cost = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best_x = Eigen::Vector3d::Zero();
  const int starts = std::max(1, options.multi_starts);
  Eigen::VectorXd g(m);
  for (int k = 0; k < starts; ++k) {
    // e^u log-spaced over [1e-3, 1e2].
    const double frac = starts == 1 ? 0.5 : static_cast<double>(k) / (starts - 1);
    const double u = std::log(std::pow(10.0, -3.0 + 5.0 * frac));
    const double b = b_floor * (1.0 + std::exp(u));
    for (Eigen::Index i = 0; i < m; ++i) g(i) = model_shape<F>(b, dose(i));
    const auto [a, c] = solve_scale_offset(g, y, w);
    const auto result = levenberg_marquardt<3>(problem, w, Eigen::Vector3d(a, u, c), options.lm);
    if (result.converged) ++best.starts_converged;
    if (result.cost < best_cost) {
      best_cost = result.cost;
      best_x = result.x;
    }
  }
  if (!std::isfinite(best_cost)) {
    throw FitFailureError(std::string(to_string(F)) + " model fit failed from every start");
  }
  best.params = {best_x(0), b_floor * (1.0 + std::exp(best_x(1))), best_x(2)};
  best.residual_norm = std::sqrt(best_cost + within_ss);
  return best;
}

template ModelFit<Feature::Radius> fit_model<Feature::Radius>(std::span<const DosePoint>,
                                                              const FitOptions&);
template ModelFit<Feature::Height> fit_model<Feature::Height>(std::span<const DosePoint>,
                                                              const FitOptions&);

std::vector<DosePoint> dose_points(std::span<const Cell> cells, Feature feature) {
  std::vector<DosePoint> points;
  points.reserve(cells.size());
  for (const auto& c : cells) {
    if (c.records.empty()) throw InsufficientDataError("empty cell " + to_string(c.key));
    double sum = 0.0;
    for (const auto& r : c.records) sum += feature == Feature::Radius ? r.radius : r.height;
    const double n = static_cast<double>(c.records.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : c.records) {
      const double v = (feature == Feature::Radius ? r.radius : r.height) - mean;
      ss += v * v;
    }
    points.push_back({c.key.params.dose(), mean, n, ss});
  }
  return points;
}

Eigen::Matrix<double, 6, 1> DesignFit::coefficients() const {
  Eigen::Matrix<double, 6, 1> v;
  v << radius.a, radius.b, radius.c, height.a, height.b, height.c;
  return v;
}

DesignFit fit_models(std::span<const Cell> cells, const FitOptions& options) {
  if (cells.empty()) throw InsufficientDataError("no training cells");
  std::vector<ProcessParams> groups;
  for (const auto& c : cells) {
    if (c.key.design != cells.front().key.design) {
      throw ArgumentError("fit_models expects cells of a single design");
    }
    if (std::find(groups.begin(), groups.end(), c.key.params) == groups.end()) {
      groups.push_back(c.key.params);
    }
  }
  if (groups.size() < 3 || groups.size() != cells.size()) {
    throw InsufficientDataError("fit_models needs at least 3 distinct parameter groups (got " +
                                std::to_string(groups.size()) + ")");
  }
  const auto radius_points = dose_points(cells, Feature::Radius);
  const auto height_points = dose_points(cells, Feature::Height);
  const auto radius = fit_model<Feature::Radius>(radius_points, options);
  const auto height = fit_model<Feature::Height>(height_points, options);
  return DesignFit{cells.front().key.design, radius.params,         height.params,
                   radius.residual_norm,     height.residual_norm, std::move(groups)};
}

RadiusModelParams ParamTrend::radius_at(const DesignSpec& d) const {
  const auto v = at(d);
  return {v(0), v(1), v(2)};
}

HeightModelParams ParamTrend::height_at(const DesignSpec& d) const {
  const auto v = at(d);
  return {v(3), v(4), v(5)};
}

namespace {

void fill_residuals(ParamTrend& trend, const FittedModelSet& models) {
  trend.designs.clear();
  trend.residuals.resize(6, static_cast<Eigen::Index>(models.designs.size()));
  for (std::size_t j = 0; j < models.designs.size(); ++j) {
    const auto& fit = models.designs[j];
    trend.designs.push_back(fit.design);
    trend.residuals.col(static_cast<Eigen::Index>(j)) = fit.coefficients() - trend.at(fit.design);
  }
}

}  // namespace

ParamTrend fit_param_trend(const FittedModelSet& models) {
  std::vector<double> distinct;
  for (const auto& f : models.designs) {
    if (std::find(distinct.begin(), distinct.end(), f.design.design_dimension) == distinct.end()) {
      distinct.push_back(f.design.design_dimension);
    }
  }
  if (distinct.size() < 2) {
    throw InsufficientDataError("parameter trend needs fits for at least 2 distinct designs");
  }
  const auto n = static_cast<Eigen::Index>(models.designs.size());
  Eigen::VectorXd x(n);
  Eigen::Matrix<double, 6, Eigen::Dynamic> y(6, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    x(j) = models.designs[static_cast<std::size_t>(j)].design.design_dimension;
    y.col(j) = models.designs[static_cast<std::size_t>(j)].coefficients();
  }
  const double xbar = x.mean();
  const Eigen::VectorXd xc = x.array() - xbar;
  const double sxx = xc.squaredNorm();

  ParamTrend trend;
  const Eigen::Matrix<double, 6, 1> ybar = y.rowwise().mean();
  trend.slope = ((y.colwise() - ybar) * xc) / sxx;
  trend.intercept = ybar - trend.slope * xbar;
  fill_residuals(trend, models);
  return trend;
}

namespace {

struct TrendPoint {
  double design;
  double dose;
  double mean;
  double weight;
};

// Joint fit of (a0, a1, b0, b1, c0, c1) for one model.
template <Feature F>
std::optional<Eigen::Matrix<double, 6, 1>> refine_model_trend(
    const std::vector<TrendPoint>& pts, Eigen::Matrix<double, 6, 1> start,
    const FitOptions& options) {
  const auto m = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) w(i) = pts[static_cast<std::size_t>(i)].weight;

  const auto problem = [&](const Eigen::Matrix<double, 6, 1>& x, Eigen::VectorXd& r,
                           Eigen::Matrix<double, Eigen::Dynamic, 6>& J) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& p = pts[static_cast<std::size_t>(i)];
      const double a = x(0) + x(1) * p.design;
      const double b = x(2) + x(3) * p.design;
      const double c = x(4) + x(5) * p.design;
      if (!in_model_domain(b, p.dose)) return false;
      const double g = model_shape<F>(b, p.dose);
      const double gb = a * model_shape_db<F>(b, p.dose);
      r(i) = a * g + c - p.mean;
      J.row(i) << g, g * p.design, gb, gb * p.design, 1.0, p.design;
    }
    return true;
  };
  const auto result = levenberg_marquardt<6>(problem, w, start, options.lm);
  if (!std::isfinite(result.cost)) return std::nullopt;
  return result.x;
}

}  // namespace

ParamTrend refine_param_trend(const ParamTrend& initial, const FittedModelSet& models,
                              std::span<const Cell> training_cells, const FitOptions& options) {
  std::vector<TrendPoint> radius_pts, height_pts;
  std::vector<double> design_floor;
  for (const auto& c : training_cells) {
    if (c.records.empty()) continue;
    const double n = static_cast<double>(c.records.size());
    double sr = 0.0, sh = 0.0;
    for (const auto& r : c.records) {
      sr += r.radius;
      sh += r.height;
    }
    const double d = c.key.design.design_dimension;
    radius_pts.push_back({d, c.key.params.dose(), sr / n, n});
    height_pts.push_back({d, c.key.params.dose(), sh / n, n});
  }
  ParamTrend refined = initial;

  const auto refine = [&]<Feature F>(const std::vector<TrendPoint>& pts, int offset) {
    Eigen::Matrix<double, 6, 1> start;
    start << initial.intercept(offset), initial.slope(offset), initial.intercept(offset + 1),
        initial.slope(offset + 1), initial.intercept(offset + 2), initial.slope(offset + 2);
    bool feasible = true;
    for (const auto& p : pts) {
      feasible = feasible && in_model_domain(start(2) + start(3) * p.design, p.dose);
    }
    if (!feasible) {
      // Flat b at the largest per-design b keeps every training cell in the
      // domain.
      double b_max = 0.0;
      for (const auto& f : models.designs) b_max = std::max(b_max, f.coefficients()(offset + 1));
      start(2) = b_max;
      start(3) = 0.0;
    }
    if (const auto x = refine_model_trend<F>(pts, start, options)) {
      refined.intercept(offset) = (*x)(0);
      refined.slope(offset) = (*x)(1);
      refined.intercept(offset + 1) = (*x)(2);
      refined.slope(offset + 1) = (*x)(3);
      refined.intercept(offset + 2) = (*x)(4);
      refined.slope(offset + 2) = (*x)(5);
    }
  };
  refine.template operator()<Feature::Radius>(radius_pts, 0);
  refine.template operator()<Feature::Height>(height_pts, 3);
  fill_residuals(refined, models);
  return refined;
}

MeanVector2 predict_for_new_cell(const ParamTrend& trend, const DesignSpec& design,
                                 const ProcessParams& p) {
  try {
    return {predict_radius(trend.radius_at(design), p), predict_height(trend.height_at(design), p)};
  } catch (const DomainError& e) {
    throw DomainError("extrapolation failure at D=" + format_double(design.design_dimension) +
                          ": " + e.what(),
                      true);
  }
}

namespace {

template <Feature F>
nlohmann::ordered_json params_json(const ModelParams<F>& p) {
  return {{"a", p.a}, {"b", p.b}, {"c", p.c}};
}

template <Feature F>
ModelParams<F> params_from_json(const nlohmann::json& j) {
  return {j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>()};
}

}  // namespace

nlohmann::ordered_json to_json(const FittedModelSet& models) {
  nlohmann::ordered_json designs = nlohmann::ordered_json::array();
  for (const auto& f : models.designs) {
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (const auto& g : f.training_groups) {
      groups.push_back({{"laser_power", g.laser_power}, {"scan_rate", g.scan_rate}});
    }
    designs.push_back({{"design", f.design.design_dimension},
                       {"radius", params_json(f.radius)},
                       {"height", params_json(f.height)},
                       {"radius_residual_norm", f.radius_residual_norm},
                       {"height_residual_norm", f.height_residual_norm},
                       {"training_groups", std::move(groups)}});
  }
  return {{"designs", std::move(designs)}};
}

FittedModelSet fitted_models_from_json(const nlohmann::json& j) {
  FittedModelSet models;
  try {
    for (const auto& d : j.at("designs")) {
      DesignFit f;
      f.design.design_dimension = d.at("design").get<double>();
      f.radius = params_from_json<Feature::Radius>(d.at("radius"));
      f.height = params_from_json<Feature::Height>(d.at("height"));
      f.radius_residual_norm = d.at("radius_residual_norm").get<double>();
      f.height_residual_norm = d.at("height_residual_norm").get<double>();
      for (const auto& g : d.at("training_groups")) {
        f.training_groups.push_back(
            {g.at("laser_power").get<double>(), g.at("scan_rate").get<double>()});
      }
      models.designs.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed model parameter document: ") + e.what());
  }
  return models;
}

nlohmann::ordered_json to_json(const ParamTrend& trend) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (int k = 0; k < 6; ++k) {
    std::vector<double> residuals(static_cast<std::size_t>(trend.residuals.cols()));
    for (Eigen::Index j = 0; j < trend.residuals.cols(); ++j) {
      residuals[static_cast<std::size_t>(j)] = trend.residuals(k, j);
    }
    out[std::string(kCoefficientNames[static_cast<std::size_t>(k)])] = {
        {"intercept", trend.intercept(k)}, {"slope", trend.slope(k)}, {"residuals", residuals}};
  }
  return out;
}

}  // namespace tplmon
