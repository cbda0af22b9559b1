#include "tplmon/method3.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tplmon/parallel.hpp"
#include "tplmon/rng.hpp"

namespace tplmon {

namespace {

std::string_view coefficient_name(Feature feature, int k) {
  return kCoefficientNames[static_cast<std::size_t>((feature == Feature::Radius ? 0 : 3) + k)];
}

Eigen::Vector3d fit_vector(std::span<const DosePoint> points, Feature feature,
                           const FitOptions& options) {
  if (feature == Feature::Radius) return fit_model<Feature::Radius>(points, options).params.vector();
  return fit_model<Feature::Height>(points, options).params.vector();
}

// Bootstrap resample of every cell, collapsed to one dose point per cell.
std::vector<DosePoint> resample(std::span<const Cell> cells, Feature feature, int per_group,
                                SplitMix64& rng) {
  std::vector<DosePoint> points;
  points.reserve(cells.size());
  std::vector<double> values(static_cast<std::size_t>(per_group));
  for (const auto& c : cells) {
    double sum = 0.0;
    for (auto& v : values) {
      const auto& r = c.records[rng.uniform_index(c.records.size())];
      v = feature == Feature::Radius ? r.radius : r.height;
      sum += v;
    }
    const double mean = sum / per_group;
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    points.push_back({c.key.params.dose(), mean, static_cast<double>(per_group), ss});
  }
  return points;
}

}  // namespace

BootstrapDistribution bootstrap_params(std::span<const Cell> cells, Feature feature,
                                       const BootstrapOptions& options, std::uint64_t seed) {
  if (options.iterations < 2) {
    throw ArgumentError("bootstrap needs at least 2 iterations to form a distribution");
  }
  if (options.samples_per_group < 1) throw ArgumentError("samples_per_group must be at least 1");
  std::vector<ProcessParams> groups;
  for (const auto& c : cells) {
    if (!(c.key.design == cells.front().key.design)) {
      throw ArgumentError("bootstrap cells must share one design");
    }
    if (c.records.size() < static_cast<std::size_t>(options.samples_per_group)) {
      throw InsufficientDataError("cell " + to_string(c.key) + " has " +
                                  std::to_string(c.records.size()) + " records, fewer than " +
                                  std::to_string(options.samples_per_group) + " per group");
    }
    if (std::find(groups.begin(), groups.end(), c.key.params) == groups.end()) {
      groups.push_back(c.key.params);
    }
  }
  if (groups.size() < 3 || groups.size() != cells.size()) {
    throw InsufficientDataError("bootstrap needs at least 3 distinct parameter groups");
  }

  const auto n = static_cast<std::size_t>(options.iterations);
  const auto draws = parallel_map(n, [&](std::size_t i) -> std::optional<Eigen::Vector3d> {
    for (int attempt = 0; attempt <= options.retry_cap; ++attempt) {
      SplitMix64 rng(derive_seed(seed, {i, static_cast<std::uint64_t>(attempt)}));
      const auto points = resample(cells, feature, options.samples_per_group, rng);
      try {
        return fit_vector(points, feature, options.fit);
      } catch (const Error&) {
      }
    }
    return std::nullopt;
  });

  BootstrapDistribution dist;
  dist.feature = feature;
  dist.seed = seed;
  for (const auto& c : cells) dist.source_cells.push_back(c.key);
  const auto ok = std::count_if(draws.begin(), draws.end(), [](const auto& d) { return d.has_value(); });
  dist.failed_iterations = static_cast<int>(n) - static_cast<int>(ok);
  if (dist.failed_iterations > options.max_failure_fraction * static_cast<double>(n) || ok < 2) {
    throw BootstrapFailureError(std::to_string(dist.failed_iterations) + " of " +
                                std::to_string(n) + " bootstrap iterations failed to fit");
  }
  dist.samples.resize(ok, 3);
  Eigen::Index row = 0;
  for (const auto& d : draws) {
    if (d) dist.samples.row(row++) = d->transpose();
  }
  return dist;
}

MonitorVerdict test_same_group_m3(const BootstrapDistribution& reference,
                                  const BootstrapDistribution& query, SignificanceLevel alpha,
                                  const SameGroupOptions& options) {
  if (reference.feature != query.feature) {
    throw ArgumentError("same-group test needs distributions of the same model");
  }
  const int n = query.iterations();
  if (n <= 3 || reference.iterations() < 2) {
    throw InsufficientDataError("same-group test needs more than 3 query iterations");
  }
  const Eigen::Vector3d d = query.mean() - reference.mean();
  const Eigen::Matrix3d s_query = sample_covariance(query.samples);
  double t2 = 0.0;
  if (options.statistic == SameGroupStatistic::Wald) {
    const Eigen::Matrix3d s_ref = sample_covariance(reference.samples);
    t2 = mahalanobis_squared(d, s_ref + s_query, options.covariance);
  } else {
    t2 = n * mahalanobis_squared(d, s_query, options.covariance);
  }
  TestOutcome outcome;
  outcome.statistic = t2;
  outcome.critical_value = hotelling_critical(alpha, 3, n);
  outcome.p_value = hotelling_p_value(t2, 3, n);
  outcome.reject_null = t2 > outcome.critical_value;
  outcome.alpha = alpha;
  outcome.dof = {3.0, static_cast<double>(n - 3)};

  MonitorVerdict v;
  v.method = "m3-same";
  if (!query.source_cells.empty()) v.cell = query.source_cells.front();
  v.outcomes.push_back({std::string(to_string(query.feature)), outcome});
  v.decision = outcome.reject_null ? Decision::Changed : Decision::Unchanged;
  v.evidence = {{"statistic_form",
                 options.statistic == SameGroupStatistic::Wald ? "wald" : "one_sample"},
                {"reference_mean", {reference.mean()(0), reference.mean()(1), reference.mean()(2)}},
                {"query_mean", {query.mean()(0), query.mean()(1), query.mean()(2)}}};
  return v;
}

std::optional<Bounds> widen_to_coverage(std::vector<double> fold, std::span<const double> held_out,
                                        double alpha, double coverage, double cap,
                                        double* factor) {
  if (fold.empty() || held_out.empty()) {
    throw InsufficientDataError("threshold widening needs nonempty distributions");
  }
  std::sort(fold.begin(), fold.end());
  const double m = sorted_quantile(fold, 0.5);
  const double below = m - sorted_quantile(fold, alpha / 2.0);
  const double above = sorted_quantile(fold, 1.0 - alpha / 2.0) - m;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> needed;
  needed.reserve(held_out.size());
  for (const double x : held_out) {
    if (x < m) {
      needed.push_back(below > 0.0 ? (m - x) / below : inf);
    } else if (x > m) {
      needed.push_back(above > 0.0 ? (x - m) / above : inf);
    } else {
      needed.push_back(0.0);
    }
  }
  std::sort(needed.begin(), needed.end());
  const auto k = static_cast<std::size_t>(
      std::ceil(std::clamp(coverage, 0.0, 1.0) * static_cast<double>(needed.size()) - 1e-12));
  double f = k == 0 ? 0.0 : needed[k - 1];
  if (!(f <= cap)) return std::nullopt;

  const auto bounds_for = [&](double g) { return Bounds{m - g * below, m + g * above}; };
  const auto covered = [&](const Bounds& b) {
    return static_cast<std::size_t>(
        std::count_if(held_out.begin(), held_out.end(), [&](double x) { return b.contains(x); }));
  };
  // Rounding in m - f * below can drop a boundary sample.
  Bounds b = bounds_for(f);
  while (covered(b) < k) {
    f = std::nextafter(f, inf) * (1.0 + 1e-15);
    b = bounds_for(f);
  }
  if (!(f <= cap)) return std::nullopt;
  if (factor) *factor = f;
  return b;
}

std::vector<ProcessParams> companion_groups(const ProcessParams& group,
                                            std::span<const ProcessParams> candidates) {
  std::vector<ProcessParams> others;
  for (const auto& p : candidates) {
    if (!(p == group)) others.push_back(p);
  }
  if (others.size() < 2) {
    throw InsufficientDataError("companion groups need at least 2 other parameter groups");
  }
  const auto by_dose = [](const ProcessParams& a, const ProcessParams& b) {
    return a.dose() < b.dose() || (a.dose() == b.dose() && a < b);
  };
  const auto [lo, hi] = std::minmax_element(others.begin(), others.end(), by_dose);
  return {*lo, *hi};
}

ThresholdInterval loo_threshold_bounds(std::span<const Cell> known_groups, Feature feature,
                                       const ThresholdOptions& options, std::uint64_t seed) {
  if (known_groups.size() < 4) {
    throw InsufficientDataError("leave-one-out thresholds need at least 4 known parameter groups");
  }
  ThresholdInterval out;
  out.feature = feature;
  for (std::size_t i = 0; i < known_groups.size(); ++i) {
    std::vector<Cell> rest;
    std::vector<ProcessParams> rest_groups;
    for (std::size_t j = 0; j < known_groups.size(); ++j) {
      if (j == i) continue;
      rest.push_back(known_groups[j]);
      rest_groups.push_back(known_groups[j].key.params);
    }
    const auto& held = known_groups[i];
    std::vector<Cell> evaluation{held};
    for (const auto& p : companion_groups(held.key.params, rest_groups)) {
      for (const auto& c : rest) {
        if (c.key.params == p) evaluation.push_back(c);
      }
    }
    const auto fold_dist = bootstrap_params(rest, feature, options.bootstrap, derive_seed(seed, {i, 0}));
    const auto held_dist =
        bootstrap_params(evaluation, feature, options.bootstrap, derive_seed(seed, {i, 1}));

    FoldInterval fold;
    fold.held_out = held.key.params;
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd fk = fold_dist.samples.col(k);
      const Eigen::VectorXd hk = held_dist.samples.col(k);
      std::vector<double> fv(fk.data(), fk.data() + fk.size());
      std::vector<double> hv(hk.data(), hk.data() + hk.size());
      double factor = std::numeric_limits<double>::infinity();
      const auto b = widen_to_coverage(fv, hv, options.alpha, options.coverage,
                                       options.widening_cap, &factor);
      fold.bounds[static_cast<std::size_t>(k)] = b;
      fold.factor[static_cast<std::size_t>(k)] = factor;
      if (b) {
        const auto inside = std::count_if(hv.begin(), hv.end(), [&](double x) { return b->contains(x); });
        fold.coverage[static_cast<std::size_t>(k)] = static_cast<double>(inside) / hv.size();
      }
    }
    out.folds.push_back(fold);
  }

  for (std::size_t k = 0; k < 3; ++k) {
    bool all = true;
    Bounds combined{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    double lo_sum = 0.0, hi_sum = 0.0;
    for (const auto& f : out.folds) {
      if (!f.bounds[k]) {
        all = false;
        break;
      }
      combined.lower = std::min(combined.lower, f.bounds[k]->lower);
      combined.upper = std::max(combined.upper, f.bounds[k]->upper);
      lo_sum += f.bounds[k]->lower;
      hi_sum += f.bounds[k]->upper;
    }
    if (!all) continue;
    if (options.combine == CombineRule::Mean) {
      const auto n = static_cast<double>(out.folds.size());
      combined = {lo_sum / n, hi_sum / n};
    }
    out.bounds[k] = combined;
  }
  return out;
}

ThresholdInterval loo_thresholds(std::span<const Cell> known_groups, Feature feature,
                                 const ThresholdOptions& options, std::uint64_t seed) {
  auto out = loo_threshold_bounds(known_groups, feature, options, seed);
  std::string missing;
  for (int k = 0; k < 3; ++k) {
    if (!out.bounds[static_cast<std::size_t>(k)]) {
      missing += " " + std::string(coefficient_name(feature, k));
    }
  }
  if (!missing.empty()) {
    throw ThresholdFailureError("widening factor exceeds the cap of " +
                                format_double(options.widening_cap) + " for:" + missing);
  }
  return out;
}

MonitorVerdict monitor_unknown_group_m3(const ThresholdInterval& radius,
                                        const ThresholdInterval& height,
                                        const BootstrapDistribution& query_radius,
                                        const BootstrapDistribution& query_height, int vote_cap) {
  if (radius.feature != Feature::Radius || height.feature != Feature::Height ||
      query_radius.feature != Feature::Radius || query_height.feature != Feature::Height) {
    throw ArgumentError("unknown-group monitoring needs radius and height inputs in that order");
  }
  std::string missing;
  for (int k = 0; k < 3; ++k) {
    if (!radius.bounds[static_cast<std::size_t>(k)]) missing += " " + std::string(kCoefficientNames[k]);
  }
  for (int k = 0; k < 3; ++k) {
    if (!height.bounds[static_cast<std::size_t>(k)]) missing += " " + std::string(kCoefficientNames[3 + k]);
  }
  if (!missing.empty()) throw IncompleteThresholdError("no threshold interval for:" + missing);
  if (query_radius.iterations() < 1 || query_height.iterations() < 1) {
    throw InsufficientDataError("query distributions are empty");
  }

  MonitorVerdict v;
  v.method = "m3-unknown";
  if (!query_radius.source_cells.empty()) v.cell = query_radius.source_cells.front();
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  int rejections = 0;
  const auto vote = [&](const ThresholdInterval& t, const BootstrapDistribution& q, int offset) {
    const Eigen::Vector3d mean = q.mean();
    for (std::size_t k = 0; k < 3; ++k) {
      const Bounds& b = *t.bounds[k];
      const bool reject = !b.contains(mean(static_cast<Eigen::Index>(k)));
      rejections += reject;
      params[std::string(kCoefficientNames[offset + k])] = {
          {"query_mean", mean(static_cast<Eigen::Index>(k))},
          {"lower", b.lower},
          {"upper", b.upper},
          {"reject", reject}};
    }
  };
  vote(radius, query_radius, 0);
  vote(height, query_height, 3);
  v.decision = rejections > vote_cap ? Decision::Changed : Decision::Unchanged;
  v.evidence = {{"rejections", rejections}, {"vote_cap", vote_cap}, {"parameters", std::move(params)}};
  return v;
}

namespace {

nlohmann::ordered_json key_json(const CellKey& k) {
  return {{"design", k.design.design_dimension},
          {"laser_power", k.params.laser_power},
          {"scan_rate", k.params.scan_rate}};
}

CellKey key_from_json(const nlohmann::json& j) {
  return {{j.at("design").get<double>()},
          {j.at("laser_power").get<double>(), j.at("scan_rate").get<double>()}};
}

Feature feature_from_string(const std::string& s) {
  if (s == "radius") return Feature::Radius;
  if (s == "height") return Feature::Height;
  throw SchemaError("unknown feature '" + s + "'");
}

nlohmann::ordered_json bounds_json(const std::optional<Bounds>& b) {
  if (!b) return nullptr;
  return {{"lower", b->lower}, {"upper", b->upper}};
}

std::optional<Bounds> bounds_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return Bounds{j.at("lower").get<double>(), j.at("upper").get<double>()};
}

}  // namespace

nlohmann::ordered_json to_json(const BootstrapDistribution& dist) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& k : dist.source_cells) cells.push_back(key_json(k));
  nlohmann::ordered_json samples = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < dist.samples.rows(); ++i) {
    samples.push_back({dist.samples(i, 0), dist.samples(i, 1), dist.samples(i, 2)});
  }
  return {{"feature", to_string(dist.feature)},
          {"seed", dist.seed},
          {"failed_iterations", dist.failed_iterations},
          {"source_cells", std::move(cells)},
          {"samples", std::move(samples)}};
}

BootstrapDistribution bootstrap_from_json(const nlohmann::json& j) {
  BootstrapDistribution d;
  try {
    d.feature = feature_from_string(j.at("feature").get<std::string>());
    d.seed = j.at("seed").get<std::uint64_t>();
    d.failed_iterations = j.at("failed_iterations").get<int>();
    for (const auto& k : j.at("source_cells")) d.source_cells.push_back(key_from_json(k));
    const auto& s = j.at("samples");
    d.samples.resize(static_cast<Eigen::Index>(s.size()), 3);
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t k = 0; k < 3; ++k) {
        d.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = s.at(i).at(k).get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed bootstrap distribution: ") + e.what());
  }
  return d;
}

nlohmann::ordered_json to_json(const ThresholdInterval& interval) {
  const int offset = interval.feature == Feature::Radius ? 0 : 3;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < 3; ++k) {
    params[std::string(kCoefficientNames[offset + k])] = bounds_json(interval.bounds[k]);
  }
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const auto& f : interval.folds) {
    nlohmann::ordered_json fp = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < 3; ++k) {
      nlohmann::ordered_json entry = bounds_json(f.bounds[k]);
      if (f.bounds[k]) {
        entry["factor"] = f.factor[k];
        entry["coverage"] = f.coverage[k];
      }
      fp[std::string(kCoefficientNames[offset + k])] = std::move(entry);
    }
    folds.push_back({{"held_out", {{"laser_power", f.held_out.laser_power},
                                   {"scan_rate", f.held_out.scan_rate}}},
                     {"parameters", std::move(fp)}});
  }
  return {{"feature", to_string(interval.feature)},
          {"parameters", std::move(params)},
          {"folds", std::move(folds)}};
}

ThresholdInterval threshold_from_json(const nlohmann::json& j) {
  ThresholdInterval t;
  try {
    t.feature = feature_from_string(j.at("feature").get<std::string>());
    const int offset = t.feature == Feature::Radius ? 0 : 3;
    for (std::size_t k = 0; k < 3; ++k) {
      t.bounds[k] = bounds_from_json(j.at("parameters").at(std::string(kCoefficientNames[offset + k])));
    }
    if (j.contains("folds")) {
      for (const auto& f : j.at("folds")) {
        FoldInterval fold;
        fold.held_out = {f.at("held_out").at("laser_power").get<double>(),
                         f.at("held_out").at("scan_rate").get<double>()};
        for (std::size_t k = 0; k < 3; ++k) {
          const auto& e = f.at("parameters").at(std::string(kCoefficientNames[offset + k]));
          fold.bounds[k] = bounds_from_json(e);
          if (!e.is_null()) {
            fold.factor[k] = e.value("factor", 0.0);
            fold.coverage[k] = e.value("coverage", 0.0);
          }
        }
        t.folds.push_back(fold);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed threshold document: ") + e.what());
  }
  return t;
}

}  // namespace tplmon
