#include "tplmon/method2.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "tplmon/parallel.hpp"
#include "tplmon/rng.hpp"

namespace tplmon {

namespace {

bool same_key(const CellKey& a, const CellKey& b, double tol) {
  return std::abs(a.design.design_dimension - b.design.design_dimension) <= tol &&
         std::abs(a.params.laser_power - b.params.laser_power) <= tol &&
         std::abs(a.params.scan_rate - b.params.scan_rate) <= tol;
}

constexpr double kKeyTolerance = 1e-9;

nlohmann::ordered_json prediction_evidence(const BaselinePrediction& p) {
  return {{"predicted_radius", p.mu0(0)},
          {"predicted_height", p.mu0(1)},
          {"training_cells", p.training_cells},
          {"training_designs", p.models.designs.size()}};
}

}  // namespace

BaselinePrediction predict_baseline(std::span<const Cell> training, const CellKey& key,
                                    const Method2Options& options) {
  std::vector<Cell> cells;
  for (const auto& c : training) {
    if (!c.records.empty() && !same_key(c.key, key, kKeyTolerance)) cells.push_back(c);
  }
  std::map<DesignSpec, std::vector<Cell>> by_design;
  for (const auto& c : cells) by_design[c.key.design].push_back(c);

  BaselinePrediction out;
  out.cell = key;
  out.training_cells = cells.size();
  std::string short_designs;
  for (const auto& [design, row] : by_design) {
    if (row.size() < 3) {
      short_designs += " D=" + format_double(design.design_dimension) + " (" +
                       std::to_string(row.size()) + " groups)";
      continue;
    }
    out.models.designs.push_back(fit_models(row, options.fit));
  }
  if (out.models.designs.size() < 2) {
    throw CoverageError("prediction for " + to_string(key) +
                        " needs at least 2 designs with >= 3 parameter groups; fitted " +
                        std::to_string(out.models.designs.size()) +
                        (short_designs.empty() ? "" : ", too few groups at" + short_designs));
  }
  out.trend = fit_param_trend(out.models);
  if (options.refine_trend) out.trend = refine_param_trend(out.trend, out.models, cells, options.fit);
  out.mu0 = predict_for_new_cell(out.trend, key.design, key.params);
  return out;
}

BaselinePrediction predict_baseline(const DatasetGrid& reference, const CellKey& key,
                                    const Method2Options& options) {
  return predict_baseline(reference.cells(), key, options);
}

MonitorVerdict test_prediction_z(const BaselinePrediction& prediction,
                                 std::span<const MeasurementRecord> query, Feature feature,
                                 SignificanceLevel alpha, const Method2Options& options) {
  MonitorVerdict v;
  v.method = "m2-z";
  v.cell = prediction.cell;
  const int k = feature == Feature::Radius ? 0 : 1;
  const auto outcome =
      one_sample_z(feature_values(query, feature), prediction.mu0(k), alpha, options.z);
  v.outcomes.push_back({std::string(to_string(feature)), outcome});
  v.decision = outcome.reject_null ? Decision::Changed : Decision::Unchanged;
  v.evidence = prediction_evidence(prediction);
  return v;
}

MonitorVerdict test_prediction_t2(const BaselinePrediction& prediction,
                                  std::span<const MeasurementRecord> query,
                                  SignificanceLevel alpha, const Method2Options& options) {
  if (query.size() < 3) throw InsufficientDataError("T^2 monitoring needs at least 3 query samples");
  MonitorVerdict v;
  v.method = "m2-t2";
  v.cell = prediction.cell;
  const auto outcome =
      hotelling_t2_one_sample(feature_matrix(query), prediction.mu0, alpha, options.covariance);
  v.outcomes.push_back({"joint", outcome});
  v.decision = outcome.reject_null ? Decision::Changed : Decision::Unchanged;
  v.evidence = prediction_evidence(prediction);
  return v;
}

MonitorVerdict monitor_cell_m2_z(const DatasetGrid& reference,
                                 std::span<const MeasurementRecord> query, const CellKey& key,
                                 Feature feature, SignificanceLevel alpha,
                                 const Method2Options& options) {
  return test_prediction_z(predict_baseline(reference, key, options), query, feature, alpha,
                           options);
}

MonitorVerdict monitor_cell_m2_t2(const DatasetGrid& reference,
                                  std::span<const MeasurementRecord> query, const CellKey& key,
                                  SignificanceLevel alpha, const Method2Options& options) {
  return test_prediction_t2(predict_baseline(reference, key, options), query, alpha, options);
}

std::vector<StatusMembership> classify_status_m2(const DatasetGrid& reference,
                                                 std::span<const StatusSamples> queries,
                                                 const CellKey& key, SignificanceLevel alpha,
                                                 const Method2Options& options) {
  const auto prediction = predict_baseline(reference, key, options);
  std::vector<StatusMembership> out;
  for (const auto& q : queries) {
    out.push_back({q.status, empirical_t2_membership(feature_matrix(q.records), prediction.mu0,
                                                     alpha, options.covariance)});
  }
  return out;
}

namespace {

// First k entries of a seeded shuffle of `items` with `first` forced to the
// front.
template <typename T>
std::vector<T> draw_subset(std::vector<T> items, std::size_t first, std::size_t k,
                           SplitMix64& rng) {
  std::swap(items[0], items[first]);
  for (std::size_t i = 1; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(items.size() - i);
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

}  // namespace

SweepSurface data_efficiency_sweep_m2(const DatasetGrid& reference, const DatasetGrid& in_control,
                                      const DatasetGrid& out_of_control,
                                      std::span<const int> design_counts,
                                      std::span<const int> param_counts, SignificanceLevel alpha,
                                      int repetitions, std::uint64_t seed,
                                      const Method2Options& options) {
  const auto designs = reference.designs();
  const auto groups = reference.parameter_groups();
  if (repetitions < 1) throw ArgumentError("sweep repetitions must be at least 1");
  for (const int nd : design_counts) {
    if (nd < 2 || nd > static_cast<int>(designs.size())) {
      throw ArgumentError("design count " + std::to_string(nd) + " outside [2, " +
                          std::to_string(designs.size()) + "]");
    }
  }
  for (const int np : param_counts) {
    if (np < 3 || np > static_cast<int>(groups.size())) {
      throw ArgumentError("parameter-group count " + std::to_string(np) + " outside [3, " +
                          std::to_string(groups.size()) + "]");
    }
  }
  for (const int nd : design_counts) {
    for (const int np : param_counts) {
      // With 3 groups the target design keeps only 2 and cannot be fitted.
      if (np == 3 && nd < 3) {
        throw ArgumentError("sweep point (" + std::to_string(nd) + " designs, 3 groups) leaves "
                            "fewer than 2 fittable designs");
      }
    }
  }

  struct Trial {
    int type1 = -1;  // -1 failed, 0 accept, 1 reject
    int type2 = -1;
  };
  const std::size_t nd_count = design_counts.size();
  const std::size_t np_count = param_counts.size();
  const std::size_t reps = static_cast<std::size_t>(repetitions);
  const std::size_t total = nd_count * np_count * reps;

  const auto trials = parallel_map(total, [&](std::size_t flat) {
    const std::size_t point = flat / reps;
    const std::size_t rep = flat % reps;
    const auto nd = static_cast<std::size_t>(design_counts[point / np_count]);
    const auto np = static_cast<std::size_t>(param_counts[point % np_count]);
    SplitMix64 rng(derive_seed(seed, {point, rep}));
    const std::size_t td = rng.uniform_index(designs.size());
    const std::size_t tp = rng.uniform_index(groups.size());
    const auto dsub = draw_subset(designs, td, nd, rng);
    const auto psub = draw_subset(groups, tp, np, rng);
    const CellKey target{designs[td], groups[tp]};

    std::vector<Cell> training;
    for (const auto& d : dsub) {
      for (const auto& p : psub) {
        if (d == target.design && p == target.params) continue;
        if (const Cell* c = reference.find({d, p})) training.push_back(*c);
      }
    }
    Trial t;
    try {
      const auto prediction = predict_baseline(training, target, options);
      const auto q1 = cell(in_control, target.design, target.params);
      const auto q2 = cell(out_of_control, target.design, target.params);
      if (!q1.empty()) t.type1 = test_prediction_t2(prediction, q1, alpha, options).changed();
      if (!q2.empty()) t.type2 = !test_prediction_t2(prediction, q2, alpha, options).changed();
    } catch (const Error&) {
    }
    return t;
  });

  SweepSurface s;
  s.design_counts.assign(design_counts.begin(), design_counts.end());
  s.param_counts.assign(param_counts.begin(), param_counts.end());
  s.repetitions = repetitions;
  const auto rows = static_cast<Eigen::Index>(nd_count);
  const auto cols = static_cast<Eigen::Index>(np_count);
  s.type1 = s.type2 = s.type1_se = s.type2_se = Eigen::MatrixXd::Zero(rows, cols);
  s.failures = Eigen::MatrixXi::Zero(rows, cols);
  for (std::size_t point = 0; point < nd_count * np_count; ++point) {
    const auto i = static_cast<Eigen::Index>(point / np_count);
    const auto j = static_cast<Eigen::Index>(point % np_count);
    long n1 = 0, e1 = 0, n2 = 0, e2 = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const Trial& t = trials[point * reps + rep];
      if (t.type1 < 0 || t.type2 < 0) ++s.failures(i, j);
      if (t.type1 >= 0) {
        ++n1;
        e1 += t.type1;
      }
      if (t.type2 >= 0) {
        ++n2;
        e2 += t.type2;
      }
    }
    const auto rate = [](long e, long n) { return n ? static_cast<double>(e) / n : 0.0; };
    const auto se = [](double p, long n) { return n ? std::sqrt(p * (1.0 - p) / n) : 0.0; };
    s.type1(i, j) = rate(e1, n1);
    s.type2(i, j) = rate(e2, n2);
    s.type1_se(i, j) = se(s.type1(i, j), n1);
    s.type2_se(i, j) = se(s.type2(i, j), n2);
  }
  return s;
}

nlohmann::ordered_json to_json(const SweepSurface& s) {
  const auto matrix = [](const auto& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  return {{"design_counts", s.design_counts}, {"param_counts", s.param_counts},
          {"repetitions", s.repetitions},     {"type1", matrix(s.type1)},
          {"type1_se", matrix(s.type1_se)},   {"type2", matrix(s.type2)},
          {"type2_se", matrix(s.type2_se)},   {"failures", matrix(s.failures)}};
}

std::string to_tsv(const SweepSurface& s) {
  std::ostringstream out;
  out << "n_designs\tn_params\ttype1\ttype1_se\ttype2\ttype2_se\tfailures\n";
  for (std::size_t i = 0; i < s.design_counts.size(); ++i) {
    for (std::size_t j = 0; j < s.param_counts.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(j);
      out << s.design_counts[i] << '\t' << s.param_counts[j] << '\t'
          << format_double(s.type1(r, c)) << '\t' << format_double(s.type1_se(r, c)) << '\t'
          << format_double(s.type2(r, c)) << '\t' << format_double(s.type2_se(r, c)) << '\t'
          << s.failures(r, c) << '\n';
    }
  }
  return out.str();
}

}  // namespace tplmon
