#include "tplmon/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tplmon/parallel.hpp"
#include "tplmon/rng.hpp"

namespace tplmon {

Scenario make_scenario(const StatusProfile& base, const OffsetSpec& offset,
                       std::vector<DesignSpec> designs, std::vector<ProcessParams> groups,
                       int n_per_cell, std::uint64_t seed) {
  Scenario s;
  std::tie(s.status1, s.status2) = make_status_pair(base, offset, designs, groups);
  s.reference = generate_grid(s.status1, designs, groups, n_per_cell, derive_seed(seed, {1}), "S1");
  s.in_control = generate_grid(s.status1, designs, groups, n_per_cell, derive_seed(seed, {2}), "S1");
  s.out_of_control =
      generate_grid(s.status2, designs, groups, n_per_cell, derive_seed(seed, {3}), "S2");
  s.designs = std::move(designs);
  s.groups = std::move(groups);
  return s;
}

M1Evaluation evaluate_m1(const Scenario& s, SignificanceLevel alpha) {
  M1Evaluation e{grid_report_m1(s.reference, s.in_control, alpha),
                 grid_report_m1(s.reference, s.out_of_control, alpha),
                 {}};
  e.table.title = "Method 1: two-sample t-test per cell";
  const auto row = [](std::string name, bool expect, long rej, long cells) {
    return AccuracyRow{std::move(name), expect, rej, cells - rej};
  };
  e.table.rows = {
      row("Radius / in-control", false, e.in_control.radius_rejections, e.in_control.cells()),
      row("Radius / out-of-control", true, e.out_of_control.radius_rejections,
          e.out_of_control.cells()),
      row("Height / in-control", false, e.in_control.height_rejections, e.in_control.cells()),
      row("Height / out-of-control", true, e.out_of_control.height_rejections,
          e.out_of_control.cells()),
  };
  return e;
}

M2Evaluation evaluate_m2(const Scenario& s, SignificanceLevel alpha, const Method2Options& options) {
  const auto cells = s.reference.cells();
  struct CellResult {
    bool ok = false;
    bool t2_in = false, t2_out = false;
    bool zr_in = false, zr_out = false, zh_in = false, zh_out = false;
    MonitorVerdict verdict;
  };
  const auto results = parallel_map(cells.size(), [&](std::size_t i) {
    CellResult r;
    const auto& key = cells[i].key;
    try {
      const auto prediction = predict_baseline(s.reference, key, options);
      const auto q1 = cell(s.in_control, key.design, key.params);
      const auto q2 = cell(s.out_of_control, key.design, key.params);
      r.t2_in = test_prediction_t2(prediction, q1, alpha, options).changed();
      r.verdict = test_prediction_t2(prediction, q2, alpha, options);
      r.t2_out = r.verdict.changed();
      r.zr_in = test_prediction_z(prediction, q1, Feature::Radius, alpha, options).changed();
      r.zr_out = test_prediction_z(prediction, q2, Feature::Radius, alpha, options).changed();
      r.zh_in = test_prediction_z(prediction, q1, Feature::Height, alpha, options).changed();
      r.zh_out = test_prediction_z(prediction, q2, Feature::Height, alpha, options).changed();
      r.ok = true;
    } catch (const Error&) {
    }
    return r;
  });

  M2Evaluation e;
  e.t2 = {"Method 2: Hotelling T^2 against predicted mean", {{"Same status", false}, {"Different status", true}}};
  e.z_radius = {"Method 2: Z-test on radius", {{"Same status", false}, {"Different status", true}}};
  e.z_height = {"Method 2: Z-test on height", {{"Same status", false}, {"Different status", true}}};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (!r.ok) {
      for (auto* t : {&e.t2, &e.z_radius, &e.z_height}) {
        ++t->rows[0].failures;
        ++t->rows[1].failures;
      }
      continue;
    }
    e.t2.rows[0].record(r.t2_in);
    e.t2.rows[1].record(r.t2_out);
    e.z_radius.rows[0].record(r.zr_in);
    e.z_radius.rows[1].record(r.zr_out);
    e.z_height.rows[0].record(r.zh_in);
    e.z_height.rows[1].record(r.zh_out);
    if (r.t2_out && !r.zr_out) e.t2_only_radius.push_back(cells[i].key);
    if (r.t2_out && !r.zh_out) e.t2_only_height.push_back(cells[i].key);
    e.verdicts.push_back(r.verdict);
  }
  return e;
}

std::vector<Cell> subsample_cells(std::span<const Cell> cells, int n, std::uint64_t seed) {
  std::vector<Cell> out;
  out.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& src = cells[c];
    if (static_cast<std::size_t>(n) > src.records.size()) {
      throw InsufficientDataError("cell " + to_string(src.key) + " has fewer than " +
                                  std::to_string(n) + " records");
    }
    SplitMix64 rng(derive_seed(seed, {c}));
    std::vector<std::size_t> idx(src.records.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Cell sub{src.key, {}};
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
      std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
      sub.records.push_back(src.records[idx[i]]);
    }
    out.push_back(std::move(sub));
  }
  return out;
}

namespace {

std::vector<std::array<std::size_t, 3>> triples(std::size_t n) {
  std::vector<std::array<std::size_t, 3>> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) out.push_back({i, j, k});
  return out;
}

std::vector<Cell> pick_cells(const DatasetGrid& grid, const DesignSpec& d,
                             std::span<const ProcessParams> groups) {
  std::vector<Cell> out;
  for (const auto& p : groups) {
    const Cell* c = grid.find({d, p});
    if (c == nullptr) throw CoverageError("missing cell " + to_string(CellKey{d, p}));
    out.push_back(*c);
  }
  return out;
}

}  // namespace

AccuracyTable evaluate_m3_same(const Scenario& s, SignificanceLevel alpha,
                               const BootstrapOptions& bootstrap, const SameGroupOptions& test,
                               std::uint64_t seed) {
  const auto combos = triples(s.groups.size());
  const std::size_t trials = s.designs.size() * combos.size();
  struct Outcome {
    int r_in = -1, r_out = -1, h_in = -1, h_out = -1;
  };
  const auto results = parallel_map(trials, [&](std::size_t t) {
    const auto& d = s.designs[t / combos.size()];
    const auto& combo = combos[t % combos.size()];
    const std::vector<ProcessParams> groups{s.groups[combo[0]], s.groups[combo[1]], s.groups[combo[2]]};
    const int spg = bootstrap.samples_per_group;
    const auto ref = subsample_cells(pick_cells(s.reference, d, groups), spg, derive_seed(seed, {t, 0}));
    const auto q1 = subsample_cells(pick_cells(s.in_control, d, groups), spg, derive_seed(seed, {t, 1}));
    const auto q2 = subsample_cells(pick_cells(s.out_of_control, d, groups), spg, derive_seed(seed, {t, 2}));
    Outcome o;
    const auto run = [&](Feature f, int& in, int& out, std::uint64_t salt) {
      try {
        const auto r = bootstrap_params(ref, f, bootstrap, derive_seed(seed, {t, salt, 0}));
        const auto a = bootstrap_params(q1, f, bootstrap, derive_seed(seed, {t, salt, 1}));
        const auto b = bootstrap_params(q2, f, bootstrap, derive_seed(seed, {t, salt, 2}));
        in = test_same_group_m3(r, a, alpha, test).changed();
        out = test_same_group_m3(r, b, alpha, test).changed();
      } catch (const Error&) {
      }
    };
    run(Feature::Radius, o.r_in, o.r_out, 10);
    run(Feature::Height, o.h_in, o.h_out, 11);
    return o;
  });

  AccuracyTable table{"Method 3: bootstrap T^2, same parameter groups",
                      {{"Radius / in-control", false},
                       {"Radius / out-of-control", true},
                       {"Height / in-control", false},
                       {"Height / out-of-control", true}}};
  const auto add = [](AccuracyRow& row, int v) {
    if (v < 0) {
      ++row.failures;
    } else {
      row.record(v == 1);
    }
  };
  for (const auto& o : results) {
    add(table.rows[0], o.r_in);
    add(table.rows[1], o.r_out);
    add(table.rows[2], o.h_in);
    add(table.rows[3], o.h_out);
  }
  return table;
}

AccuracyTable evaluate_m3_unknown(const Scenario& s, const ThresholdOptions& thresholds,
                                  int vote_cap, int repetitions, std::uint64_t seed) {
  if (repetitions < 1) throw ArgumentError("repetitions must be at least 1");
  const std::size_t reps = static_cast<std::size_t>(repetitions);
  const std::size_t trials = s.designs.size() * s.groups.size() * reps;
  const int spg = thresholds.bootstrap.samples_per_group;
  struct Outcome {
    int in = -1, out = -1;
  };
  // Folds run sequentially inside a trial; trials run in parallel.
  ThresholdOptions inner = thresholds;
  const auto results = parallel_map(trials, [&](std::size_t t) {
    const auto& d = s.designs[t / (s.groups.size() * reps)];
    const auto& target = s.groups[(t / reps) % s.groups.size()];
    std::vector<ProcessParams> known;
    for (const auto& p : s.groups) {
      if (!(p == target)) known.push_back(p);
    }
    std::vector<ProcessParams> query_groups{target};
    for (const auto& p : companion_groups(target, known)) query_groups.push_back(p);

    Outcome o;
    try {
      const auto ref = subsample_cells(pick_cells(s.reference, d, known), spg, derive_seed(seed, {t, 0}));
      const auto tr = loo_threshold_bounds(ref, Feature::Radius, inner, derive_seed(seed, {t, 1}));
      const auto th = loo_threshold_bounds(ref, Feature::Height, inner, derive_seed(seed, {t, 2}));
      const auto run = [&](const DatasetGrid& grid, std::uint64_t salt) {
        const auto q = subsample_cells(pick_cells(grid, d, query_groups), spg, derive_seed(seed, {t, salt}));
        const auto qr = bootstrap_params(q, Feature::Radius, inner.bootstrap, derive_seed(seed, {t, salt, 1}));
        const auto qh = bootstrap_params(q, Feature::Height, inner.bootstrap, derive_seed(seed, {t, salt, 2}));
        return static_cast<int>(monitor_unknown_group_m3(tr, th, qr, qh, vote_cap).changed());
      };
      try {
        o.in = run(s.in_control, 3);
      } catch (const Error&) {
      }
      try {
        o.out = run(s.out_of_control, 4);
      } catch (const Error&) {
      }
    } catch (const Error&) {
    }
    return o;
  }, 0);

  AccuracyTable table{"Method 3: leave-one-out thresholds with majority vote",
                      {{"Same status", false}, {"Different status", true}}};
  for (const auto& o : results) {
    if (o.in < 0) ++table.rows[0].failures; else table.rows[0].record(o.in == 1);
    if (o.out < 0) ++table.rows[1].failures; else table.rows[1].record(o.out == 1);
  }
  return table;
}

SampleSizeSweep sample_size_sweep_m1(const Scenario& s, std::span<const int> sizes,
                                     SignificanceLevel alpha, int repetitions, std::uint64_t seed) {
  if (repetitions < 1) throw ArgumentError("repetitions must be at least 1");
  for (const int n : sizes) {
    if (n < 2) throw ArgumentError("sample sizes must be at least 2");
  }
  const auto reps = static_cast<std::size_t>(repetitions);
  struct Counts {
    long cells = 0, r1 = 0, r2 = 0, h1 = 0, h2 = 0;
  };
  const auto counts = parallel_map(sizes.size() * reps, [&](std::size_t flat) {
    const std::size_t si = flat / reps;
    const std::size_t rep = flat % reps;
    const int n = sizes[si];
    const auto ref = subsample_cells(s.reference.cells(), n, derive_seed(seed, {si, rep, 0}));
    const auto inc = subsample_cells(s.in_control.cells(), n, derive_seed(seed, {si, rep, 1}));
    const auto out = subsample_cells(s.out_of_control.cells(), n, derive_seed(seed, {si, rep, 2}));
    Counts c;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const auto v1 = monitor_cell_m1(ref[i].records, inc[i].records, FeatureSelection::Both, alpha);
      const auto v2 = monitor_cell_m1(ref[i].records, out[i].records, FeatureSelection::Both, alpha);
      ++c.cells;
      c.r1 += v1.outcome("radius")->reject_null;
      c.h1 += v1.outcome("height")->reject_null;
      c.r2 += !v2.outcome("radius")->reject_null;
      c.h2 += !v2.outcome("height")->reject_null;
    }
    return c;
  });

  SampleSizeSweep sweep;
  sweep.sizes.assign(sizes.begin(), sizes.end());
  sweep.repetitions = repetitions;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    Counts total;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const auto& c = counts[si * reps + rep];
      total.cells += c.cells;
      total.r1 += c.r1;
      total.r2 += c.r2;
      total.h1 += c.h1;
      total.h2 += c.h2;
    }
    const double n = static_cast<double>(total.cells);
    const auto push = [&](std::vector<double>& rate, std::vector<double>& se, long k) {
      const double p = static_cast<double>(k) / n;
      rate.push_back(p);
      se.push_back(std::sqrt(p * (1.0 - p) / n));
    };
    push(sweep.type1_radius, sweep.type1_radius_se, total.r1);
    push(sweep.type2_radius, sweep.type2_radius_se, total.r2);
    push(sweep.type1_height, sweep.type1_height_se, total.h1);
    push(sweep.type2_height, sweep.type2_height_se, total.h2);
  }
  return sweep;
}

nlohmann::ordered_json to_json(const SampleSizeSweep& s) {
  return {{"sizes", s.sizes},
          {"repetitions", s.repetitions},
          {"type1_radius", s.type1_radius},
          {"type1_radius_se", s.type1_radius_se},
          {"type2_radius", s.type2_radius},
          {"type2_radius_se", s.type2_radius_se},
          {"type1_height", s.type1_height},
          {"type1_height_se", s.type1_height_se},
          {"type2_height", s.type2_height},
          {"type2_height_se", s.type2_height_se}};
}

std::string to_tsv(const SampleSizeSweep& s) {
  std::ostringstream out;
  out << "n\ttype1_radius\ttype1_radius_se\ttype2_radius\ttype2_radius_se\ttype1_height\t"
         "type1_height_se\ttype2_height\ttype2_height_se\n";
  for (std::size_t i = 0; i < s.sizes.size(); ++i) {
    out << s.sizes[i];
    for (const auto* v : {&s.type1_radius, &s.type1_radius_se, &s.type2_radius,
                          &s.type2_radius_se, &s.type1_height, &s.type1_height_se,
                          &s.type2_height, &s.type2_height_se}) {
      out << '\t' << format_double((*v)[i]);
    }
    out << '\n';
  }
  return out.str();
}

std::vector<CalibrationRow> null_calibration(std::span<const double> alphas,
                                             const CalibrationOptions& options,
                                             std::uint64_t seed) {
  const auto trials = static_cast<std::size_t>(options.trials);
  const double rho = options.t2_correlation;
  const double rho_c = std::sqrt(1.0 - rho * rho);
  // Statistics are computed once per trial and compared with every alpha.
  struct Stats {
    double t = 0.0, z = 0.0, t2 = 0.0;
  };
  const auto stats = parallel_map(trials, [&](std::size_t i) {
    SplitMix64 rng(derive_seed(seed, {i}));
    Eigen::VectorXd g1(options.t_group_size), g2(options.t_group_size);
    for (auto& v : g1) v = rng.normal();
    for (auto& v : g2) v = rng.normal();
    Eigen::VectorXd z(options.z_sample_size);
    for (auto& v : z) v = rng.normal();
    Eigen::MatrixX2d x(options.t2_sample_size, 2);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double a = rng.normal();
      const double b = rng.normal();
      x(r, 0) = a;
      x(r, 1) = rho * a + rho_c * b;
    }
    const SignificanceLevel any(0.1);
    return Stats{two_sample_t(g1, g2, any).statistic, one_sample_z(z, 0.0, any, options.z).statistic,
                 hotelling_t2_one_sample(x, Eigen::Vector2d::Zero(), any).statistic};
  });

  std::vector<CalibrationRow> rows;
  for (const double a : alphas) {
    const SignificanceLevel alpha(a);
    const double t_crit = t_quantile(1.0 - a / 2.0, 2.0 * options.t_group_size - 2.0);
    const double z_crit = normal_quantile(1.0 - a / 2.0);
    const double t2_crit = hotelling_critical(alpha, 2, options.t2_sample_size);
    CalibrationRow t{"two_sample_t", a, options.trials, 0};
    CalibrationRow z{options.z.standard_error_z ? "one_sample_z (standard error)" : "one_sample_z",
                     a, options.trials, 0};
    CalibrationRow h{"hotelling_t2", a, options.trials, 0};
    for (const auto& s : stats) {
      t.rejections += std::abs(s.t) > t_crit;
      z.rejections += std::abs(s.z) > z_crit;
      h.rejections += s.t2 > t2_crit;
    }
    rows.insert(rows.end(), {t, z, h});
  }
  return rows;
}

nlohmann::ordered_json to_json(std::span<const CalibrationRow> rows) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    out.push_back({{"test", r.test},
                   {"alpha", r.alpha},
                   {"trials", r.trials},
                   {"rejections", r.rejections},
                   {"rate", r.rate()}});
  }
  return out;
}

}  // namespace tplmon
