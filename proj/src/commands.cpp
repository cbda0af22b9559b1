#include "tplmon/commands.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "tplmon/evaluation.hpp"
#include "tplmon/rng.hpp"

namespace tplmon {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::filesystem::path prepare_out(const RunConfig& config) {
  std::filesystem::create_directories(config.out);
  return config.out;
}

DatasetGrid load_input(const std::filesystem::path& path, const char* flag) {
  if (path.empty()) throw ArgumentError(std::string("missing --") + flag + " dataset");
  return load_dataset(path);
}

Scenario paper_scenario(const RunConfig& config, const OffsetSpec& offset) {
  return make_scenario(config.profile, offset, paper_designs(), paper_parameter_groups(),
                       config.n_per_cell, config.seed);
}

std::vector<Cell> design_cells(const DatasetGrid& grid, const DesignSpec& d,
                               std::span<const ProcessParams> groups) {
  std::vector<Cell> out;
  for (const auto& p : groups) {
    if (const Cell* c = grid.find(CellKey{d, p})) out.push_back(*c);
  }
  return out;
}

std::vector<ProcessParams> groups_of(const DatasetGrid& grid, const DesignSpec& d) {
  std::vector<ProcessParams> out;
  for (const auto& c : grid.design_row(d)) out.push_back(c.key.params);
  return out;
}

/// The single status label carried by every record, if any.
std::optional<std::string> grid_label(const DatasetGrid& grid) {
  std::optional<std::string> label;
  for (const auto& c : grid.cells()) {
    for (const auto& r : c.records) {
      if (!r.status_label) return std::nullopt;
      if (label && *label != *r.status_label) return std::nullopt;
      label = r.status_label;
    }
  }
  return label;
}

std::vector<MonitorVerdict> monitor_m1(const DatasetGrid& ref, const DatasetGrid& query,
                                       SignificanceLevel alpha) {
  return grid_report_m1(ref, query, alpha).verdicts;
}

std::vector<MonitorVerdict> monitor_m2(const RunConfig& config, const DatasetGrid& ref,
                                       const DatasetGrid& query, SignificanceLevel alpha,
                                       bool t2) {
  const auto options = config.method2_options();
  std::vector<MonitorVerdict> verdicts;
  for (const auto& c : query.cells()) {
    const auto prediction = predict_baseline(ref, c.key, options);
    if (t2) {
      verdicts.push_back(test_prediction_t2(prediction, c.records, alpha, options));
    } else {
      auto vr = test_prediction_z(prediction, c.records, Feature::Radius, alpha, options);
      auto vh = test_prediction_z(prediction, c.records, Feature::Height, alpha, options);
      MonitorVerdict v = vr;
      v.method = "m2-z";
      v.outcomes.insert(v.outcomes.end(), vh.outcomes.begin(), vh.outcomes.end());
      v.evidence = {{"radius", vr.evidence}, {"height", vh.evidence}};
      v.decision = vr.changed() || vh.changed() ? Decision::Changed : Decision::Unchanged;
      verdicts.push_back(std::move(v));
    }
  }
  if (verdicts.empty()) throw NoOverlapError("query dataset has no cells");
  return verdicts;
}

std::vector<MonitorVerdict> monitor_m3_same(const RunConfig& config, const DatasetGrid& ref,
                                            const DatasetGrid& query, SignificanceLevel alpha) {
  const auto bootstrap = config.bootstrap_options(config.samples_per_group);
  const auto test = config.same_group_options();
  std::vector<MonitorVerdict> verdicts;
  std::uint64_t index = 0;
  for (const auto& d : query.designs()) {
    std::vector<ProcessParams> shared;
    for (const auto& p : groups_of(query, d)) {
      if (ref.find(CellKey{d, p})) shared.push_back(p);
    }
    if (shared.size() < 3) {
      throw ArgumentError("m3-same needs at least 3 parameter groups shared by reference and "
                          "query for design D=" + format_double(d.design_dimension));
    }
    const auto rc = design_cells(ref, d, shared);
    const auto qc = design_cells(query, d, shared);
    MonitorVerdict v;
    v.method = "m3-same";
    v.evidence["design"] = d.design_dimension;
    for (const Feature f : {Feature::Radius, Feature::Height}) {
      const auto salt = static_cast<std::uint64_t>(f);
      const auto r = bootstrap_params(rc, f, bootstrap, derive_seed(config.seed, {index, salt, 0}));
      const auto q = bootstrap_params(qc, f, bootstrap, derive_seed(config.seed, {index, salt, 1}));
      const auto fv = test_same_group_m3(r, q, alpha, test);
      for (auto o : fv.outcomes) {
        o.name = std::string(to_string(f));
        v.outcomes.push_back(std::move(o));
      }
      v.evidence[std::string(to_string(f))] = fv.evidence;
      if (fv.changed()) v.decision = Decision::Changed;
    }
    verdicts.push_back(std::move(v));
    ++index;
  }
  return verdicts;
}

std::vector<MonitorVerdict> monitor_m3_unknown(const RunConfig& config, const DatasetGrid& ref,
                                               const DatasetGrid& query) {
  const auto options = config.threshold_options(config.samples_per_group);
  std::vector<MonitorVerdict> verdicts;
  std::uint64_t index = 0;
  for (const auto& d : query.designs()) {
    const auto ref_groups = groups_of(ref, d);
    for (const auto& target : groups_of(query, d)) {
      std::vector<ProcessParams> known;
      for (const auto& p : ref_groups) {
        if (!(p == target)) known.push_back(p);
      }
      if (known.size() < 4) {
        throw ArgumentError("m3-unknown needs at least 4 reference groups other than the target "
                            "for design D=" + format_double(d.design_dimension));
      }
      std::vector<ProcessParams> query_groups{target};
      for (const auto& p : companion_groups(target, known)) query_groups.push_back(p);
      const auto qc = design_cells(query, d, query_groups);
      if (qc.size() != query_groups.size()) {
        throw ArgumentError("m3-unknown needs the companion groups of the target in the query "
                            "dataset (D=" + format_double(d.design_dimension) + ", " +
                            to_string(target) + ")");
      }
      const auto kc = design_cells(ref, d, known);
      const auto tr = loo_threshold_bounds(kc, Feature::Radius, options, derive_seed(config.seed, {index, 0}));
      const auto th = loo_threshold_bounds(kc, Feature::Height, options, derive_seed(config.seed, {index, 1}));
      const auto qr = bootstrap_params(qc, Feature::Radius, options.bootstrap, derive_seed(config.seed, {index, 2}));
      const auto qh = bootstrap_params(qc, Feature::Height, options.bootstrap, derive_seed(config.seed, {index, 3}));
      auto v = monitor_unknown_group_m3(tr, th, qr, qh, config.vote_cap);
      v.cell = CellKey{d, target};
      verdicts.push_back(std::move(v));
      ++index;
    }
  }
  return verdicts;
}

std::string render_design_verdicts(std::span<const MonitorVerdict> verdicts) {
  std::string out = "design | radius | height | verdict\n";
  for (const auto& v : verdicts) {
    out += format_double(v.evidence.value("design", 0.0));
    for (const auto& o : v.outcomes) out += o.outcome.reject_null ? " | x" : " | .";
    out += " | " + std::string(to_string(v.decision)) + "\n";
  }
  return out;
}

}  // namespace

void cmd_simulate(const RunConfig& config, std::ostream& log) {
  validate(config);
  const auto dir = prepare_out(config);
  const auto s = paper_scenario(config, config.offset);
  save_dataset(dir / "status1.csv", s.reference);
  save_dataset(dir / "status2.csv", s.out_of_control);

  nlohmann::ordered_json manifest;
  manifest["seed"] = config.seed;
  manifest["n_per_cell"] = config.n_per_cell;
  nlohmann::ordered_json designs = nlohmann::ordered_json::array();
  for (const auto& d : s.designs) designs.push_back(d.design_dimension);
  manifest["designs"] = designs;
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& p : s.groups) {
    groups.push_back({{"laser_power", p.laser_power}, {"scan_rate", p.scan_rate}});
  }
  manifest["parameter_groups"] = groups;
  manifest["offset"] = to_json(config.offset);
  const auto statuses = [&](const StatusProfile& profile, const char* file, std::uint64_t stream) {
    nlohmann::ordered_json per_design = nlohmann::ordered_json::array();
    for (const auto& d : s.designs) {
      const auto c = profile.at(d);
      nlohmann::ordered_json e;
      e["design"] = d.design_dimension;
      for (std::size_t k = 0; k < 6; ++k) e[std::string(kCoefficientNames[k])] = c(k);
      per_design.push_back(std::move(e));
    }
    return nlohmann::ordered_json{{"file", file},
                                  {"stream", stream},
                                  {"profile", to_json(profile)},
                                  {"coefficients", std::move(per_design)}};
  };
  manifest["status1"] = statuses(s.status1, "status1.csv", 1);
  manifest["status2"] = statuses(s.status2, "status2.csv", 3);
  write_json(dir / "manifest.json", manifest);
  log << "wrote " << s.reference.record_count() << " + " << s.out_of_control.record_count()
      << " records to " << dir.string() << "\n";
}

void cmd_fit(const RunConfig& config, std::ostream& log) {
  validate(config);
  const auto grid = load_input(config.reference, "reference");
  const auto dir = prepare_out(config);
  FitOptions fit;
  FittedModelSet models;
  for (const auto& d : grid.designs()) {
    models.designs.push_back(fit_models(grid.design_row(d), fit));
  }
  nlohmann::ordered_json j = to_json(models);
  if (models.designs.size() >= 2) j["trend"] = to_json(fit_param_trend(models));
  write_json(dir / "fit.json", j);
  log << "fitted " << models.designs.size() << " designs; wrote " << (dir / "fit.json").string()
      << "\n";
}

void cmd_monitor(const RunConfig& config, std::ostream& log) {
  validate(config);
  const auto ref = load_input(config.reference, "reference");
  const auto query = load_input(config.query, "query");
  const auto dir = prepare_out(config);
  const SignificanceLevel alpha(config.alpha);

  std::vector<MonitorVerdict> verdicts;
  if (config.method == "m1") {
    verdicts = monitor_m1(ref, query, alpha);
  } else if (config.method == "m2-z") {
    verdicts = monitor_m2(config, ref, query, alpha, false);
  } else if (config.method == "m2-t2") {
    verdicts = monitor_m2(config, ref, query, alpha, true);
  } else if (config.method == "m3-same") {
    verdicts = monitor_m3_same(config, ref, query, alpha);
  } else {
    verdicts = monitor_m3_unknown(config, ref, query);
  }

  nlohmann::ordered_json j;
  j["method"] = config.method;
  j["alpha"] = config.alpha;
  j["verdicts"] = nlohmann::ordered_json::array();
  long changed = 0;
  for (const auto& v : verdicts) {
    j["verdicts"].push_back(to_json(v));
    changed += v.changed();
  }
  write_json(dir / "verdicts.json", j);
  const std::string text = config.method == "m3-same"
                               ? render_design_verdicts(verdicts)
                               : render_verdict_grid(verdicts, query.designs(), query.parameter_groups());
  write_text(dir / "verdicts.txt", text);
  log << text;
  log << changed << " of " << verdicts.size() << " verdicts report a change\n";

  const auto ref_label = grid_label(ref);
  const auto query_label = grid_label(query);
  if (ref_label && query_label) {
    const bool expect = *ref_label != *query_label;
    AccuracyTable table{"Monitoring accuracy (" + config.method + ")",
                        {{expect ? "Different status" : "Same status", expect}}};
    for (const auto& v : verdicts) table.rows[0].record(v.changed());
    const auto rendered = render(table);
    write_text(dir / "accuracy.txt", rendered);
    log << rendered;
  }
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  validate(config);
  const auto dir = prepare_out(config);
  const SignificanceLevel alpha(config.alpha);

  CalibrationOptions cal;
  cal.trials = config.calibration_trials;
  cal.z.standard_error_z = true;
  const std::vector<double> alphas{0.05, 0.10};
  const auto rows = null_calibration(alphas, cal, derive_seed(config.seed, {10}));
  write_json(dir / "calibration.json", to_json(rows));

  const auto s = paper_scenario(config, config.offset);
  const auto sweep = sample_size_sweep_m1(s, config.sample_sizes, alpha, config.repetitions,
                                          derive_seed(config.seed, {11}));
  write_json(dir / "sample_size_sweep.json", to_json(sweep));
  write_text(dir / "sample_size_sweep.tsv", to_tsv(sweep));

  const auto surface = data_efficiency_sweep_m2(
      s.reference, s.in_control, s.out_of_control, config.design_counts, config.param_counts,
      alpha, config.repetitions, derive_seed(config.seed, {12}), config.method2_options());
  write_json(dir / "data_efficiency_sweep.json", to_json(surface));
  write_text(dir / "data_efficiency_sweep.tsv", to_tsv(surface));

  for (const auto& r : rows) {
    log << r.test << " alpha=" << format_double(r.alpha) << " type I rate=" << r.rate() << "\n";
  }
  log << "wrote sweeps and calibration to " << dir.string() << "\n";
}

void cmd_report(const RunConfig& config, std::ostream& log) {
  validate(config);
  const auto dir = prepare_out(config);
  const SignificanceLevel alpha(config.alpha);
  const auto shift = paper_scenario(config, config.offset);
  const auto coef = paper_scenario(config, config.parameter_offset);
  const int spg = config.evaluation_samples_per_group;

  const auto m1 = evaluate_m1(shift, alpha);
  const auto m2 = evaluate_m2(shift, alpha, config.method2_options());
  const auto m3s = evaluate_m3_same(coef, alpha, config.bootstrap_options(spg),
                                    config.same_group_options(), derive_seed(config.seed, {20}));
  const auto m3u = evaluate_m3_unknown(coef, config.threshold_options(spg), config.vote_cap,
                                       config.unknown_group_repetitions,
                                       derive_seed(config.seed, {21}));

  std::string text;
  nlohmann::ordered_json j;
  j["alpha"] = config.alpha;
  j["seed"] = config.seed;
  j["tables"] = nlohmann::ordered_json::array();
  for (const AccuracyTable* t : {&m1.table, &m2.t2, &m2.z_radius, &m2.z_height, &m3s, &m3u}) {
    text += render(*t) + "\n";
    j["tables"].push_back(to_json(*t));
  }
  text += "Method 2 T^2 verdicts, out-of-control grid\n" +
          render_verdict_grid(m2.verdicts, shift.designs, shift.groups);
  write_text(dir / "report.txt", text);
  write_json(dir / "report.json", j);
  log << text;
}

}  // namespace tplmon
