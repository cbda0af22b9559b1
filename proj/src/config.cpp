#include "tplmon/config.hpp"

#include <fstream>
#include <set>

#include "tplmon/errors.hpp"

namespace tplmon {

namespace {

SameGroupStatistic parse_statistic(const std::string& name) {
  if (name == "wald") return SameGroupStatistic::Wald;
  if (name == "one_sample") return SameGroupStatistic::OneSample;
  throw ArgumentError("same_group_statistic must be 'wald' or 'one_sample', got '" + name + "'");
}

CombineRule parse_combine(const std::string& name) {
  if (name == "envelope") return CombineRule::Envelope;
  if (name == "mean") return CombineRule::Mean;
  throw ArgumentError("combine must be 'envelope' or 'mean', got '" + name + "'");
}

void require_positive(long value, const char* name) {
  if (value < 1) throw ArgumentError(std::string(name) + " must be >= 1");
}

void require_unit(double value, const char* name) {
  if (!(value > 0.0 && value < 1.0)) {
    throw ArgumentError(std::string(name) + " must lie in (0, 1)");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& target) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    target = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("config key '") + key + "': " + e.what());
  }
}

const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = {
      "alpha", "seed", "n_per_cell", "profile", "offset", "parameter_offset",
      "standard_error_z", "refine_trend", "bootstrap_iterations", "samples_per_group",
      "retry_cap", "same_group_statistic", "vote_cap", "coverage", "widening_cap", "combine",
      "repetitions", "calibration_trials", "unknown_group_repetitions",
      "evaluation_samples_per_group", "sample_sizes", "design_counts", "param_counts", "method",
      "reference", "query", "out"};
  return keys;
}

}  // namespace

Method2Options RunConfig::method2_options() const {
  Method2Options o;
  o.refine_trend = refine_trend;
  o.z.standard_error_z = standard_error_z;
  return o;
}

BootstrapOptions RunConfig::bootstrap_options(int spg) const {
  BootstrapOptions o;
  o.iterations = bootstrap_iterations;
  o.samples_per_group = spg;
  o.retry_cap = retry_cap;
  return o;
}

SameGroupOptions RunConfig::same_group_options() const {
  SameGroupOptions o;
  o.statistic = parse_statistic(same_group_statistic);
  return o;
}

ThresholdOptions RunConfig::threshold_options(int spg) const {
  ThresholdOptions o;
  o.bootstrap = bootstrap_options(spg);
  o.coverage = coverage;
  o.alpha = alpha;
  o.widening_cap = widening_cap;
  o.combine = parse_combine(combine);
  return o;
}

void validate(const RunConfig& c) {
  require_unit(c.alpha, "alpha");
  require_unit(c.coverage, "coverage");
  require_positive(c.n_per_cell, "n_per_cell");
  require_positive(c.bootstrap_iterations, "bootstrap_iterations");
  require_positive(c.samples_per_group, "samples_per_group");
  require_positive(c.retry_cap, "retry_cap");
  require_positive(c.vote_cap, "vote_cap");
  require_positive(c.repetitions, "repetitions");
  require_positive(c.calibration_trials, "calibration_trials");
  require_positive(c.unknown_group_repetitions, "unknown_group_repetitions");
  require_positive(c.evaluation_samples_per_group, "evaluation_samples_per_group");
  if (!(c.widening_cap >= 0.0)) throw ArgumentError("widening_cap must be >= 0");
  for (int n : c.sample_sizes) require_positive(n, "sample_sizes");
  for (int n : c.design_counts) require_positive(n, "design_counts");
  for (int n : c.param_counts) require_positive(n, "param_counts");
  parse_statistic(c.same_group_statistic);
  parse_combine(c.combine);
  static const std::set<std::string> methods = {"m1", "m2-z", "m2-t2", "m3-same", "m3-unknown"};
  if (!methods.contains(c.method)) {
    throw ArgumentError("method must be one of m1, m2-z, m2-t2, m3-same, m3-unknown; got '" +
                        c.method + "'");
  }
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!config_keys().contains(key)) throw ArgumentError("unknown config key '" + key + "'");
  }
  read(j, "alpha", c.alpha);
  read(j, "seed", c.seed);
  read(j, "n_per_cell", c.n_per_cell);
  if (j.contains("profile")) c.profile = profile_from_json(j["profile"]);
  if (j.contains("offset")) c.offset = offset_from_json(j["offset"]);
  if (j.contains("parameter_offset")) c.parameter_offset = offset_from_json(j["parameter_offset"]);
  read(j, "standard_error_z", c.standard_error_z);
  read(j, "refine_trend", c.refine_trend);
  read(j, "bootstrap_iterations", c.bootstrap_iterations);
  read(j, "samples_per_group", c.samples_per_group);
  read(j, "retry_cap", c.retry_cap);
  read(j, "same_group_statistic", c.same_group_statistic);
  read(j, "vote_cap", c.vote_cap);
  read(j, "coverage", c.coverage);
  read(j, "widening_cap", c.widening_cap);
  read(j, "combine", c.combine);
  read(j, "repetitions", c.repetitions);
  read(j, "calibration_trials", c.calibration_trials);
  read(j, "unknown_group_repetitions", c.unknown_group_repetitions);
  read(j, "evaluation_samples_per_group", c.evaluation_samples_per_group);
  read(j, "sample_sizes", c.sample_sizes);
  read(j, "design_counts", c.design_counts);
  read(j, "param_counts", c.param_counts);
  read(j, "method", c.method);
  if (j.contains("reference")) c.reference = j["reference"].get<std::string>();
  if (j.contains("query")) c.query = j["query"].get<std::string>();
  if (j.contains("out")) c.out = j["out"].get<std::string>();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ArgumentError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::move(base));
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["n_per_cell"] = c.n_per_cell;
  j["profile"] = to_json(c.profile);
  j["offset"] = to_json(c.offset);
  j["parameter_offset"] = to_json(c.parameter_offset);
  j["standard_error_z"] = c.standard_error_z;
  j["refine_trend"] = c.refine_trend;
  j["bootstrap_iterations"] = c.bootstrap_iterations;
  j["samples_per_group"] = c.samples_per_group;
  j["retry_cap"] = c.retry_cap;
  j["same_group_statistic"] = c.same_group_statistic;
  j["vote_cap"] = c.vote_cap;
  j["coverage"] = c.coverage;
  j["widening_cap"] = c.widening_cap;
  j["combine"] = c.combine;
  j["repetitions"] = c.repetitions;
  j["calibration_trials"] = c.calibration_trials;
  j["unknown_group_repetitions"] = c.unknown_group_repetitions;
  j["evaluation_samples_per_group"] = c.evaluation_samples_per_group;
  j["sample_sizes"] = c.sample_sizes;
  j["design_counts"] = c.design_counts;
  j["param_counts"] = c.param_counts;
  j["method"] = c.method;
  j["reference"] = c.reference.string();
  j["query"] = c.query.string();
  j["out"] = c.out.string();
  return j;
}

}  // namespace tplmon
