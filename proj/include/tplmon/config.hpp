#pragma once

// Run configuration: one JSON document, overridable from the command line.
// Precedence is flags > file > defaults.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tplmon/method2.hpp"
#include "tplmon/method3.hpp"
#include "tplmon/twin.hpp"

namespace tplmon {

struct RunConfig {
  double alpha = 0.10;
  std::uint64_t seed = 20240601;

  // Synthetic twin.
  int n_per_cell = 20;
  StatusProfile profile = paper_like_profile();
  OffsetSpec offset = paper_like_offset();
  /// Status-2 offset of the coefficient-level scenario used by Method 3.
  OffsetSpec parameter_offset = parameter_shift_offset();

  // Method 2.
  bool standard_error_z = false;
  bool refine_trend = true;

  // Method 3.
  int bootstrap_iterations = 40;
  int samples_per_group = 3;
  int retry_cap = 5;
  std::string same_group_statistic = "wald";  ///< wald | one_sample
  int vote_cap = 2;
  double coverage = 0.95;
  double widening_cap = 10.0;
  std::string combine = "envelope";  ///< envelope | mean

  // Evaluation.
  int repetitions = 200;
  long calibration_trials = 10000;
  int unknown_group_repetitions = 6;
  int evaluation_samples_per_group = 10;
  std::vector<int> sample_sizes{3, 5, 8, 10, 15, 20};
  std::vector<int> design_counts{3, 4, 5, 6};
  std::vector<int> param_counts{3, 4, 5, 6};

  // Paths and dispatch.
  std::string method = "m2-t2";
  std::filesystem::path reference;
  std::filesystem::path query;
  std::filesystem::path out = ".";

  Method2Options method2_options() const;
  BootstrapOptions bootstrap_options(int samples_per_group) const;
  SameGroupOptions same_group_options() const;
  ThresholdOptions threshold_options(int samples_per_group) const;
};

/// Throws ArgumentError on out-of-range values.
void validate(const RunConfig& config);

/// Applies the keys present in `j` on top of `base`; unknown keys are
/// rejected.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
nlohmann::ordered_json to_json(const RunConfig& config);

}  // namespace tplmon
