#pragma once

// Types shared by the three monitoring methods: verdicts, per-cell verdict
// grids and accuracy tables.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tplmon/dataset.hpp"
#include "tplmon/dimension_model.hpp"
#include "tplmon/hypothesis.hpp"

namespace tplmon {

enum class Decision { Unchanged, Changed };
std::string_view to_string(Decision d);

/// Which feature(s) a univariate method looks at.
enum class FeatureSelection { Radius, Height, Both };

struct NamedOutcome {
  std::string name;  ///< "radius", "height", "joint", "a_R", ...
  TestOutcome outcome;
};

struct MonitorVerdict {
  Decision decision = Decision::Unchanged;
  std::string method;
  std::optional<CellKey> cell;
  std::vector<NamedOutcome> outcomes;
  /// Method-specific supporting values (predicted means, vote counts, ...).
  nlohmann::ordered_json evidence = nlohmann::ordered_json::object();

  bool changed() const noexcept { return decision == Decision::Changed; }
  const TestOutcome* outcome(std::string_view name) const;
};

nlohmann::ordered_json to_json(const TestOutcome& outcome);
nlohmann::ordered_json to_json(const MonitorVerdict& verdict);

/// Values of one feature, in record order.
Eigen::VectorXd feature_values(std::span<const MeasurementRecord> records, Feature feature);
/// n x 2 matrix of (R, H) rows.
Eigen::Matrix<double, Eigen::Dynamic, 2> feature_matrix(std::span<const MeasurementRecord> records);

struct AccuracyRow {
  std::string scenario;
  /// True when the scenario is out-of-control, i.e. rejections are correct.
  bool expect_change = false;
  long rejections = 0;
  long acceptances = 0;
  long failures = 0;  ///< trials that could not be decided (not in accuracy)

  long trials() const noexcept { return rejections + acceptances; }
  double accuracy() const noexcept;  ///< percent
  void record(bool changed) noexcept { ++(changed ? rejections : acceptances); }
};

struct AccuracyTable {
  std::string title;
  std::vector<AccuracyRow> rows;
};

nlohmann::ordered_json to_json(const AccuracyTable& table);
/// Fixed-width text table in the layout "# Rejections | # Acceptances | Accuracy (%)".
std::string render(const AccuracyTable& table);

/// Fig. 8 style grid: rows are designs, columns parameter groups, each entry
/// one character per test ('x' rejects, '.' accepts, '-' no verdict).
std::string render_verdict_grid(std::span<const MonitorVerdict> verdicts,
                                std::span<const DesignSpec> designs,
                                std::span<const ProcessParams> groups);

}  // namespace tplmon
