#include "tplmon/monitor.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace tplmon {

std::string_view to_string(Decision d) { return d == Decision::Changed ? "changed" : "unchanged"; }

const TestOutcome* MonitorVerdict::outcome(std::string_view name) const {
  for (const auto& o : outcomes) {
    if (o.name == name) return &o.outcome;
  }
  return nullptr;
}

nlohmann::ordered_json to_json(const TestOutcome& outcome) {
  nlohmann::ordered_json j;
  j["statistic"] = outcome.statistic;
  j["critical_value"] = outcome.critical_value;
  j["p_value"] = outcome.p_value ? nlohmann::ordered_json(*outcome.p_value) : nullptr;
  j["reject_null"] = outcome.reject_null;
  j["alpha"] = outcome.alpha.value();
  j["dof"] = {outcome.dof.first, outcome.dof.second};
  return j;
}

nlohmann::ordered_json to_json(const MonitorVerdict& verdict) {
  nlohmann::ordered_json j;
  j["method"] = verdict.method;
  if (verdict.cell) {
    j["design"] = verdict.cell->design.design_dimension;
    j["laser_power"] = verdict.cell->params.laser_power;
    j["scan_rate"] = verdict.cell->params.scan_rate;
  }
  j["decision"] = to_string(verdict.decision);
  nlohmann::ordered_json tests = nlohmann::ordered_json::object();
  for (const auto& o : verdict.outcomes) tests[o.name] = to_json(o.outcome);
  j["tests"] = std::move(tests);
  if (!verdict.evidence.empty()) j["evidence"] = verdict.evidence;
  return j;
}

Eigen::VectorXd feature_values(std::span<const MeasurementRecord> records, Feature feature) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) =
        feature == Feature::Radius ? records[i].radius : records[i].height;
  }
  return v;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> feature_matrix(std::span<const MeasurementRecord> records) {
  Eigen::Matrix<double, Eigen::Dynamic, 2> x(static_cast<Eigen::Index>(records.size()), 2);
  for (std::size_t i = 0; i < records.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = records[i].radius;
    x(static_cast<Eigen::Index>(i), 1) = records[i].height;
  }
  return x;
}

double AccuracyRow::accuracy() const noexcept {
  const long n = trials();
  if (n == 0) return 0.0;
  return 100.0 * static_cast<double>(expect_change ? rejections : acceptances) /
         static_cast<double>(n);
}

nlohmann::ordered_json to_json(const AccuracyTable& table) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"scenario", r.scenario},
                    {"expect_change", r.expect_change},
                    {"rejections", r.rejections},
                    {"acceptances", r.acceptances},
                    {"failures", r.failures},
                    {"accuracy_percent", r.accuracy()}});
  }
  return {{"title", table.title}, {"rows", std::move(rows)}};
}

std::string render(const AccuracyTable& table) {
  std::ostringstream out;
  if (!table.title.empty()) out << table.title << '\n';
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %12s %13s %12s\n", "Scenario", "# Rejections",
                "# Acceptances", "Accuracy (%)");
  out << line;
  for (const auto& r : table.rows) {
    std::snprintf(line, sizeof line, "%-28s %12ld %13ld %12.2f", r.scenario.c_str(), r.rejections,
                  r.acceptances, r.accuracy());
    out << line;
    if (r.failures > 0) out << "  (" << r.failures << " undecided)";
    out << '\n';
  }
  return out.str();
}

std::string render_verdict_grid(std::span<const MonitorVerdict> verdicts,
                                std::span<const DesignSpec> designs,
                                std::span<const ProcessParams> groups) {
  // Legend characters per test: x rejects, . accepts.
  const auto cell_text = [&](const DesignSpec& d, const ProcessParams& p) {
    std::string text;
    for (const auto& v : verdicts) {
      if (!v.cell || !(v.cell->design == d) || !(v.cell->params == p)) continue;
      for (const auto& o : v.outcomes) text += o.outcome.reject_null ? 'x' : '.';
      if (v.outcomes.empty()) text += v.changed() ? 'x' : '.';
    }
    return text.empty() ? std::string("-") : text;
  };
  std::ostringstream out;
  out << "D \\ (LP,SR)";
  for (const auto& p : groups) {
    out << " | " << format_double(p.laser_power) << "," << format_double(p.scan_rate);
  }
  out << '\n';
  for (const auto& d : designs) {
    std::string label = format_double(d.design_dimension);
    label.resize(std::max<std::size_t>(label.size(), 11), ' ');
    out << label;
    for (const auto& p : groups) {
      std::string t = cell_text(d, p);
      const std::size_t width =
          format_double(p.laser_power).size() + format_double(p.scan_rate).size() + 1;
      t.resize(std::max(width, t.size()), ' ');
      out << " | " << t;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace tplmon
