#include "tplmon/method1.hpp"

#include "tplmon/parallel.hpp"

namespace tplmon {

MonitorVerdict monitor_cell_m1(std::span<const MeasurementRecord> reference,
                               std::span<const MeasurementRecord> query,
                               FeatureSelection feature, SignificanceLevel alpha) {
  MonitorVerdict v;
  v.method = "m1";
  if (!reference.empty()) v.cell = CellKey{reference.front().design, reference.front().params};
  const auto run = [&](Feature f) {
    const auto outcome =
        two_sample_t(feature_values(reference, f), feature_values(query, f), alpha);
    v.outcomes.push_back({std::string(to_string(f)), outcome});
    if (outcome.reject_null) v.decision = Decision::Changed;
  };
  if (feature != FeatureSelection::Height) run(Feature::Radius);
  if (feature != FeatureSelection::Radius) run(Feature::Height);
  return v;
}

AccuracyTable GridReportM1::table(bool expect_change) const {
  AccuracyTable t;
  t.title = "Two-sample t-test per cell";
  t.rows.push_back({"Radius", expect_change, radius_rejections, cells() - radius_rejections});
  t.rows.push_back({"Height", expect_change, height_rejections, cells() - height_rejections});
  return t;
}

GridReportM1 grid_report_m1(const DatasetGrid& grid1, const DatasetGrid& grid2,
                            SignificanceLevel alpha) {
  std::vector<std::pair<const Cell*, const Cell*>> shared;
  for (const auto& c : grid1.cells()) {
    if (const Cell* other = grid2.find(c.key)) shared.emplace_back(&c, other);
  }
  if (shared.empty()) {
    throw NoOverlapError("the two datasets share no (design, parameter group) cell");
  }
  GridReportM1 report;
  report.verdicts = parallel_map(shared.size(), [&](std::size_t i) {
    return monitor_cell_m1(shared[i].first->records, shared[i].second->records,
                           FeatureSelection::Both, alpha);
  });
  for (std::size_t i = 0; i < shared.size(); ++i) {
    auto& v = report.verdicts[i];
    v.cell = shared[i].first->key;
    if (v.outcome("radius")->reject_null) ++report.radius_rejections;
    if (v.outcome("height")->reject_null) ++report.height_rejections;
  }
  return report;
}

nlohmann::ordered_json to_json(const GridReportM1& report) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& v : report.verdicts) cells.push_back(to_json(v));
  return {{"cells", std::move(cells)},
          {"radius_rejections", report.radius_rejections},
          {"height_rejections", report.height_rejections},
          {"cell_count", report.cells()}};
}

}  // namespace tplmon
