#pragma once

// Method 1: same-cell comparison of two statuses with the pooled two-sample
// t-test, one test per feature.

#include <span>
#include <vector>

#include "tplmon/dataset.hpp"
#include "tplmon/monitor.hpp"

namespace tplmon {

/// With FeatureSelection::Both the verdict is "changed" when either feature's
/// test rejects; both outcomes are recorded.
MonitorVerdict monitor_cell_m1(std::span<const MeasurementRecord> reference,
                               std::span<const MeasurementRecord> query,
                               FeatureSelection feature, SignificanceLevel alpha);

struct GridReportM1 {
  /// One verdict per shared cell (both features), ordered by cell key.
  std::vector<MonitorVerdict> verdicts;
  long radius_rejections = 0;
  long height_rejections = 0;

  long cells() const noexcept { return static_cast<long>(verdicts.size()); }
  /// Table 2 layout; `expect_change` selects which column counts as correct.
  AccuracyTable table(bool expect_change) const;
};

/// Throws NoOverlapError when the grids share no cell key.
GridReportM1 grid_report_m1(const DatasetGrid& grid1, const DatasetGrid& grid2,
                            SignificanceLevel alpha);

nlohmann::ordered_json to_json(const GridReportM1& report);

}  // namespace tplmon
