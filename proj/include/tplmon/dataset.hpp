#pragma once

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tplmon {

/// Laser power (% of the 50 mW reference) and scan rate (mm/s).
struct ProcessParams {
  double laser_power = 0.0;
  double scan_rate = 0.0;

  /// Dose proxy LP^2 / SR.
  double dose() const noexcept { return laser_power * laser_power / scan_rate; }
  auto operator<=>(const ProcessParams&) const = default;
};

/// Target hemisphere radius in µm.
struct DesignSpec {
  double design_dimension = 0.0;
  auto operator<=>(const DesignSpec&) const = default;
};

struct MeasurementRecord {
  DesignSpec design;
  ProcessParams params;
  double radius = 0.0;  ///< equivalent radius R, µm
  double height = 0.0;  ///< average height H, µm
  std::optional<std::string> status_label;
};

struct CellKey {
  DesignSpec design;
  ProcessParams params;
  auto operator<=>(const CellKey&) const = default;
};

std::string to_string(const ProcessParams& p);
std::string to_string(const CellKey& key);

/// Throws ArgumentError when a value violates the positivity invariants.
void validate(const ProcessParams& p);
void validate(const DesignSpec& d);

struct Cell {
  CellKey key;
  std::vector<MeasurementRecord> records;
};

/// Measurement records grouped by (design, process parameters). Immutable
/// once built; cells are ordered by key.
class DatasetGrid {
 public:
  DatasetGrid() = default;

  /// Groups records into cells. Keys whose every component lies within
  /// `key_tolerance` of an existing cell key join that cell.
  static DatasetGrid from_records(std::vector<MeasurementRecord> records,
                                  double key_tolerance = 1e-9);

  std::span<const Cell> cells() const noexcept { return cells_; }
  const Cell* find(const CellKey& key) const;
  std::size_t record_count() const noexcept { return record_count_; }
  double key_tolerance() const noexcept { return key_tolerance_; }
  bool empty() const noexcept { return cells_.empty(); }

  /// Distinct design dimensions, ascending.
  std::vector<DesignSpec> designs() const;
  /// Distinct parameter groups, ordered by (LP, SR).
  std::vector<ProcessParams> parameter_groups() const;
  /// Cells of one design, ordered by parameter group.
  std::vector<Cell> design_row(const DesignSpec& design) const;

 private:
  std::vector<Cell> cells_;
  std::size_t record_count_ = 0;
  double key_tolerance_ = 1e-9;
};

/// Records of one cell; empty when the key is absent.
std::span<const MeasurementRecord> cell(const DatasetGrid& grid, const DesignSpec& design,
                                        const ProcessParams& params);

/// Column names of the CSV layout.
struct CsvSchema {
  std::string design = "design";
  std::string laser_power = "laser_power";
  std::string scan_rate = "scan_rate";
  std::string radius = "radius";
  std::string height = "height";
  std::string status = "status";  ///< optional column
};

DatasetGrid parse_dataset(std::istream& in, const CsvSchema& schema = {},
                          double key_tolerance = 1e-9);
DatasetGrid load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {},
                         double key_tolerance = 1e-9);

/// Writes the grid as CSV, cell by cell. Numbers use the shortest
/// representation that parses back to the same double.
void write_dataset(std::ostream& out, const DatasetGrid& grid, const CsvSchema& schema = {});
void save_dataset(const std::filesystem::path& path, const DatasetGrid& grid,
                  const CsvSchema& schema = {});

/// Cell keys, counts and per-cell mean/SD of R and H.
nlohmann::ordered_json grid_summary(const DatasetGrid& grid);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace tplmon
