#include "tplmon/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "tplmon/errors.hpp"

namespace tplmon {

namespace {

bool keys_close(const CellKey& a, const CellKey& b, double tol) {
  return std::abs(a.design.design_dimension - b.design.design_dimension) <= tol &&
         std::abs(a.params.laser_power - b.params.laser_power) <= tol &&
         std::abs(a.params.scan_rate - b.params.scan_rate) <= tol;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view text, std::size_t line, const std::string& column) {
  double value = 0.0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw RowError(line, "column '" + column + "': cannot parse '" + std::string(text) +
                             "' as a number");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string to_string(const ProcessParams& p) {
  return "LP=" + format_double(p.laser_power) + ", SR=" + format_double(p.scan_rate);
}

std::string to_string(const CellKey& key) {
  return "D=" + format_double(key.design.design_dimension) + ", " + to_string(key.params);
}

void validate(const ProcessParams& p) {
  if (!(p.laser_power > 0.0) || !(p.scan_rate > 0.0)) {
    throw ArgumentError("process parameters must be positive (" + to_string(p) + ")");
  }
  const double dose = p.dose();
  if (!std::isfinite(dose) || !(dose > 0.0)) {
    throw ArgumentError("dose LP^2/SR must be finite and positive (" + to_string(p) + ")");
  }
}

void validate(const DesignSpec& d) {
  if (!(d.design_dimension > 0.0) || !std::isfinite(d.design_dimension)) {
    throw ArgumentError("design dimension must be positive");
  }
}

DatasetGrid DatasetGrid::from_records(std::vector<MeasurementRecord> records,
                                      double key_tolerance) {
  DatasetGrid grid;
  grid.key_tolerance_ = key_tolerance;
  grid.record_count_ = records.size();
  for (auto& record : records) {
    const CellKey key{record.design, record.params};
    auto it = std::find_if(grid.cells_.begin(), grid.cells_.end(),
                           [&](const Cell& c) { return keys_close(c.key, key, key_tolerance); });
    if (it == grid.cells_.end()) {
      grid.cells_.push_back(Cell{key, {}});
      it = std::prev(grid.cells_.end());
    }
    it->records.push_back(std::move(record));
  }
  std::stable_sort(grid.cells_.begin(), grid.cells_.end(),
                   [](const Cell& a, const Cell& b) { return a.key < b.key; });
  return grid;
}

const Cell* DatasetGrid::find(const CellKey& key) const {
  for (const auto& c : cells_) {
    if (keys_close(c.key, key, key_tolerance_)) return &c;
  }
  return nullptr;
}

std::vector<DesignSpec> DatasetGrid::designs() const {
  std::vector<DesignSpec> out;
  for (const auto& c : cells_) {
    if (std::none_of(out.begin(), out.end(), [&](const DesignSpec& d) {
          return std::abs(d.design_dimension - c.key.design.design_dimension) <= key_tolerance_;
        })) {
      out.push_back(c.key.design);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ProcessParams> DatasetGrid::parameter_groups() const {
  std::vector<ProcessParams> out;
  for (const auto& c : cells_) {
    if (std::none_of(out.begin(), out.end(), [&](const ProcessParams& p) {
          return std::abs(p.laser_power - c.key.params.laser_power) <= key_tolerance_ &&
                 std::abs(p.scan_rate - c.key.params.scan_rate) <= key_tolerance_;
        })) {
      out.push_back(c.key.params);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Cell> DatasetGrid::design_row(const DesignSpec& design) const {
  std::vector<Cell> row;
  for (const auto& c : cells_) {
    if (std::abs(c.key.design.design_dimension - design.design_dimension) <= key_tolerance_) {
      row.push_back(c);
    }
  }
  return row;
}

std::span<const MeasurementRecord> cell(const DatasetGrid& grid, const DesignSpec& design,
                                        const ProcessParams& params) {
  const Cell* c = grid.find(CellKey{design, params});
  if (c == nullptr) return {};
  return c->records;
}

DatasetGrid parse_dataset(std::istream& in, const CsvSchema& schema, double key_tolerance) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    for (auto f : split_row(line)) header.emplace_back(f);
    break;
  }
  if (header.empty()) throw EmptyDatasetError("dataset is empty (no header row)");

  const auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw SchemaError("missing required column '" + name + "'");
      return std::nullopt;
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t col_design = *column(schema.design, true);
  const std::size_t col_lp = *column(schema.laser_power, true);
  const std::size_t col_sr = *column(schema.scan_rate, true);
  const std::size_t col_r = *column(schema.radius, true);
  const std::size_t col_h = *column(schema.height, true);
  const auto col_status = schema.status.empty() ? std::nullopt : column(schema.status, false);

  std::vector<MeasurementRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_row(line);
    if (fields.size() != header.size()) {
      throw RowError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    }
    MeasurementRecord r;
    r.design.design_dimension = parse_number(fields[col_design], line_no, schema.design);
    r.params.laser_power = parse_number(fields[col_lp], line_no, schema.laser_power);
    r.params.scan_rate = parse_number(fields[col_sr], line_no, schema.scan_rate);
    r.radius = parse_number(fields[col_r], line_no, schema.radius);
    r.height = parse_number(fields[col_h], line_no, schema.height);
    if (col_status && !fields[*col_status].empty()) {
      r.status_label = std::string(fields[*col_status]);
    }
    try {
      validate(r.design);
      validate(r.params);
    } catch (const ArgumentError& e) {
      throw RowError(line_no, e.what());
    }
    if (!(r.radius > 0.0)) throw RowError(line_no, "radius must be positive");
    if (!(r.height > 0.0)) throw RowError(line_no, "height must be positive");
    records.push_back(std::move(r));
  }
  if (records.empty()) throw EmptyDatasetError("dataset has a header but no records");
  return DatasetGrid::from_records(std::move(records), key_tolerance);
}

DatasetGrid load_dataset(const std::filesystem::path& path, const CsvSchema& schema,
                         double key_tolerance) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open dataset '" + path.string() + "'");
  return parse_dataset(in, schema, key_tolerance);
}

void write_dataset(std::ostream& out, const DatasetGrid& grid, const CsvSchema& schema) {
  bool any_label = false;
  for (const auto& c : grid.cells()) {
    for (const auto& r : c.records) any_label = any_label || r.status_label.has_value();
  }
  out << schema.design << ',' << schema.laser_power << ',' << schema.scan_rate << ','
      << schema.radius << ',' << schema.height;
  if (any_label) out << ',' << schema.status;
  out << '\n';
  for (const auto& c : grid.cells()) {
    for (const auto& r : c.records) {
      out << format_double(r.design.design_dimension) << ',' << format_double(r.params.laser_power)
          << ',' << format_double(r.params.scan_rate) << ',' << format_double(r.radius) << ','
          << format_double(r.height);
      if (any_label) out << ',' << r.status_label.value_or("");
      out << '\n';
    }
  }
}

void save_dataset(const std::filesystem::path& path, const DatasetGrid& grid,
                  const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write dataset '" + path.string() + "'");
  write_dataset(out, grid, schema);
}

nlohmann::ordered_json grid_summary(const DatasetGrid& grid) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : grid.cells()) {
    const auto n = static_cast<double>(c.records.size());
    double mr = 0.0, mh = 0.0;
    for (const auto& r : c.records) {
      mr += r.radius;
      mh += r.height;
    }
    mr /= n;
    mh /= n;
    double vr = 0.0, vh = 0.0;
    for (const auto& r : c.records) {
      vr += (r.radius - mr) * (r.radius - mr);
      vh += (r.height - mh) * (r.height - mh);
    }
    nlohmann::ordered_json entry;
    entry["design"] = c.key.design.design_dimension;
    entry["laser_power"] = c.key.params.laser_power;
    entry["scan_rate"] = c.key.params.scan_rate;
    entry["count"] = c.records.size();
    entry["radius_mean"] = mr;
    entry["radius_sd"] = c.records.size() > 1 ? std::sqrt(vr / (n - 1.0)) : 0.0;
    entry["height_mean"] = mh;
    entry["height_sd"] = c.records.size() > 1 ? std::sqrt(vh / (n - 1.0)) : 0.0;
    cells.push_back(std::move(entry));
  }
  nlohmann::ordered_json out;
  out["record_count"] = grid.record_count();
  out["cell_count"] = grid.cells().size();
  out["cells"] = std::move(cells);
  return out;
}

}  // namespace tplmon
