#include <doctest.h>

#include <sstream>

#include "tplmon/dataset.hpp"
#include "tplmon/errors.hpp"
#include "tplmon/twin.hpp"

using namespace tplmon;

TEST_CASE("a CSV row maps onto a record") {
  std::istringstream in("design,laser_power,scan_rate,radius,height,status\n1.6,50,40,1.41,0.95,S1\n");
  const auto grid = parse_dataset(in);
  REQUIRE(grid.cells().size() == 1);
  const auto& r = grid.cells()[0].records[0];
  CHECK(r.design.design_dimension == 1.6);
  CHECK(r.params.laser_power == 50.0);
  CHECK(r.params.scan_rate == 40.0);
  CHECK(r.radius == 1.41);
  CHECK(r.height == 0.95);
  CHECK(r.status_label == "S1");
  CHECK(r.params.dose() == doctest::Approx(62.5));
}

TEST_CASE("invalid rows are reported with their line") {
  std::istringstream negative("design,laser_power,scan_rate,radius,height\n1.6,50,40,-0.2,0.95\n");
  CHECK_THROWS_AS(parse_dataset(negative), RowError);
  std::istringstream text("design,laser_power,scan_rate,radius,height\n1.6,fifty,40,1,1\n");
  try {
    parse_dataset(text);
    FAIL("expected a row error");
  } catch (const RowError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream zero_sr("design,laser_power,scan_rate,radius,height\n1.6,50,0,1,1\n");
  CHECK_THROWS_AS(parse_dataset(zero_sr), RowError);
  std::istringstream missing("design,laser_power,radius,height\n1.6,50,1,1\n");
  CHECK_THROWS_AS(parse_dataset(missing), SchemaError);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_dataset(empty), EmptyDatasetError);
  std::istringstream header_only("design,laser_power,scan_rate,radius,height\n");
  CHECK_THROWS_AS(parse_dataset(header_only), EmptyDatasetError);
}

TEST_CASE("paper-scale grid has 36 cells of 20 samples and round-trips") {
  const auto designs = paper_designs();
  const auto groups = paper_parameter_groups();
  const auto grid = generate_grid(paper_like_profile(), designs, groups, 20, 5, "S1");
  CHECK(grid.record_count() == 720);
  CHECK(grid.cells().size() == 36);
  for (const auto& c : grid.cells()) CHECK(c.records.size() == 20);
  CHECK(cell(grid, designs[0], groups[0]).size() == 20);
  CHECK(cell(grid, DesignSpec{3.0}, groups[0]).empty());

  std::stringstream buf;
  write_dataset(buf, grid);
  const auto back = parse_dataset(buf);
  REQUIRE(back.cells().size() == 36);
  for (std::size_t i = 0; i < 36; ++i) {
    const auto a = grid.cells()[i].records;
    const auto b = cell(back, grid.cells()[i].key.design, grid.cells()[i].key.params);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].radius == b[k].radius);
      CHECK(a[k].height == b[k].height);
      CHECK(a[k].status_label == b[k].status_label);
    }
  }
}

TEST_CASE("designs and groups are listed in order") {
  const auto grid = generate_grid(paper_like_profile(), paper_designs(), paper_parameter_groups(), 2, 1);
  const auto designs = grid.designs();
  REQUIRE(designs.size() == 6);
  CHECK(designs.front().design_dimension == 1.6);
  CHECK(designs.back().design_dimension == 2.6);
  const auto groups = grid.parameter_groups();
  REQUIRE(groups.size() == 6);
  CHECK(groups.front() == ProcessParams{50, 40});
  CHECK(grid.design_row(designs[2]).size() == 6);
}
