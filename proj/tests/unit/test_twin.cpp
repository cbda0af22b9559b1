#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "tplmon/parallel.hpp"
#include "tplmon/rng.hpp"
#include "tplmon/stats.hpp"
#include "tplmon/twin.hpp"

using namespace tplmon;

TEST_CASE("zero noise reproduces the model mean") {
  auto profile = paper_like_profile();
  profile.radius_sd = 0.0;
  profile.height_sd = 0.0;
  const auto grid = generate_grid(profile, paper_designs(), paper_parameter_groups(), 3, 1);
  for (const auto& c : grid.cells()) {
    const auto mu = profile.mean(c.key.design, c.key.params);
    for (const auto& r : c.records) {
      CHECK(r.radius == mu(0));
      CHECK(r.height == mu(1));
    }
  }
}

TEST_CASE("generated noise has the configured correlation") {
  const auto profile = paper_like_profile();
  const std::vector<DesignSpec> d{{2.0}};
  const std::vector<ProcessParams> p{{50, 50}};
  const auto grid = generate_grid(profile, d, p, 10000, 4);
  Eigen::MatrixXd x(10000, 2);
  const auto& recs = grid.cells()[0].records;
  for (int i = 0; i < 10000; ++i) x.row(i) << recs[i].radius, recs[i].height;
  const Eigen::MatrixXd s = sample_covariance(x);
  CHECK(std::abs(s(0, 1) / std::sqrt(s(0, 0) * s(1, 1)) - 0.94) < 0.02);
  CHECK(std::sqrt(s(0, 0)) == doctest::Approx(profile.radius_sd).epsilon(0.03));
}

TEST_CASE("same seed gives identical grids") {
  const auto a = generate_grid(paper_like_profile(), paper_designs(), paper_parameter_groups(), 20, 99);
  const auto b = generate_grid(paper_like_profile(), paper_designs(), paper_parameter_groups(), 20, 99);
  const auto c = generate_grid(paper_like_profile(), paper_designs(), paper_parameter_groups(), 20, 98);
  REQUIRE(a.cells().size() == b.cells().size());
  bool differs = false;
  for (std::size_t i = 0; i < a.cells().size(); ++i) {
    for (std::size_t k = 0; k < a.cells()[i].records.size(); ++k) {
      CHECK(a.cells()[i].records[k].radius == b.cells()[i].records[k].radius);
      differs = differs || a.cells()[i].records[k].radius != c.cells()[i].records[k].radius;
    }
  }
  CHECK(differs);
}

TEST_CASE("status pairs") {
  const auto designs = paper_designs();
  const auto groups = paper_parameter_groups();
  const auto [s1, s2] = make_status_pair(paper_like_profile(), OffsetSpec{}, designs, groups);
  for (const auto& d : designs) CHECK(s1.at(d) == s2.at(d));

  // An a_H offset moves heights and leaves radii alone.
  OffsetSpec oh;
  oh.intercept(3) = 0.05;
  const auto [h1, h2] = make_status_pair(paper_like_profile(), oh, designs, groups);
  const auto g1 = generate_grid(h1, designs, groups, 20, 5);
  const auto g2 = generate_grid(h2, designs, groups, 20, 6);
  for (std::size_t i = 0; i < g1.cells().size(); ++i) {
    double r1 = 0, r2 = 0, hh1 = 0, hh2 = 0;
    for (const auto& r : g1.cells()[i].records) r1 += r.radius / 20, hh1 += r.height / 20;
    for (const auto& r : g2.cells()[i].records) r2 += r.radius / 20, hh2 += r.height / 20;
    CHECK(std::abs(r1 - r2) < 5 * h1.radius_sd / std::sqrt(10.0));
    CHECK(hh2 - hh1 > 0.01);
  }

  // Moving b_R below the domain bound of the lowest dose is infeasible.
  OffsetSpec bad;
  bad.intercept(1) = -0.02;
  CHECK_THROWS_AS(make_status_pair(paper_like_profile(), bad, designs, groups), DomainError);

  auto invalid = paper_like_profile();
  invalid.correlation = 1.0;
  CHECK_THROWS_AS(check_profile(invalid, designs, groups), ArgumentError);
}

TEST_CASE("paper-like preset shifts each cell by one to two noise SDs") {
  const auto designs = paper_designs();
  const auto groups = paper_parameter_groups();
  const auto [s1, s2] = make_status_pair(paper_like_profile(), paper_like_offset(), designs, groups);
  for (const auto& d : designs) {
    for (const auto& p : groups) {
      const auto shift = s2.mean(d, p) - s1.mean(d, p);
      CHECK(std::abs(shift(0)) / s1.radius_sd == doctest::Approx(1.5));
      CHECK(std::abs(shift(1)) / s1.height_sd == doctest::Approx(1.5));
    }
  }
}

TEST_CASE("profile JSON round trip") {
  const auto p = paper_like_profile();
  const auto back = profile_from_json(nlohmann::json::parse(to_json(p).dump()));
  for (const auto& d : paper_designs()) CHECK(back.at(d) == p.at(d));
  CHECK(back.correlation == p.correlation);
  const auto o = offset_from_json(nlohmann::json::parse(to_json(parameter_shift_offset()).dump()));
  CHECK(o.intercept == parameter_shift_offset().intercept);
}

TEST_CASE("seed derivation and uniform draws") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
  SplitMix64 rng(5);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("parallel map keeps index order and rethrows the first failure") {
  const auto out = parallel_map(100, [](std::size_t i) { return i * i; }, 4);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == i * i);
  std::atomic<int> calls{0};
  parallel_for(50, [&](std::size_t) { ++calls; }, 3);
  CHECK(calls == 50);
  try {
    parallel_for(20, [](std::size_t i) {
      if (i == 7 || i == 13) throw std::runtime_error(std::to_string(i));
    }, 4);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "7");
  }
}
