#include <doctest.h>

#include <cmath>

#include "tplmon/evaluation.hpp"
#include "tplmon/rng.hpp"

using namespace tplmon;

namespace {

const SignificanceLevel kAlpha(0.10);

std::vector<MeasurementRecord> correlated_records(const Eigen::Vector2d& mean, double sd,
                                                  double rho, int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<MeasurementRecord> out;
  for (int i = 0; i < n; ++i) {
    const double z1 = rng.normal(), z2 = rng.normal();
    MeasurementRecord r;
    r.design = {2.0};
    r.params = {50, 50};
    r.radius = mean(0) + sd * z1;
    r.height = mean(1) + sd * (rho * z1 + std::sqrt(1 - rho * rho) * z2);
    out.push_back(r);
  }
  return out;
}

StatusProfile noiseless() {
  auto p = paper_like_profile();
  p.radius_sd = 0.0;
  p.height_sd = 0.0;
  return p;
}

}  // namespace

TEST_CASE("method 1: identical samples never reject") {
  const auto grid = generate_grid(paper_like_profile(), paper_designs(), paper_parameter_groups(), 20, 2);
  const auto report = grid_report_m1(grid, grid, kAlpha);
  CHECK(report.cells() == 36);
  CHECK(report.radius_rejections == 0);
  CHECK(report.height_rejections == 0);
  for (const auto& v : report.verdicts) {
    CHECK_FALSE(v.changed());
    CHECK(v.outcome("radius")->statistic == 0.0);
  }
  const std::vector<DesignSpec> other{{5.0}};
  const auto disjoint = generate_grid(paper_like_profile(), other, paper_parameter_groups(), 3, 2);
  CHECK_THROWS_AS(grid_report_m1(grid, disjoint, kAlpha), NoOverlapError);
}

TEST_CASE("method 1: power against a one-SD height shift") {
  // Normal approximation of the two-sided power at n = 20 per group:
  // Phi(sqrt(10) - z_0.975) ~ 0.885; the t-test is slightly below that.
  int detected = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const auto a = correlated_records({1.0, 1.0}, 0.01, 0.0, 20, derive_seed(3, {std::uint64_t(t), 0}));
    const auto b = correlated_records({1.0, 1.01}, 0.01, 0.0, 20, derive_seed(3, {std::uint64_t(t), 1}));
    detected += monitor_cell_m1(a, b, FeatureSelection::Height, SignificanceLevel(0.05)).changed();
  }
  const double power = static_cast<double>(detected) / trials;
  CHECK(power > 0.8);
  CHECK(power < 0.9);
}

TEST_CASE("method 2: marginal Z accepts where T^2 rejects") {
  BaselinePrediction prediction;
  prediction.cell = CellKey{{2.0}, {50, 50}};
  prediction.mu0 = Eigen::Vector2d(1.0, 1.0);
  // Shift along the minor axis of a rho = 0.94 cloud.
  const auto query = correlated_records({1.0 + 0.005, 1.0 - 0.005}, 0.01, 0.94, 20, 21);
  const auto zr = test_prediction_z(prediction, query, Feature::Radius, kAlpha);
  const auto zh = test_prediction_z(prediction, query, Feature::Height, kAlpha);
  const auto t2 = test_prediction_t2(prediction, query, kAlpha);
  CHECK_FALSE(zr.changed());
  CHECK_FALSE(zh.changed());
  CHECK(t2.changed());

  std::vector<MeasurementRecord> centred = query;
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (const auto& r : centred) m += Eigen::Vector2d(r.radius, r.height) / 20.0;
  for (auto& r : centred) {
    r.radius += 1.0 - m(0);
    r.height += 1.0 - m(1);
  }
  CHECK(test_prediction_t2(prediction, centred, kAlpha).outcome("joint")->statistic ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK(test_prediction_z(prediction, centred, Feature::Radius, kAlpha).outcome("radius")->statistic ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("method 2: leave-one-cell-out prediction") {
  const auto s = make_scenario(paper_like_profile(), paper_like_offset(), paper_designs(),
                               paper_parameter_groups(), 20, 8);
  const auto& key = s.reference.cells()[14].key;
  const auto prediction = predict_baseline(s.reference, key);
  CHECK(prediction.training_cells == 35);
  const auto truth = s.status1.mean(key.design, key.params);
  CHECK(std::abs(prediction.mu0(0) - truth(0)) < 3 * paper_like_profile().radius_sd);

  // Same status: member of its own cloud; shifted status: not a member.
  const auto far = correlated_records(truth + Eigen::Vector2d(0.01, -0.01), 0.001, 0.94, 20, 5);
  const auto near = cell(s.in_control, key.design, key.params);
  std::vector<StatusSamples> queries{{"S1", {near.begin(), near.end()}}, {"S2", far}};
  const auto membership = classify_status_m2(s.reference, queries, key, kAlpha);
  REQUIRE(membership.size() == 2);
  CHECK(membership[0].decision.member);
  CHECK_FALSE(membership[1].decision.member);

  // One design only: no trend can be formed.
  const std::vector<DesignSpec> one{{2.0}};
  const auto single = generate_grid(paper_like_profile(), one, paper_parameter_groups(), 5, 1);
  CHECK_THROWS_AS(predict_baseline(single, CellKey{{2.0}, {50, 50}}), CoverageError);
}

TEST_CASE("method 2: sweep is deterministic given its seed") {
  const auto s = make_scenario(paper_like_profile(), paper_like_offset(), paper_designs(),
                               paper_parameter_groups(), 20, 8);
  const std::vector<int> nd{3, 6}, np{3, 6};
  const auto a = data_efficiency_sweep_m2(s.reference, s.in_control, s.out_of_control, nd, np, kAlpha, 1, 4);
  const auto b = data_efficiency_sweep_m2(s.reference, s.in_control, s.out_of_control, nd, np, kAlpha, 1, 4);
  CHECK(a.type1 == b.type1);
  CHECK(a.type2 == b.type2);
  CHECK(to_tsv(a) == to_tsv(b));
}

TEST_CASE("method 3: bootstrap distributions") {
  const auto profile = noiseless();
  const auto grid = generate_grid(profile, paper_designs(), paper_parameter_groups(), 5, 1);
  const auto row = grid.design_row(paper_designs()[2]);
  const std::vector<Cell> three{row[0], row[2], row[5]};
  BootstrapOptions options;
  const auto dist = bootstrap_params(three, Feature::Radius, options, 77);
  REQUIRE(dist.iterations() == 40);
  const Eigen::Vector3d truth = profile.radius_at(paper_designs()[2]).vector();
  for (int i = 0; i < 40; ++i) {
    for (int k = 0; k < 3; ++k) CHECK(std::abs(dist.samples(i, k) - truth(k)) <= 1e-3 * std::abs(truth(k)));
  }

  const auto noisy = generate_grid(paper_like_profile(), paper_designs(), paper_parameter_groups(), 20, 1);
  const auto nrow = noisy.design_row(paper_designs()[2]);
  const std::vector<Cell> nthree{nrow[0], nrow[1], nrow[5]};
  const auto a = bootstrap_params(nthree, Feature::Height, options, 5);
  const auto b = bootstrap_params(nthree, Feature::Height, options, 5);
  CHECK(a.samples == b.samples);

  const auto same = test_same_group_m3(a, a, kAlpha);
  CHECK(same.outcomes.front().outcome.statistic == 0.0);
  CHECK_FALSE(same.changed());

  BootstrapOptions single = options;
  single.iterations = 1;
  CHECK_THROWS_AS(bootstrap_params(nthree, Feature::Height, single, 5), ArgumentError);

  const auto back = bootstrap_from_json(nlohmann::json::parse(to_json(a).dump()));
  CHECK(back.samples == a.samples);
}

TEST_CASE("method 3: threshold widening") {
  std::vector<double> fold;
  for (int i = 0; i <= 100; ++i) fold.push_back(i);
  const std::vector<double> inside{40, 50, 60};
  double f = -1;
  const auto zero = widen_to_coverage(fold, inside, 0.10, 0.0, 10.0, &f);
  REQUIRE(zero);
  CHECK(zero->lower == 50.0);
  CHECK(zero->upper == 50.0);
  CHECK(f == 0.0);

  const auto full = widen_to_coverage(fold, inside, 0.10, 1.0, 10.0, &f);
  REQUIRE(full);
  CHECK(full->contains(40.0));
  CHECK(full->contains(60.0));
  CHECK(f == doctest::Approx(10.0 / 45.0).epsilon(1e-6));

  const std::vector<double> outside{5000.0};
  CHECK_FALSE(widen_to_coverage(fold, outside, 0.10, 0.95, 10.0));

  const std::vector<ProcessParams> groups = paper_parameter_groups();
  const auto companions = companion_groups(groups[0], groups);
  REQUIRE(companions.size() == 2);
  CHECK(companions[0] == ProcessParams{50, 60});  // lowest dose
  CHECK(companions[1] == ProcessParams{50, 45});  // highest dose after P1
}

TEST_CASE("method 3: majority vote boundary") {
  ThresholdInterval radius, height;
  radius.feature = Feature::Radius;
  height.feature = Feature::Height;
  for (int k = 0; k < 3; ++k) {
    radius.bounds[k] = Bounds{-1.0, 1.0};
    height.bounds[k] = Bounds{-1.0, 1.0};
  }
  BootstrapDistribution qr, qh;
  qr.feature = Feature::Radius;
  qh.feature = Feature::Height;
  qr.samples = Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(4, 3);
  qh.samples = Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(4, 3);

  CHECK_FALSE(monitor_unknown_group_m3(radius, height, qr, qh, 2).changed());
  qr.samples.col(0).setConstant(2.0);
  qr.samples.col(1).setConstant(2.0);
  CHECK_FALSE(monitor_unknown_group_m3(radius, height, qr, qh, 2).changed());
  qh.samples.col(2).setConstant(-2.0);
  CHECK(monitor_unknown_group_m3(radius, height, qr, qh, 2).changed());

  height.bounds[1].reset();
  CHECK_THROWS_AS(monitor_unknown_group_m3(radius, height, qr, qh, 2), IncompleteThresholdError);
}

TEST_CASE("accuracy rows") {
  AccuracyRow in{"in", false, 3, 33};
  AccuracyRow out{"out", true, 30, 6};
  CHECK(in.accuracy() == doctest::Approx(100.0 * 33 / 36));
  CHECK(out.accuracy() == doctest::Approx(100.0 * 30 / 36));
  const auto text = render(AccuracyTable{"t", {in, out}});
  CHECK(text.find("91.67") != std::string::npos);
  CHECK(text.find("83.33") != std::string::npos);
}
