// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <sys/wait.h>

#include "tplmon/config.hpp"
#include "tplmon/evaluation.hpp"
#include "tplmon/rng.hpp"

using namespace tplmon;
namespace fs = std::filesystem;

namespace {

const std::uint64_t kSeed = RunConfig{}.seed;

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Exactness against direct loops over the definitional formulas.
Result statistic_exactness() {
  SplitMix64 rng(derive_seed(kSeed, {100}));
  const SignificanceLevel alpha(0.05);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n1 = 2 + static_cast<int>(rng.uniform_index(9));
    const int n2 = 2 + static_cast<int>(rng.uniform_index(9));
    const int n = 4 + static_cast<int>(rng.uniform_index(9));
    std::vector<double> g1(n1), g2(n2);
    for (auto& v : g1) v = 3.0 * rng.normal() + 1.0;
    for (auto& v : g2) v = 2.0 * rng.normal() - 1.0;
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
      const double z1 = rng.normal(), z2 = rng.normal();
      x(i, 0) = z1 + 0.5;
      x(i, 1) = 0.8 * z1 + 0.6 * z2 - 0.2;
    }
    const double mu0 = rng.normal();
    const double m0 = rng.normal(), m1 = rng.normal();

    // Definitional formulas in extended precision, so the oracle is more
    // accurate than the double-precision code under test.
    using LD = long double;
    LD s1 = 0, s2 = 0, ss1 = 0, ss2 = 0;
    for (double v : g1) s1 += v;
    for (double v : g2) s2 += v;
    const LD xb1 = s1 / n1, xb2 = s2 / n2;
    for (double v : g1) ss1 += (v - xb1) * (v - xb1);
    for (double v : g2) ss2 += (v - xb2) * (v - xb2);
    const LD sp = std::sqrt((ss1 / (n1 - 1) + ss2 / (n2 - 1)) / 2);
    const double t_ref =
        static_cast<double>((xb1 - xb2) / (sp * std::sqrt(LD(1) / n1 + LD(1) / n2)));
    const auto t = two_sample_t(Eigen::Map<Eigen::VectorXd>(g1.data(), n1),
                                Eigen::Map<Eigen::VectorXd>(g2.data(), n2), alpha);
    worst = std::max(worst, std::abs(t.statistic - t_ref));

    const double z_ref = static_cast<double>((xb1 - mu0) / std::sqrt(ss1 / (n1 - 1)));
    const auto z = one_sample_z(Eigen::Map<Eigen::VectorXd>(g1.data(), n1), mu0, alpha);
    worst = std::max(worst, std::abs(z.statistic - z_ref));

    LD a = 0, b = 0;
    for (int i = 0; i < n; ++i) a += x(i, 0), b += x(i, 1);
    a /= n;
    b /= n;
    LD c00 = 0, c01 = 0, c11 = 0;
    for (int i = 0; i < n; ++i) {
      c00 += (x(i, 0) - a) * (x(i, 0) - a);
      c01 += (x(i, 0) - a) * (x(i, 1) - b);
      c11 += (x(i, 1) - b) * (x(i, 1) - b);
    }
    c00 /= n - 1;
    c01 /= n - 1;
    c11 /= n - 1;
    const LD det = c00 * c11 - c01 * c01;
    const LD d0 = a - m0, d1 = b - m1;
    const double h_ref =
        static_cast<double>(n * (d0 * d0 * c11 - 2 * d0 * d1 * c01 + d1 * d1 * c00) / det);
    const auto h = hotelling_t2_one_sample(x, Eigen::Vector2d(m0, m1), alpha);
    worst = std::max(worst, std::abs(h.statistic - h_ref));
  }
  return {worst <= 1e-10, fmt("max abs error %.2e over 1000 inputs", worst)};
}

Result distribution_accuracy() {
  using boost::math::quadrature::gauss_kronrod;
  boost::math::quadrature::tanh_sinh<double> tanh_sinh;
  double worst = 0.0;
  int points = 0;
  for (double nu : {1.0, 2.5, 5.0, 10.0, 38.0, 100.0}) {
    const double norm = std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) /
                        std::sqrt(nu * std::numbers::pi);
    const auto density = [&](double t) { return norm * std::pow(1 + t * t / nu, -(nu + 1) / 2); };
    for (double t : {-10.0, -3.0, -1.0, -0.1, 0.5, 2.0, 5.0, 20.0}) {
      const double half = gauss_kronrod<double, 61>::integrate(density, 0.0, std::abs(t), 20, 1e-14);
      const double oracle = t >= 0 ? 0.5 + half : 0.5 - half;
      worst = std::max(worst, std::abs(t_cdf(t, nu) - oracle));
      ++points;
    }
  }
  for (auto [d1, d2] : {std::pair{1.0, 1.0}, {2.0, 18.0}, {3.0, 37.0}, {5.0, 10.0}, {10.0, 3.0}}) {
    const double lb = std::lgamma(d1 / 2) + std::lgamma(d2 / 2) - std::lgamma((d1 + d2) / 2);
    const auto density = [&](double u) {
      return std::exp((d1 / 2) * std::log(d1 / d2) + (d1 / 2 - 1) * std::log(u) -
                      ((d1 + d2) / 2) * std::log1p(d1 * u / d2) - lb);
    };
    for (double x : {0.05, 0.5, 1.0, 2.0, 5.0, 20.0}) {
      worst = std::max(worst, std::abs(f_cdf(x, d1, d2) - tanh_sinh.integrate(density, 0.0, x)));
      ++points;
    }
  }
  for (double z : {-8.0, -4.0, -1.96, -0.5, 0.0, 0.7, 2.5, 6.0}) {
    const double half = gauss_kronrod<double, 61>::integrate(
        [](double u) { return std::exp(-u * u / 2) / std::sqrt(2 * std::numbers::pi); }, 0.0,
        std::abs(z), 20, 1e-14);
    worst = std::max(worst, std::abs(normal_cdf(z) - (z >= 0 ? 0.5 + half : 0.5 - half)));
    ++points;
  }
  return {worst <= 1e-8, fmt("max abs error %.2e over %d (argument, dof) points", worst, points)};
}

Result null_calibration_check() {
  CalibrationOptions options;
  options.trials = 10000;
  options.z.standard_error_z = true;
  const std::vector<double> alphas{0.05, 0.10};
  const auto rows = null_calibration(alphas, options, derive_seed(kSeed, {101}));
  bool pass = true;
  std::string detail;
  for (const auto& r : rows) {
    pass = pass && std::abs(r.rate() - r.alpha) <= 0.015;
    detail += fmt("%s@%.2f=%.4f ", r.test.c_str(), r.alpha, r.rate());
  }
  return {pass, detail};
}

Result fit_recovery() {
  const auto designs = paper_designs();
  const auto groups = paper_parameter_groups();
  auto exact = paper_like_profile();
  exact.radius_sd = 0.0;
  exact.height_sd = 0.0;
  const auto clean = generate_grid(exact, designs, groups, 20, derive_seed(kSeed, {102}));
  double worst_rel = 0.0;
  for (const auto& d : designs) {
    const auto got = fit_models(clean.design_row(d)).coefficients();
    const auto want = exact.at(d);
    for (int k = 0; k < 6; ++k) worst_rel = std::max(worst_rel, std::abs(got(k) - want(k)) / std::abs(want(k)));
  }

  const auto profile = paper_like_profile();
  const auto noisy = generate_grid(profile, designs, groups, 20, derive_seed(kSeed, {103}));
  BootstrapOptions boot;
  boot.iterations = 200;
  boot.samples_per_group = 20;
  double worst_se = 0.0;
  std::uint64_t index = 0;
  for (const auto& d : designs) {
    const auto row = noisy.design_row(d);
    const auto got = fit_models(row).coefficients();
    const auto want = profile.at(d);
    for (const Feature f : {Feature::Radius, Feature::Height}) {
      const auto dist = bootstrap_params(row, f, boot, derive_seed(kSeed, {104, index++}));
      const Eigen::RowVector3d mean = dist.samples.colwise().mean();
      const Eigen::MatrixXd centred = dist.samples.rowwise() - mean;
      const Eigen::Vector3d se = (centred.colwise().squaredNorm() / (dist.iterations() - 1)).cwiseSqrt();
      const int off = f == Feature::Radius ? 0 : 3;
      for (int k = 0; k < 3; ++k) {
        worst_se = std::max(worst_se, std::abs(got(off + k) - want(off + k)) / se(k));
      }
    }
  }
  return {worst_rel <= 1e-3 && worst_se <= 3.0,
          fmt("zero noise max rel error %.2e; noisy max |error|/SE %.2f", worst_rel, worst_se)};
}

Scenario shift_scenario() {
  return make_scenario(paper_like_profile(), paper_like_offset(), paper_designs(),
                       paper_parameter_groups(), 20, kSeed);
}

Scenario coefficient_scenario() {
  return make_scenario(paper_like_profile(), parameter_shift_offset(), paper_designs(),
                       paper_parameter_groups(), 20, kSeed);
}

Result method1_regime() {
  const auto e = evaluate_m1(shift_scenario(), SignificanceLevel(0.10));
  const long r = e.out_of_control.radius_rejections;
  const long h = e.out_of_control.height_rejections;
  return {h >= 34 && r >= 32, fmt("height %ld/36, radius %ld/36 out-of-control cells detected", h, r)};
}

Result method2_regime() {
  const auto e = evaluate_m2(shift_scenario(), SignificanceLevel(0.10));
  const double in = e.t2.rows[0].accuracy();
  const double out = e.t2.rows[1].accuracy();
  const auto t2_only = e.t2_only_radius.size() + e.t2_only_height.size();
  return {in >= 75.0 && out >= 75.0 && t2_only >= 1,
          fmt("in-control %.2f%%, out-of-control %.2f%%, %zu cells where a Z-test accepts and T^2 rejects",
              in, out, t2_only)};
}

Result method3_same() {
  const auto s = coefficient_scenario();
  BootstrapOptions boot;
  boot.samples_per_group = 10;
  const auto t = evaluate_m3_same(s, SignificanceLevel(0.05), boot, SameGroupOptions{},
                                  derive_seed(kSeed, {105}));
  bool pass = true;
  std::string detail;
  for (const auto& row : t.rows) {
    const double need = row.expect_change ? 95.0 : 90.0;
    pass = pass && row.trials() >= 120 && row.accuracy() >= need;
    detail += fmt("%s %.2f%% (%ld trials); ", row.scenario.c_str(), row.accuracy(), row.trials());
  }
  return {pass, detail};
}

Result method3_unknown() {
  const auto s = coefficient_scenario();
  ThresholdOptions options;
  options.bootstrap.samples_per_group = 10;
  const auto t = evaluate_m3_unknown(s, options, 2, 6, derive_seed(kSeed, {106}));
  bool pass = true;
  std::string detail;
  for (const auto& row : t.rows) {
    pass = pass && row.trials() >= 200 && row.accuracy() >= 75.0;
    detail += fmt("%s %.2f%% (%ld trials, %ld failed); ", row.scenario.c_str(), row.accuracy(),
                  row.trials(), row.failures);
  }
  return {pass, detail};
}

bool nonincreasing(const std::vector<double>& v, const std::vector<double>& se, std::string& where,
                   const std::string& label) {
  bool ok = true;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i + 1] > v[i] + 3.0 * std::hypot(se[i], se[i + 1])) {
      ok = false;
      where += label + fmt(" step %zu; ", i);
    }
  }
  return ok;
}

Result sweep_shapes() {
  const auto s = shift_scenario();
  const SignificanceLevel alpha(0.10);
  const std::vector<int> sizes{3, 5, 8, 10, 15, 20};
  const auto fig3 = sample_size_sweep_m1(s, sizes, alpha, 200, derive_seed(kSeed, {107}));
  std::string where;
  bool ok = nonincreasing(fig3.type1_radius, fig3.type1_radius_se, where, "fig3 type1 R");
  ok = nonincreasing(fig3.type2_radius, fig3.type2_radius_se, where, "fig3 type2 R") && ok;
  ok = nonincreasing(fig3.type1_height, fig3.type1_height_se, where, "fig3 type1 H") && ok;
  ok = nonincreasing(fig3.type2_height, fig3.type2_height_se, where, "fig3 type2 H") && ok;

  const std::vector<int> nd{3, 4, 5, 6}, np{3, 4, 5, 6};
  const auto fig9 = data_efficiency_sweep_m2(s.reference, s.in_control, s.out_of_control, nd, np,
                                             alpha, 200, derive_seed(kSeed, {108}));
  for (Eigen::Index j = 0; j < fig9.type1.cols(); ++j) {
    std::vector<double> v, e;
    for (Eigen::Index i = 0; i < fig9.type1.rows(); ++i) {
      v.push_back(fig9.type1(i, j));
      e.push_back(fig9.type1_se(i, j));
    }
    ok = nonincreasing(v, e, where, fmt("fig9 type1 np=%d", np[static_cast<std::size_t>(j)])) && ok;
  }
  for (Eigen::Index i = 0; i < fig9.type2.rows(); ++i) {
    std::vector<double> v, e;
    for (Eigen::Index j = 0; j < fig9.type2.cols(); ++j) {
      v.push_back(fig9.type2(i, j));
      e.push_back(fig9.type2_se(i, j));
    }
    ok = nonincreasing(v, e, where, fmt("fig9 type2 nd=%d", nd[static_cast<std::size_t>(i)])) && ok;
  }
  return {ok, fmt("type I %.3f -> %.3f (R, n=3 -> 20), type II %.3f -> %.3f; %s",
                  fig3.type1_radius.front(), fig3.type1_radius.back(), fig3.type2_radius.front(),
                  fig3.type2_radius.back(), where.empty() ? "all steps within 3 SE" : where.c_str())};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TPLMON_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Result determinism() {
  const fs::path root = fs::temp_directory_path() / "tplmon_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  // Reduced Monte Carlo sizes keep the rerun cheap; the code paths are the full ones.
  {
    std::ofstream cfg(root / "config.json");
    cfg << R"({"repetitions": 20, "calibration_trials": 500, "unknown_group_repetitions": 1,
               "bootstrap_iterations": 20, "evaluation_samples_per_group": 10})";
  }
  const std::string config = "--config " + (root / "config.json").string();
  const auto run_all = [&](const fs::path& out) {
    const auto data = out / "sim";
    int rc = run_cli("simulate " + config + " --out " + data.string());
    const std::string ref = (data / "status1.csv").string();
    const std::string query = (data / "status2.csv").string();
    rc |= run_cli("fit " + config + " --reference " + ref + " --out " + (out / "fit").string());
    for (const char* m : {"m1", "m2-z", "m2-t2", "m3-same", "m3-unknown"}) {
      rc |= run_cli("monitor " + config + " --method " + m + " --reference " + ref + " --query " +
                    query + " --out " + (out / m).string());
    }
    rc |= run_cli("evaluate " + config + " --out " + (out / "evaluate").string());
    rc |= run_cli("report " + config + " --out " + (out / "report").string());
    return rc;
  };
  if (run_all(root / "a") != 0 || run_all(root / "b") != 0) return {false, "a command failed"};
  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), root / "a");
    if (slurp(entry.path()) != slurp(root / "b" / rel)) {
      return {false, "differs: " + rel.string()};
    }
    ++files;
  }
  return {files > 0, fmt("%d output files byte-identical across two runs", files)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Result()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "statistic exactness", 10, statistic_exactness},
      {2, "distribution-function accuracy", 30, distribution_accuracy},
      {3, "null calibration", 120, null_calibration_check},
      {4, "model-fit recovery", 60, fit_recovery},
      {5, "method 1 paper-regime analog", 60, method1_regime},
      {6, "method 2 paper-regime analog", 300, method2_regime},
      {7, "method 3 same-group analog", 600, method3_same},
      {8, "method 3 unknown-group analog", 900, method3_unknown},
      {9, "sweep shapes", 600, sweep_shapes},
      {10, "determinism", 1e9, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = r.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): "
              << r.detail << (in_time ? "" : " [over time budget]") << fmt(" [%.1f s]", secs)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
