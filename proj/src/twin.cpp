#include "tplmon/twin.hpp"

#include <cmath>

#include "tplmon/errors.hpp"
#include "tplmon/rng.hpp"

namespace tplmon {

Eigen::Matrix<double, 6, 1> StatusProfile::at(const DesignSpec& d) const {
  Eigen::Matrix<double, 6, 1> v;
  for (int k = 0; k < 6; ++k) v(k) = coefficients[static_cast<std::size_t>(k)].at(d.design_dimension);
  return v;
}

RadiusModelParams StatusProfile::radius_at(const DesignSpec& d) const {
  const auto v = at(d);
  return {v(0), v(1), v(2)};
}

HeightModelParams StatusProfile::height_at(const DesignSpec& d) const {
  const auto v = at(d);
  return {v(3), v(4), v(5)};
}

MeanVector2 StatusProfile::mean(const DesignSpec& d, const ProcessParams& p) const {
  try {
    return {predict_radius(radius_at(d), p), predict_height(height_at(d), p)};
  } catch (const DomainError& e) {
    throw DomainError("profile infeasible at D=" + format_double(d.design_dimension) + ": " +
                      e.what());
  }
}

Eigen::Matrix2d StatusProfile::noise_covariance() const {
  Eigen::Matrix2d cov;
  const double off = correlation * radius_sd * height_sd;
  cov << radius_sd * radius_sd, off, off, height_sd * height_sd;
  return cov;
}

void check_profile(const StatusProfile& profile, std::span<const DesignSpec> designs,
                   std::span<const ProcessParams> groups) {
  if (!(profile.radius_sd >= 0.0) || !(profile.height_sd >= 0.0)) {
    throw ArgumentError("noise SDs must be non-negative");
  }
  if (!(profile.correlation > -1.0 && profile.correlation < 1.0)) {
    throw ArgumentError("noise correlation must lie in (-1, 1)");
  }
  for (const auto& d : designs) {
    validate(d);
    for (const auto& p : groups) {
      validate(p);
      const MeanVector2 m = profile.mean(d, p);
      if (!(m(0) > 0.0) || !(m(1) > 0.0)) {
        throw DomainError("profile gives non-positive mean dimensions at " +
                          to_string(CellKey{d, p}));
      }
    }
  }
}

DatasetGrid generate_grid(const StatusProfile& profile, std::span<const DesignSpec> designs,
                          std::span<const ProcessParams> groups, int n_per_cell,
                          std::uint64_t seed, std::optional<std::string> status_label) {
  if (n_per_cell < 1) throw ArgumentError("n_per_cell must be at least 1");
  check_profile(profile, designs, groups);
  const double rho = profile.correlation;
  const double rho_c = std::sqrt(1.0 - rho * rho);

  std::vector<MeasurementRecord> records;
  records.reserve(designs.size() * groups.size() * static_cast<std::size_t>(n_per_cell));
  std::uint64_t cell_index = 0;
  for (const auto& d : designs) {
    for (const auto& p : groups) {
      const MeanVector2 m = profile.mean(d, p);
      for (int i = 0; i < n_per_cell; ++i) {
        SplitMix64 rng(derive_seed(seed, {cell_index, static_cast<std::uint64_t>(i)}));
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        MeasurementRecord r;
        r.design = d;
        r.params = p;
        r.radius = m(0) + profile.radius_sd * z1;
        r.height = m(1) + profile.height_sd * (rho * z1 + rho_c * z2);
        r.status_label = status_label;
        if (!(r.radius > 0.0) || !(r.height > 0.0)) {
          throw DomainError("noise produced a non-positive dimension at " +
                            to_string(CellKey{d, p}));
        }
        records.push_back(std::move(r));
      }
      ++cell_index;
    }
  }
  return DatasetGrid::from_records(std::move(records));
}

std::pair<StatusProfile, StatusProfile> make_status_pair(const StatusProfile& base,
                                                         const OffsetSpec& offset,
                                                         std::span<const DesignSpec> designs,
                                                         std::span<const ProcessParams> groups) {
  StatusProfile shifted = base;
  for (int k = 0; k < 6; ++k) {
    auto& t = shifted.coefficients[static_cast<std::size_t>(k)];
    t.intercept += offset.intercept(k);
    t.slope += offset.slope(k);
  }
  check_profile(base, designs, groups);
  check_profile(shifted, designs, groups);
  return {base, shifted};
}

std::vector<DesignSpec> paper_designs() {
  std::vector<DesignSpec> out;
  for (int k = 0; k < 6; ++k) out.push_back({(16 + 2 * k) / 10.0});
  return out;
}

std::vector<ProcessParams> paper_parameter_groups() {
  return {{50, 40}, {50, 60}, {55, 60}, {50, 55}, {50, 50}, {50, 45}};
}

StatusProfile paper_like_profile() {
  // b is the same for every design and sits just above the feasibility
  // bound 1 / min dose (P2: 50^2 / 60).
  const double d_min = 50.0 * 50.0 / 60.0;
  StatusProfile p;
  p.coefficients = {LinearTrend{1.0, 0.1}, LinearTrend{1.08 / d_min, 0.0},
                    LinearTrend{-0.5, 1.0}, LinearTrend{1.0, 0.1},
                    LinearTrend{1.3 / d_min, 0.0}, LinearTrend{0.3, 0.35}};
  p.radius_sd = 0.001;
  p.height_sd = 0.001;
  p.correlation = 0.94;
  return p;
}

OffsetSpec paper_like_offset() {
  // 1.5 noise SDs on the c intercepts of both models.
  OffsetSpec o;
  o.intercept << 0.0, 0.0, 0.0015, 0.0, 0.0, 0.0015;
  return o;
}

OffsetSpec parameter_shift_offset() {
  OffsetSpec o;
  o.intercept << 0.2, 0.0, 0.05, 0.2, 0.0, 0.05;
  return o;
}

nlohmann::ordered_json to_json(const StatusProfile& profile) {
  nlohmann::ordered_json coefs = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < 6; ++k) {
    coefs[std::string(kCoefficientNames[k])] = {{"intercept", profile.coefficients[k].intercept},
                                                {"slope", profile.coefficients[k].slope}};
  }
  return {{"coefficients", std::move(coefs)},
          {"radius_sd", profile.radius_sd},
          {"height_sd", profile.height_sd},
          {"correlation", profile.correlation}};
}

StatusProfile profile_from_json(const nlohmann::json& j) {
  StatusProfile p;
  try {
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& c = j.at("coefficients").at(std::string(kCoefficientNames[k]));
      p.coefficients[k] = {c.at("intercept").get<double>(), c.at("slope").get<double>()};
    }
    p.radius_sd = j.at("radius_sd").get<double>();
    p.height_sd = j.at("height_sd").get<double>();
    p.correlation = j.at("correlation").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed status profile: ") + e.what());
  }
  return p;
}

nlohmann::ordered_json to_json(const OffsetSpec& offset) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (int k = 0; k < 6; ++k) {
    out[std::string(kCoefficientNames[static_cast<std::size_t>(k)])] = {
        {"intercept", offset.intercept(k)}, {"slope", offset.slope(k)}};
  }
  return out;
}

OffsetSpec offset_from_json(const nlohmann::json& j) {
  OffsetSpec o;
  try {
    for (int k = 0; k < 6; ++k) {
      const auto name = std::string(kCoefficientNames[static_cast<std::size_t>(k)]);
      if (!j.contains(name)) continue;
      const auto& c = j.at(name);
      o.intercept(k) = c.value("intercept", 0.0);
      o.slope(k) = c.value("slope", 0.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed offset specification: ") + e.what());
  }
  return o;
}

}  // namespace tplmon
