#pragma once

// Synthetic process twin: two machine statuses whose structure dimensions
// follow the R/H models with coefficients linear in the design dimension,
// plus correlated Gaussian measurement noise.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tplmon/dataset.hpp"
#include "tplmon/dimension_model.hpp"

namespace tplmon {

struct LinearTrend {
  double intercept = 0.0;
  double slope = 0.0;
  double at(double d) const noexcept { return intercept + slope * d; }
};

struct StatusProfile {
  /// a_R, b_R, c_R, a_H, b_H, c_H as functions of D.
  std::array<LinearTrend, 6> coefficients{};
  double radius_sd = 0.0;
  double height_sd = 0.0;
  double correlation = 0.0;

  Eigen::Matrix<double, 6, 1> at(const DesignSpec& d) const;
  RadiusModelParams radius_at(const DesignSpec& d) const;
  HeightModelParams height_at(const DesignSpec& d) const;
  /// Noise-free (R, H) of a cell.
  MeanVector2 mean(const DesignSpec& d, const ProcessParams& p) const;
  Eigen::Matrix2d noise_covariance() const;
};

/// Additive change of every coefficient trend between statuses.
struct OffsetSpec {
  Eigen::Matrix<double, 6, 1> intercept = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> slope = Eigen::Matrix<double, 6, 1>::Zero();
};

/// Throws DomainError naming the first cell where the profile leaves the
/// model domain, ArgumentError for invalid noise settings. A zero SD is
/// accepted so that noise-free oracle data can be generated.
void check_profile(const StatusProfile& profile, std::span<const DesignSpec> designs,
                   std::span<const ProcessParams> groups);

/// n_per_cell records per (design, group). Record i of cell c draws its noise
/// from the stream derive_seed(seed, {c, i}), c counting designs-major.
DatasetGrid generate_grid(const StatusProfile& profile, std::span<const DesignSpec> designs,
                          std::span<const ProcessParams> groups, int n_per_cell,
                          std::uint64_t seed, std::optional<std::string> status_label = {});

/// (base, base + offset); both checked on the given grid.
std::pair<StatusProfile, StatusProfile> make_status_pair(const StatusProfile& base,
                                                         const OffsetSpec& offset,
                                                         std::span<const DesignSpec> designs,
                                                         std::span<const ProcessParams> groups);

/// D = 1.6 ... 2.6 µm in 0.2 µm steps.
std::vector<DesignSpec> paper_designs();
/// P1 ... P6.
std::vector<ProcessParams> paper_parameter_groups();

/// Calibrated status-1 profile and status-2 offset of the default preset.
StatusProfile paper_like_profile();
OffsetSpec paper_like_offset();
/// Status-2 offset that moves the a and c coefficients of both models, for
/// monitoring in coefficient space.
OffsetSpec parameter_shift_offset();

nlohmann::ordered_json to_json(const StatusProfile& profile);
StatusProfile profile_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const OffsetSpec& offset);
OffsetSpec offset_from_json(const nlohmann::json& j);

}  // namespace tplmon
