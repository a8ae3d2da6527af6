#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sqsim/core.hpp"

namespace sqsim {

/// Uniform wavelength grid (nm). Angular frequencies (rad/ps) are derived
/// per sample; quadrature uses trapezoid weights in nm.
class FrequencyGrid {
 public:
  FrequencyGrid(std::vector<double> points_nm, std::optional<double> center_nm = std::nullopt)
      : points_(std::move(points_nm)) {
    detail::require(points_.size() >= 2, Errc::invalid_grid, "grid needs at least 2 points");
    resolution_ = (points_.back() - points_.front()) / static_cast<double>(points_.size() - 1);
    detail::require(resolution_ > 0.0, Errc::invalid_grid, "grid points must be strictly increasing");
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const double d = points_[i] - points_[i - 1];
      detail::require(d > 0.0, Errc::invalid_grid, "grid points must be strictly increasing");
      // uniform to 1 part in 1e9, plus rounding of the stored abscissae
      const double slack = 1e-9 * resolution_ + 8.0 * eps * std::abs(points_[i]);
      detail::require(std::abs(d - resolution_) <= slack, Errc::invalid_grid,
                      "grid spacing is not uniform");
    }
    center_ = center_nm.value_or(0.5 * (points_.front() + points_.back()));
    detail::require(center_ >= points_.front() && center_ <= points_.back(), Errc::invalid_grid,
                    "grid center lies outside the grid");
  }

  static FrequencyGrid uniform(double lo_nm, double hi_nm, std::size_t samples,
                               std::optional<double> center_nm = std::nullopt) {
    detail::require(samples >= 2, Errc::invalid_grid, "grid needs at least 2 points");
    detail::require(hi_nm > lo_nm, Errc::invalid_grid, "grid upper bound must exceed lower bound");
    std::vector<double> pts(samples);
    const double step = (hi_nm - lo_nm) / static_cast<double>(samples - 1);
    for (std::size_t i = 0; i < samples; ++i) pts[i] = lo_nm + step * static_cast<double>(i);
    pts.back() = hi_nm;
    return FrequencyGrid(std::move(pts), center_nm);
  }

  [[nodiscard]] const std::vector<double>& points() const noexcept { return points_; }
  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] double center() const noexcept { return center_; }
  [[nodiscard]] double resolution() const noexcept { return resolution_; }
  [[nodiscard]] double lo() const noexcept { return points_.front(); }
  [[nodiscard]] double hi() const noexcept { return points_.back(); }
  [[nodiscard]] double operator[](std::size_t i) const { return points_[i]; }

  [[nodiscard]] bool contains(double nm) const noexcept { return nm >= lo() && nm <= hi(); }

  /// Trapezoid weights (nm).
  [[nodiscard]] VectorXd weights() const {
    VectorXd w = VectorXd::Constant(static_cast<Eigen::Index>(size()), resolution_);
    w[0] *= 0.5;
    w[w.size() - 1] *= 0.5;
    return w;
  }

  /// Angular frequency of each sample in rad/ps.
  [[nodiscard]] VectorXd omega() const {
    VectorXd w(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i)
      w[static_cast<Eigen::Index>(i)] = 2.0 * kPi * kSpeedOfLight / points_[i];
    return w;
  }

  friend bool operator==(const FrequencyGrid& a, const FrequencyGrid& b) {
    return a.points_ == b.points_ && a.center_ == b.center_;
  }

 private:
  std::vector<double> points_;
  double center_ = 0.0;
  double resolution_ = 0.0;
};

using GridPtr = std::shared_ptr<const FrequencyGrid>;

inline GridPtr make_grid(FrequencyGrid grid) {
  return std::make_shared<const FrequencyGrid>(std::move(grid));
}

inline bool same_grid(const GridPtr& a, const GridPtr& b) {
  return a == b || (a && b && *a == *b);
}

inline double wavelength_to_omega(double nm) { return 2.0 * kPi * kSpeedOfLight / nm; }
inline double omega_to_wavelength(double rad_per_ps) { return 2.0 * kPi * kSpeedOfLight / rad_per_ps; }

}  // namespace sqsim
