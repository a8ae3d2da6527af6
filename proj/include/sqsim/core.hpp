#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace sqsim {

using cplx = std::complex<double>;

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

/// Speed of light in nm/ps; with wavelengths in nm this gives angular
/// frequencies in rad/ps.
inline constexpr double kSpeedOfLight = 299792.458;

/// Quadrature variance of the vacuum ([x, p] = i convention).
inline constexpr double kVacuumVariance = 0.5;

enum class Errc {
  invalid_grid,
  invalid_argument,
  no_bracket,
  under_resolved,
  empty_overlap,
  dimension_mismatch,
  non_positive_variance,
  insufficient_extrema,
  out_of_range,
  degenerate_fit,
  assumption_violated,
  unknown_preset,
  config,
  io,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_grid: return "invalid-grid";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::no_bracket: return "no-bracket";
    case Errc::under_resolved: return "under-resolved";
    case Errc::empty_overlap: return "empty-overlap";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::non_positive_variance: return "non-positive-variance";
    case Errc::insufficient_extrema: return "insufficient-extrema";
    case Errc::out_of_range: return "out-of-range";
    case Errc::degenerate_fit: return "degenerate-fit";
    case Errc::assumption_violated: return "assumption-violated";
    case Errc::unknown_preset: return "unknown-preset";
    case Errc::config: return "config";
    case Errc::io: return "io";
  }
  return "unknown";
}

/// All library failures are reported through this exception; `code()` says
/// which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

namespace detail {

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

}  // namespace detail

}  // namespace sqsim
