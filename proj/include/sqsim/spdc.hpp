#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SVD>
#include <boost/math/tools/roots.hpp>

#include "sqsim/core.hpp"
#include "sqsim/grid.hpp"
#include "sqsim/modes.hpp"

namespace sqsim {

enum class PumpShape { gaussian, sech2, tabulated };

/// Second-harmonic pump spectrum. `bandwidth_nm` is the intensity FWHM.
class PumpEnvelope {
 public:
  PumpEnvelope(double center_nm, double bandwidth_nm, PumpShape shape = PumpShape::gaussian)
      : center_(center_nm), bandwidth_(bandwidth_nm), shape_(shape) {
    detail::require(center_nm > 0.0, Errc::invalid_argument, "pump center must be positive");
    detail::require(bandwidth_nm > 0.0, Errc::invalid_argument, "pump bandwidth must be positive");
    detail::require(shape != PumpShape::tabulated, Errc::invalid_argument,
                    "tabulated pumps are built with PumpEnvelope::tabulated");
  }

  /// Amplitude samples (nm, amplitude), linearly interpolated in wavelength
  /// and zero outside the table.
  static PumpEnvelope tabulated(std::vector<double> nm, std::vector<double> amplitude) {
    detail::require(nm.size() >= 2 && nm.size() == amplitude.size(), Errc::invalid_argument,
                    "tabulated pump needs >= 2 (nm, amplitude) pairs");
    detail::require(std::is_sorted(nm.begin(), nm.end()) &&
                        std::adjacent_find(nm.begin(), nm.end()) == nm.end(),
                    Errc::invalid_argument, "tabulated pump wavelengths must increase");
    const auto peak = std::max_element(amplitude.begin(), amplitude.end(),
                                       [](double a, double b) { return std::abs(a) < std::abs(b); });
    PumpEnvelope p;
    p.center_ = nm[static_cast<std::size_t>(peak - amplitude.begin())];
    p.bandwidth_ = nm.back() - nm.front();
    p.shape_ = PumpShape::tabulated;
    p.table_nm_ = std::move(nm);
    p.table_amp_ = std::move(amplitude);
    return p;
  }

  [[nodiscard]] double center_nm() const noexcept { return center_; }
  [[nodiscard]] double bandwidth_nm() const noexcept { return bandwidth_; }
  [[nodiscard]] PumpShape shape() const noexcept { return shape_; }

  /// Amplitude at angular frequency `omega` (rad/ps); peak value 1 for the
  /// analytic shapes.
  [[nodiscard]] double amplitude(double omega) const {
    const double wp = wavelength_to_omega(center_);
    const double dw = 2.0 * kPi * kSpeedOfLight * bandwidth_ / (center_ * center_);
    const double d = omega - wp;
    switch (shape_) {
      case PumpShape::gaussian: {
        const double sigma = dw / (2.0 * std::sqrt(2.0 * std::log(2.0)));
        return std::exp(-d * d / (4.0 * sigma * sigma));
      }
      case PumpShape::sech2: {
        // |alpha|^2 = sech^2(d / t) has FWHM 2 t acosh(sqrt 2)
        const double t = dw / (2.0 * std::acosh(std::sqrt(2.0)));
        return 1.0 / std::cosh(d / t);
      }
      case PumpShape::tabulated: {
        const double nm = omega_to_wavelength(omega);
        if (nm < table_nm_.front() || nm > table_nm_.back()) return 0.0;
        const auto it = std::upper_bound(table_nm_.begin(), table_nm_.end(), nm);
        const std::size_t j = it == table_nm_.end() ? table_nm_.size() - 1 : static_cast<std::size_t>(it - table_nm_.begin());
        const std::size_t i = j - 1;
        const double f = (nm - table_nm_[i]) / (table_nm_[j] - table_nm_[i]);
        return (1.0 - f) * table_amp_[i] + f * table_amp_[j];
      }
    }
    return 0.0;
  }

  [[nodiscard]] const std::vector<double>& table_nm() const noexcept { return table_nm_; }
  [[nodiscard]] const std::vector<double>& table_amplitude() const noexcept { return table_amp_; }

 private:
  PumpEnvelope() = default;

  double center_ = 0.0;
  double bandwidth_ = 0.0;
  PumpShape shape_ = PumpShape::gaussian;
  std::vector<double> table_nm_;
  std::vector<double> table_amp_;
};

/// Polynomial phase mismatch about degeneracy (mm^-1, frequencies in rad/ps
/// measured from half the pump frequency):
/// dk = c00 + c10 Ws + c01 Wi + c20 Ws^2 + c02 Wi^2 + c11 Ws Wi.
struct MismatchCoefficients {
  double c00 = 0.0;
  double c10 = 0.0;
  double c01 = 0.0;
  double c20 = 0.0;
  double c02 = 0.0;
  double c11 = 0.0;

  [[nodiscard]] double operator()(double ws, double wi) const noexcept {
    return c00 + c10 * ws + c01 * wi + c20 * ws * ws + c02 * wi * wi + c11 * ws * wi;
  }
  friend bool operator==(const MismatchCoefficients&, const MismatchCoefficients&) = default;
};

enum class PhaseMatchKind { sinc_polynomial, tabulated };

class PhaseMatchModel {
 public:
  PhaseMatchModel(double length_mm, MismatchCoefficients coeffs)
      : kind_(PhaseMatchKind::sinc_polynomial), length_(length_mm), coeffs_(coeffs) {
    detail::require(length_mm > 0.0, Errc::invalid_argument, "waveguide length must be positive");
  }

  /// Phase-matching values sampled on the (signal, idler) grid pair.
  static PhaseMatchModel tabulated(MatrixXcd values) {
    detail::require(values.size() > 0, Errc::invalid_argument, "empty phase-matching table");
    PhaseMatchModel m(1.0, {});
    m.kind_ = PhaseMatchKind::tabulated;
    m.table_ = std::move(values);
    return m;
  }

  [[nodiscard]] PhaseMatchKind kind() const noexcept { return kind_; }
  [[nodiscard]] double length_mm() const noexcept { return length_; }
  [[nodiscard]] const MismatchCoefficients& coefficients() const noexcept { return coeffs_; }
  [[nodiscard]] const MatrixXcd& table() const noexcept { return table_; }

  [[nodiscard]] PhaseMatchModel with_coefficients(MismatchCoefficients c) const {
    PhaseMatchModel m = *this;
    m.coeffs_ = c;
    return m;
  }

  /// sinc(dk L / 2) with detunings in rad/ps.
  [[nodiscard]] double sinc_value(double ws, double wi) const noexcept {
    const double x = 0.5 * coeffs_(ws, wi) * length_;
    return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  }

 private:
  PhaseMatchKind kind_;
  double length_;
  MismatchCoefficients coeffs_;
  MatrixXcd table_;
};

/// Joint spectral amplitude on a (signal, idler) grid pair, normalized so
/// that sum_ij ws_i wi_j |J_ij|^2 = 1.
class JSAGrid {
 public:
  JSAGrid(GridPtr grid_s, GridPtr grid_i, MatrixXcd values)
      : gs_(std::move(grid_s)), gi_(std::move(grid_i)), values_(std::move(values)) {
    detail::require(gs_ && gi_, Errc::invalid_grid, "JSA without grids");
    detail::require(static_cast<std::size_t>(values_.rows()) == gs_->size() &&
                        static_cast<std::size_t>(values_.cols()) == gi_->size(),
                    Errc::dimension_mismatch, "JSA values do not match grid sizes");
    const double n = weighted_norm();
    detail::require(n > 0.0 && std::isfinite(n), Errc::empty_overlap, "JSA is identically zero");
    values_ /= n;
  }

  [[nodiscard]] const GridPtr& grid_s() const noexcept { return gs_; }
  [[nodiscard]] const GridPtr& grid_i() const noexcept { return gi_; }
  [[nodiscard]] const MatrixXcd& values() const noexcept { return values_; }

  [[nodiscard]] double weighted_norm() const {
    const VectorXd ws = gs_->weights();
    const VectorXd wi = gi_->weights();
    return std::sqrt((ws.asDiagonal() * values_.cwiseAbs2() * wi.asDiagonal()).sum());
  }

 private:
  GridPtr gs_;
  GridPtr gi_;
  MatrixXcd values_;
};

struct JointSample {
  double nm_s;
  double nm_i;
  double omega_s;  // rad/ps
  double omega_i;
};

/// Fills a JSA from an arbitrary function of the sample pair (row by row, in
/// a fixed order).
inline JSAGrid tabulate_jsa(const GridPtr& grid_s, const GridPtr& grid_i,
                            const std::function<cplx(const JointSample&)>& fn) {
  const VectorXd os = grid_s->omega();
  const VectorXd oi = grid_i->omega();
  MatrixXcd v(os.size(), oi.size());
  for (Eigen::Index a = 0; a < os.size(); ++a)
    for (Eigen::Index b = 0; b < oi.size(); ++b)
      v(a, b) = fn({(*grid_s)[static_cast<std::size_t>(a)], (*grid_i)[static_cast<std::size_t>(b)], os[a], oi[b]});
  return JSAGrid(grid_s, grid_i, std::move(v));
}

/// J(ws, wi) = alpha(ws + wi) phi(ws, wi), normalized.
inline JSAGrid build_jsa(const PumpEnvelope& pump, const PhaseMatchModel& pm, const GridPtr& grid_s,
                         const GridPtr& grid_i) {
  const VectorXd os = grid_s->omega();
  const VectorXd oi = grid_i->omega();
  const double w0 = 0.5 * wavelength_to_omega(pump.center_nm());
  if (pm.kind() == PhaseMatchKind::tabulated)
    detail::require(pm.table().rows() == os.size() && pm.table().cols() == oi.size(), Errc::dimension_mismatch,
                    "tabulated phase matching does not match the grids");

  MatrixXcd v(os.size(), oi.size());
  double peak = 0.0;
  for (Eigen::Index a = 0; a < os.size(); ++a) {
    for (Eigen::Index b = 0; b < oi.size(); ++b) {
      const double alpha = pump.amplitude(os[a] + oi[b]);
      peak = std::max(peak, std::abs(alpha));
      const cplx phi = pm.kind() == PhaseMatchKind::sinc_polynomial ? cplx(pm.sinc_value(os[a] - w0, oi[b] - w0))
                                                                    : pm.table()(a, b);
      v(a, b) = alpha * phi;
    }
  }
  detail::require(peak >= 1e-6, Errc::empty_overlap,
                  "pump spectrum does not overlap the sum-frequency range of the grids");
  return JSAGrid(grid_s, grid_i, std::move(v));
}

struct SchmidtDecomposition {
  std::vector<double> coefficients;  // descending, sum of squares 1
  ModeBasis signal_modes;
  ModeBasis idler_modes;
  double schmidt_number = 0.0;
  /// Squared norm of the discarded singular values (before renormalization).
  double tail_mass = 0.0;
  /// Weighted Frobenius norm of J minus its truncated expansion.
  double reconstruction_error = 0.0;
};

inline constexpr int kDefaultMaxModes = 64;

/// Weighted SVD: J = sum_k lambda_k h_k(s) g_k(i), with h and g orthonormal
/// under the grid quadrature weights. Each signal mode's largest-magnitude
/// sample is made positive real; the idler mode absorbs the opposite phase.
inline SchmidtDecomposition schmidt_decompose(const JSAGrid& jsa, int max_modes = kDefaultMaxModes) {
  detail::require(max_modes >= 1, Errc::invalid_argument, "max_modes must be >= 1");
  const VectorXd sws = jsa.grid_s()->weights().cwiseSqrt();
  const VectorXd swi = jsa.grid_i()->weights().cwiseSqrt();
  const MatrixXcd m = sws.asDiagonal() * jsa.values() * swi.asDiagonal();

  MatrixXcd u;
  MatrixXcd v;
  VectorXd s;
  if (m.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::BDCSVD<MatrixXd> svd(m.real(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU().cast<cplx>();
    v = svd.matrixV().cast<cplx>();
    s = svd.singularValues();
  } else {
    Eigen::BDCSVD<MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    v = svd.matrixV();
    s = svd.singularValues();
  }

  Eigen::Index keep = 0;
  while (keep < s.size() && keep < max_modes && s[keep] >= 1e-8 * s[0]) ++keep;

  MatrixXcd h(m.rows(), keep);
  MatrixXcd g(m.cols(), keep);
  for (Eigen::Index k = 0; k < keep; ++k) {
    VectorXcd hk = u.col(k).cwiseQuotient(sws.cast<cplx>());
    VectorXcd gk = v.col(k).conjugate().cwiseQuotient(swi.cast<cplx>());
    Eigen::Index imax = 0;
    hk.cwiseAbs().maxCoeff(&imax);
    const cplx phase = hk[imax].imag() == 0.0 ? cplx(hk[imax].real() < 0.0 ? -1.0 : 1.0)
                                              : std::polar(1.0, std::arg(hk[imax]));
    hk /= phase;
    gk *= phase;
    hk[imax] = std::abs(hk[imax]);
    h.col(k) = hk;
    g.col(k) = gk;
  }

  SchmidtDecomposition out{
      {}, ModeBasis(jsa.grid_s(), h, "schmidt_signal", Orthogonality::orthonormal, {}, 1e-9),
      ModeBasis(jsa.grid_i(), g, "schmidt_idler", Orthogonality::orthonormal, {}, 1e-9), 0.0, 0.0, 0.0};

  MatrixXcd recon = MatrixXcd::Zero(m.rows(), m.cols());
  for (Eigen::Index k = 0; k < keep; ++k) recon += s[k] * u.col(k) * v.col(k).adjoint();
  out.reconstruction_error = (m - recon).norm();

  double kept = 0.0;
  for (Eigen::Index k = 0; k < keep; ++k) kept += s[k] * s[k];
  for (Eigen::Index k = keep; k < s.size(); ++k) out.tail_mass += s[k] * s[k];
  const double scale = 1.0 / std::sqrt(kept);
  double sum4 = 0.0;
  for (Eigen::Index k = 0; k < keep; ++k) {
    const double l = s[k] * scale;
    out.coefficients.push_back(l);
    sum4 += l * l * l * l;
  }
  out.schmidt_number = 1.0 / sum4;
  return out;
}

/// Single-beam supermodes of a degenerate (symmetric) JSA. For J = J^T the
/// idler mode is g_k = e^{i phi_k} h_k; the supermode u_k = e^{i phi_k / 2}
/// h_k then has all squeezing along one common quadrature.
inline ModeBasis supermode_basis(const SchmidtDecomposition& sd, double tol = 1e-6) {
  detail::require(same_grid(sd.signal_modes.grid(), sd.idler_modes.grid()), Errc::assumption_violated,
                  "supermodes need identical signal and idler grids");
  const VectorXd w = sd.signal_modes.grid()->weights();
  MatrixXcd u(sd.signal_modes.amplitudes().rows(), sd.signal_modes.size());
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    const cplx o = weighted_inner(w, sd.signal_modes.column(k), sd.idler_modes.column(k));
    detail::require(std::abs(std::abs(o) - 1.0) <= tol, Errc::assumption_violated,
                    "Schmidt pair " + std::to_string(k) +
                        " is not a phase copy; JSA not symmetric or coefficients degenerate");
    // real modes give o = +-1: use the exact factor so real inputs stay
    // exactly real (even) or imaginary (odd)
    const bool real_pair = sd.signal_modes.column(k).imag().cwiseAbs().maxCoeff() == 0.0 &&
                           sd.idler_modes.column(k).imag().cwiseAbs().maxCoeff() == 0.0;
    const cplx half = real_pair ? (o.real() > 0.0 ? cplx(1.0, 0.0) : cplx(0.0, 1.0)) : std::polar(1.0, 0.5 * std::arg(o));
    u.col(k) = sd.signal_modes.column(k) * half;
  }
  BasisInfo info;
  info.center_nm = sd.signal_modes.grid()->center();
  return ModeBasis(sd.signal_modes.grid(), std::move(u), "supermodes", Orthogonality::orthonormal, std::move(info),
                   1e-9);
}

/// Per-supermode squeezing parameters r_k.
class SqueezingSpectrum {
 public:
  explicit SqueezingSpectrum(std::vector<double> r, double pump_scale = 1.0)
      : r_(std::move(r)), g_(pump_scale) {
    detail::require(pump_scale >= 0.0, Errc::invalid_argument, "pump scale must be >= 0");
    for (double x : r_) detail::require(x >= 0.0 && std::isfinite(x), Errc::invalid_argument,
                                        "squeezing parameters must be finite and >= 0");
  }

  [[nodiscard]] const std::vector<double>& r() const noexcept { return r_; }
  [[nodiscard]] double pump_scale() const noexcept { return g_; }
  [[nodiscard]] std::size_t size() const noexcept { return r_.size(); }
  [[nodiscard]] double operator[](std::size_t k) const { return r_[k]; }

  /// First n entries.
  [[nodiscard]] SqueezingSpectrum head(std::size_t n) const {
    detail::require(n <= r_.size(), Errc::dimension_mismatch, "not enough squeezing parameters");
    return SqueezingSpectrum({r_.begin(), r_.begin() + static_cast<std::ptrdiff_t>(n)}, g_);
  }

 private:
  std::vector<double> r_;
  double g_;
};

inline SqueezingSpectrum squeezing_spectrum(const SchmidtDecomposition& sd, double pump_scale) {
  detail::require(pump_scale >= 0.0, Errc::invalid_argument, "pump scale must be >= 0");
  std::vector<double> r;
  r.reserve(sd.coefficients.size());
  for (double l : sd.coefficients) r.push_back(pump_scale * l);
  return SqueezingSpectrum(std::move(r), pump_scale);
}

/// Pump scale g for which supermode 0, after uniform efficiency `eta`, shows
/// `target_db` of squeezing (negative dB).
inline double pump_scale_for_squeezing(const SchmidtDecomposition& sd, double target_db, double eta) {
  detail::require(eta > 0.0 && eta <= 1.0, Errc::invalid_argument, "efficiency must lie in (0, 1]");
  detail::require(target_db < 0.0, Errc::invalid_argument, "target squeezing must be negative dB");
  const double ratio = std::pow(10.0, target_db / 10.0);
  const double e2r = (ratio - (1.0 - eta)) / eta;
  detail::require(e2r > 0.0, Errc::out_of_range, "target squeezing unreachable at this efficiency");
  return -0.5 * std::log(e2r) / sd.coefficients.front();
}

/// Gaussian (HG0) fit to the leading supermode, full 1/e amplitude width.
inline HgFit leading_mode_width(const SchmidtDecomposition& sd, double center_nm, double width_guess = 45.0) {
  return fit_hermite_gauss(sd.signal_modes.mode(0), 0, center_nm, width_guess);
}

struct MismatchFit {
  PhaseMatchModel model;
  HgFit leading;
};

/// Tunes the quadratic mismatch terms (c20 = c02 = q, q = sign * 10^x with x
/// in [log_lo, log_hi]) so the leading Schmidt mode has the requested HG0
/// width. Linear terms are kept from `pm`.
inline MismatchFit fit_quadratic_mismatch(const PumpEnvelope& pump, const PhaseMatchModel& pm, const GridPtr& grid,
                                          double target_width_nm, double sign = -1.0, double log_lo = -7.0,
                                          double log_hi = -2.0) {
  detail::require(pm.kind() == PhaseMatchKind::sinc_polynomial, Errc::invalid_argument,
                  "mismatch fit needs a polynomial model");
  const double center = 2.0 * pump.center_nm();
  const auto model_at = [&](double x) {
    MismatchCoefficients c = pm.coefficients();
    c.c20 = c.c02 = sign * std::pow(10.0, x);
    return pm.with_coefficients(c);
  };
  const auto width_at = [&](double x) {
    const auto sd = schmidt_decompose(build_jsa(pump, model_at(x), grid, grid), 1);
    return leading_mode_width(sd, center, target_width_nm).width_nm;
  };
  const double f_lo = width_at(log_lo) - target_width_nm;
  const double f_hi = width_at(log_hi) - target_width_nm;
  detail::require(f_lo * f_hi < 0.0, Errc::no_bracket, "target HG0 width not bracketed by the mismatch range");
  boost::uintmax_t iters = 100;
  const auto r = boost::math::tools::toms748_solve([&](double x) { return width_at(x) - target_width_nm; }, log_lo,
                                                   log_hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(40),
                                                   iters);
  const double x = 0.5 * (r.first + r.second);
  const auto model = model_at(x);
  const auto sd = schmidt_decompose(build_jsa(pump, model, grid, grid), 1);
  return {model, leading_mode_width(sd, center, target_width_nm)};
}

}  // namespace sqsim
