#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "sqsim/core.hpp"
#include "sqsim/grid.hpp"

namespace sqsim {

inline constexpr double kDefaultOrthTol = 1e-10;

/// Discrete L2 inner product <a, b> = sum_i w_i conj(a_i) b_i.
inline cplx weighted_inner(const VectorXd& w, const VectorXcd& a, const VectorXcd& b) {
  return (a.conjugate().array() * b.array() * w.array()).sum();
}

inline double weighted_norm(const VectorXd& w, const VectorXcd& a) {
  return std::sqrt((a.array().abs2() * w.array()).sum());
}

/// Normalized complex amplitude on a wavelength grid.
class SpectralMode {
 public:
  SpectralMode(GridPtr grid, VectorXcd amplitude) : grid_(std::move(grid)), amp_(std::move(amplitude)) {
    detail::require(grid_ != nullptr, Errc::invalid_grid, "mode without grid");
    detail::require(static_cast<std::size_t>(amp_.size()) == grid_->size(), Errc::dimension_mismatch,
                    "mode amplitude length differs from grid length");
    const double n = weighted_norm(grid_->weights(), amp_);
    detail::require(std::abs(n - 1.0) <= 1e-12, Errc::invalid_argument,
                    "spectral mode is not L2-normalized");
  }

  /// Scales `amplitude` to unit norm; throws if it is identically zero.
  static SpectralMode normalized(GridPtr grid, VectorXcd amplitude) {
    const double n = weighted_norm(grid->weights(), amplitude);
    detail::require(n > 0.0, Errc::invalid_argument, "cannot normalize an all-zero mode");
    amplitude /= n;
    return SpectralMode(std::move(grid), std::move(amplitude));
  }

  [[nodiscard]] const GridPtr& grid() const noexcept { return grid_; }
  [[nodiscard]] const VectorXcd& amplitude() const noexcept { return amp_; }

 private:
  GridPtr grid_;
  VectorXcd amp_;
};

inline cplx inner_product(const SpectralMode& a, const SpectralMode& b) {
  detail::require(same_grid(a.grid(), b.grid()), Errc::dimension_mismatch, "modes on different grids");
  return weighted_inner(a.grid()->weights(), a.amplitude(), b.amplitude());
}

enum class Orthogonality { orthonormal, non_orthogonal };

/// Provenance carried alongside a basis.
struct BasisInfo {
  std::optional<double> center_nm;
  bool edge_warning = false;
  bool normalized = true;
  /// Indices (into the parent basis) dropped by clipping.
  std::vector<std::size_t> dropped;
  /// Fraction of L2 norm kept by clipping, one entry per parent mode.
  std::vector<double> retained_norm;
  /// Convention constants carried into exported headers.
  std::map<std::string, double> params;
};


/// Ordered set of modes on a shared grid. Column k of `amplitudes()` is mode k.
class ModeBasis {
 public:
  using Info = BasisInfo;

  ModeBasis(GridPtr grid, MatrixXcd amplitudes, std::string label, Orthogonality orth, Info info = {},
            double tol_orth = kDefaultOrthTol)
      : grid_(std::move(grid)),
        amps_(std::move(amplitudes)),
        label_(std::move(label)),
        orth_(orth),
        info_(std::move(info)) {
    detail::require(grid_ != nullptr, Errc::invalid_grid, "basis without grid");
    detail::require(static_cast<std::size_t>(amps_.rows()) == grid_->size(), Errc::dimension_mismatch,
                    "basis amplitude rows differ from grid length");
    if (orth_ == Orthogonality::orthonormal && amps_.cols() > 0) {
      const MatrixXcd g = gram();
      const double dev = (g - MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
      detail::require(dev <= tol_orth, Errc::invalid_argument,
                      "basis '" + label_ + "' flagged orthonormal but Gram deviates by " + std::to_string(dev));
    }
  }

  [[nodiscard]] const GridPtr& grid() const noexcept { return grid_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return amps_.cols(); }
  [[nodiscard]] bool empty() const noexcept { return amps_.cols() == 0; }
  [[nodiscard]] const MatrixXcd& amplitudes() const noexcept { return amps_; }
  [[nodiscard]] VectorXcd column(Eigen::Index k) const { return amps_.col(k); }
  [[nodiscard]] SpectralMode mode(Eigen::Index k) const { return SpectralMode(grid_, amps_.col(k)); }
  [[nodiscard]] const std::string& label() const noexcept { return label_; }
  [[nodiscard]] bool orthonormal() const noexcept { return orth_ == Orthogonality::orthonormal; }
  [[nodiscard]] Orthogonality orthogonality() const noexcept { return orth_; }
  [[nodiscard]] const Info& info() const noexcept { return info_; }
  [[nodiscard]] double center() const noexcept { return info_.center_nm.value_or(grid_->center()); }

  [[nodiscard]] MatrixXcd gram() const {
    const VectorXd w = grid_->weights();
    return amps_.adjoint() * w.asDiagonal() * amps_;
  }

  /// Coefficients <m_k, f> of `f` on each mode.
  [[nodiscard]] VectorXcd project(const SpectralMode& f) const {
    detail::require(same_grid(grid_, f.grid()), Errc::dimension_mismatch, "projection across grids");
    const VectorXd w = grid_->weights();
    return amps_.adjoint() * (w.asDiagonal() * f.amplitude());
  }

 private:
  GridPtr grid_;
  MatrixXcd amps_;
  std::string label_;
  Orthogonality orth_;
  Info info_;
};

/// C(j, k) = <out_j, in_k>: row j expresses output mode j in the input basis.
inline MatrixXcd overlap_matrix(const ModeBasis& out, const ModeBasis& in) {
  detail::require(same_grid(out.grid(), in.grid()), Errc::dimension_mismatch, "bases on different grids");
  const VectorXd w = in.grid()->weights();
  return out.amplitudes().adjoint() * w.asDiagonal() * in.amplitudes();
}

// ---------------------------------------------------------------------------
// Hermite-Gauss

/// How a quoted HG0 width maps onto the Gaussian amplitude exp(-(x/a)^2).
enum class HgWidthConvention {
  full_width_1e_amplitude,  // width = 2a
  fwhm_amplitude,           // width = 2a sqrt(ln 2)
  fwhm_intensity,           // width = a sqrt(2 ln 2)
};

inline double hg_half_width_1e(double width, HgWidthConvention conv) {
  switch (conv) {
    case HgWidthConvention::full_width_1e_amplitude: return 0.5 * width;
    case HgWidthConvention::fwhm_amplitude: return 0.5 * width / std::sqrt(std::log(2.0));
    case HgWidthConvention::fwhm_intensity: return width / std::sqrt(2.0 * std::log(2.0));
  }
  return 0.5 * width;
}

namespace detail {

/// Hermite functions psi_0..psi_{count-1} at the scaled abscissae t, via the
/// normalized three-term recurrence (no overflow for large orders).
inline MatrixXd hermite_functions(const VectorXd& t, int count) {
  MatrixXd out(t.size(), count);
  const double c0 = std::pow(kPi, -0.25);
  out.col(0) = c0 * (-0.5 * t.array().square()).exp();
  if (count > 1) out.col(1) = std::sqrt(2.0) * t.array() * out.col(0).array();
  for (int k = 1; k + 1 < count; ++k) {
    const double a = std::sqrt(2.0 / (k + 1.0));
    const double b = std::sqrt(static_cast<double>(k) / (k + 1.0));
    out.col(k + 1) = a * t.array() * out.col(k).array() - b * out.col(k - 1).array();
  }
  return out;
}

inline VectorXd scaled_abscissae(const FrequencyGrid& grid, double center, double half_width_1e) {
  VectorXd t(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i)
    t[static_cast<Eigen::Index>(i)] = std::sqrt(2.0) * (grid[i] - center) / half_width_1e;
  return t;
}

}  // namespace detail

/// HG_order with 1/e amplitude half-width `half_width_1e`, normalized on the grid.
inline VectorXd hermite_gauss_function(const FrequencyGrid& grid, double center, double half_width_1e,
                                       int order) {
  const VectorXd t = detail::scaled_abscissae(grid, center, half_width_1e);
  VectorXd f = detail::hermite_functions(t, order + 1).col(order);
  const VectorXd w = grid.weights();
  const double n = std::sqrt((f.array().square() * w.array()).sum());
  detail::require(n > 0.0, Errc::under_resolved, "Hermite-Gauss function vanishes on the grid");
  return f / n;
}

inline ModeBasis hermite_gauss_basis(const GridPtr& grid, double center_nm, double width_hg0_nm, int count,
                                     HgWidthConvention conv = HgWidthConvention::full_width_1e_amplitude) {
  detail::require(grid != nullptr && grid->size() >= 2, Errc::invalid_grid, "degenerate grid");
  detail::require(width_hg0_nm > 0.0, Errc::invalid_argument, "HG0 width must be positive");
  detail::require(count >= 1, Errc::invalid_argument, "HG mode count must be >= 1");

  const double a = hg_half_width_1e(width_hg0_nm, conv);
  const VectorXd t = detail::scaled_abscissae(*grid, center_nm, a);
  MatrixXd h = detail::hermite_functions(t, count);
  const VectorXd w = grid->weights();
  for (int k = 0; k < count; ++k) {
    const double n = std::sqrt((h.col(k).array().square() * w.array()).sum());
    detail::require(n > 0.0, Errc::under_resolved, "HG mode vanishes on the grid");
    h.col(k) /= n;
  }

  ModeBasis::Info info;
  info.center_nm = center_nm;
  const auto last = h.col(count - 1);
  const double peak = last.cwiseAbs().maxCoeff();
  const double edge = std::max(std::abs(last[0]), std::abs(last[last.size() - 1]));
  info.edge_warning = edge >= 1e-6 * peak;
  info.params = {{"center_nm", center_nm},
                 {"width_hg0_nm", width_hg0_nm},
                 {"half_width_1e_nm", a},
                 {"width_convention", static_cast<double>(conv)}};

  // Truncated grids only approximately preserve orthogonality; say so
  // instead of failing.
  const MatrixXcd hc = h.cast<cplx>();
  const MatrixXd g = (h.transpose() * w.asDiagonal() * h);
  const double dev = (g - MatrixXd::Identity(count, count)).cwiseAbs().maxCoeff();
  const Orthogonality orth = dev <= kDefaultOrthTol ? Orthogonality::orthonormal : Orthogonality::non_orthogonal;
  if (orth == Orthogonality::non_orthogonal) info.edge_warning = true;
  return ModeBasis(grid, hc, "hermite_gauss", orth, std::move(info));
}

struct HgFit {
  double center_nm = 0.0;
  double width_nm = 0.0;  // full 1/e amplitude width of the fitted HG0 envelope
  double overlap = 0.0;   // |<HG, mode>|
};

/// Fits HG_order to `mode` by maximizing |overlap| over width (and center when
/// `fit_center`). Width is the full 1/e amplitude width of the HG0 envelope.
inline HgFit fit_hermite_gauss(const SpectralMode& mode, int order, double center_guess, double width_guess,
                               bool fit_center = false) {
  const FrequencyGrid& grid = *mode.grid();
  const VectorXd w = grid.weights();
  const auto overlap = [&](double c, double width) {
    const VectorXd f = hermite_gauss_function(grid, c, 0.5 * width, order);
    return std::abs(weighted_inner(w, f.cast<cplx>(), mode.amplitude()));
  };
  const int bits = std::numeric_limits<double>::digits / 2;

  const auto best_width = [&](double c) {
    // coarse log scan to bracket, then Brent
    const double lo = width_guess / 4.0;
    const double hi = width_guess * 4.0;
    constexpr int n = 48;
    int best = 0;
    double best_val = -1.0;
    std::vector<double> ws(n);
    for (int i = 0; i < n; ++i) {
      ws[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
      const double v = overlap(c, ws[i]);
      if (v > best_val) {
        best_val = v;
        best = i;
      }
    }
    const double a = ws[std::max(best - 1, 0)];
    const double b = ws[std::min(best + 1, n - 1)];
    auto r = boost::math::tools::brent_find_minima([&](double x) { return -overlap(c, x); }, a, b, bits);
    return std::pair{r.first, -r.second};
  };

  HgFit fit;
  if (!fit_center) {
    auto [wd, ov] = best_width(center_guess);
    fit = {center_guess, wd, ov};
  } else {
    // the overlap is multi-lobed in the center for order > 0: scan first
    const double span = width_guess;
    constexpr int n = 41;
    const double step = 2.0 * span / (n - 1);
    double best_c = center_guess;
    double best_val = -1.0;
    for (int i = 0; i < n; ++i) {
      const double c = center_guess - span + step * i;
      const double v = best_width(c).second;
      if (v > best_val) {
        best_val = v;
        best_c = c;
      }
    }
    auto r = boost::math::tools::brent_find_minima(
        [&](double c) { return -best_width(c).second; }, best_c - step, best_c + step, bits);
    auto [wd, ov] = best_width(r.first);
    fit = {r.first, wd, ov};
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Flat modes

namespace detail {

/// Cell-averaged piecewise-constant mode: k+1 equal segments over
/// [center - half_width, center + half_width], alternating sign with the
/// rightmost segment positive (HG_k convention).
inline VectorXd flat_profile(const FrequencyGrid& grid, double center, double half_width, int k) {
  const int segments = k + 1;
  const double seg = 2.0 * half_width / segments;
  const double h = grid.resolution();
  VectorXd f = VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double a = grid[i] - 0.5 * h - (center - half_width);
    const double b = a + h;
    if (b <= 0.0 || a >= 2.0 * half_width) continue;
    double acc = 0.0;
    for (int j = 0; j < segments; ++j) {
      const double lo = std::max(a, j * seg);
      const double hi = std::min(b, (j + 1) * seg);
      if (hi > lo) acc += ((k - j) % 2 == 0 ? 1.0 : -1.0) * (hi - lo);
    }
    f[static_cast<Eigen::Index>(i)] = acc / h;
  }
  return f;
}

inline void gram_schmidt(MatrixXcd& m, const VectorXd& w) {
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const cplx c = weighted_inner(w, m.col(j), m.col(k));
      m.col(k) -= c * m.col(j);
    }
    const double n = weighted_norm(w, m.col(k));
    detail::require(n > 1e-12, Errc::invalid_argument, "linearly dependent modes in Gram-Schmidt");
    m.col(k) /= n;
  }
}

}  // namespace detail

/// Piecewise-constant approximations of the first `count` modes of an
/// orthonormal HG basis. Each mode has one free parameter (the outer
/// half-width) chosen by minimizing the L2 distance to its HG counterpart;
/// segments are of equal width. The set is Gram-Schmidt orthonormalized.
inline ModeBasis flat_basis(const ModeBasis& hg, int count) {
  detail::require(hg.orthonormal(), Errc::invalid_argument, "flat modes need an orthonormal HG basis");
  detail::require(count >= 1 && count <= hg.size(), Errc::invalid_argument, "flat mode count out of range");

  const FrequencyGrid& grid = *hg.grid();
  const VectorXd w = grid.weights();
  const double c = hg.center();
  const double max_half = std::min(c - grid.lo(), grid.hi() - c);
  const int bits = std::numeric_limits<double>::digits / 2;

  MatrixXcd out(static_cast<Eigen::Index>(grid.size()), count);
  ModeBasis::Info info;
  info.center_nm = c;
  for (int k = 0; k < count; ++k) {
    const VectorXd target = hg.column(k).real();
    const auto distance = [&](double half_width) {
      VectorXd f = detail::flat_profile(grid, c, half_width, k);
      const double n = std::sqrt((f.array().square() * w.array()).sum());
      if (n <= 0.0) return 2.0;
      f /= n;
      return std::sqrt(((f - target).array().square() * w.array()).sum());
    };

    // Each segment at least two samples wide.
    const double min_half = (k + 1) * grid.resolution();
    detail::require(max_half > min_half, Errc::no_bracket, "grid too narrow for flat mode");
    constexpr int n = 256;
    std::vector<double> hw(n);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      hw[i] = min_half + (max_half - min_half) * i / (n - 1.0);
      const double d = distance(hw[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    detail::require(best > 0 && best < n - 1, Errc::no_bracket,
                    "flat mode " + std::to_string(k) + ": distance minimum not bracketed");
    const auto r = boost::math::tools::brent_find_minima(distance, hw[best - 1], hw[best + 1], bits);
    VectorXd f = detail::flat_profile(grid, c, r.first, k);
    out.col(k) = f.cast<cplx>();
    info.params["half_width_nm_" + std::to_string(k)] = r.first;
  }
  detail::gram_schmidt(out, w);
  return ModeBasis(hg.grid(), std::move(out), "flat", Orthogonality::orthonormal, std::move(info));
}

// ---------------------------------------------------------------------------
// Frexels

/// Equal-width top-hat bands tiling [span_lo, span_hi]. A sample belongs to
/// band j when edge_j <= x < edge_{j+1} (last band closed), so supports are
/// disjoint and inner products vanish exactly.
inline ModeBasis frexel_basis(const GridPtr& grid, double span_lo, double span_hi, int bands) {
  detail::require(bands >= 2, Errc::invalid_argument, "need at least 2 frexel bands");
  detail::require(span_lo < span_hi, Errc::invalid_argument, "frexel span is empty");
  detail::require(grid->contains(span_lo) && grid->contains(span_hi), Errc::out_of_range,
                  "frexel span outside grid");

  const double width = (span_hi - span_lo) / bands;
  const VectorXd w = grid->weights();
  MatrixXcd m = MatrixXcd::Zero(static_cast<Eigen::Index>(grid->size()), bands);
  std::vector<int> counts(static_cast<std::size_t>(bands), 0);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double x = (*grid)[i];
    if (x < span_lo || x > span_hi) continue;
    const int j = std::min(static_cast<int>(std::floor((x - span_lo) / width)), bands - 1);
    m(static_cast<Eigen::Index>(i), j) = 1.0;
    ++counts[static_cast<std::size_t>(j)];
  }
  ModeBasis::Info info;
  info.center_nm = 0.5 * (span_lo + span_hi);
  for (int j = 0; j < bands; ++j) {
    detail::require(counts[static_cast<std::size_t>(j)] >= 2, Errc::under_resolved,
                    "frexel band " + std::to_string(j) + " narrower than 2 grid samples");
    m.col(j) /= weighted_norm(w, m.col(j));
    info.params["edge_nm_" + std::to_string(j)] = span_lo + j * width;
  }
  info.params["edge_nm_" + std::to_string(bands)] = span_hi;
  info.params["band_width_nm"] = width;
  return ModeBasis(grid, std::move(m), "frexel", Orthogonality::orthonormal, std::move(info));
}

// ---------------------------------------------------------------------------
// Clipping and rank

struct ClippingWindow {
  double lo_nm;
  double hi_nm;

  ClippingWindow(double lo, double hi) : lo_nm(lo), hi_nm(hi) {
    detail::require(lo < hi, Errc::invalid_argument, "clipping window needs lo < hi");
  }
  [[nodiscard]] bool passes(double nm) const noexcept { return nm >= lo_nm && nm <= hi_nm; }
};

/// Zeroes amplitudes outside the passband. All-zero modes are dropped and
/// listed in info().dropped; the result is always flagged non-orthogonal.
inline ModeBasis apply_clipping(const ModeBasis& basis, const ClippingWindow& window, bool renormalize) {
  const FrequencyGrid& grid = *basis.grid();
  detail::require(grid.contains(window.lo_nm) && grid.contains(window.hi_nm), Errc::out_of_range,
                  "clipping window outside grid");
  const VectorXd w = grid.weights();

  ModeBasis::Info info;
  info.center_nm = basis.info().center_nm;
  info.params = basis.info().params;
  info.params["clip_lo_nm"] = window.lo_nm;
  info.params["clip_hi_nm"] = window.hi_nm;
  info.normalized = renormalize && basis.info().normalized;

  std::vector<VectorXcd> kept;
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    VectorXcd v = basis.column(k);
    const double before = weighted_norm(w, v);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!window.passes(grid[i])) v[static_cast<Eigen::Index>(i)] = 0.0;
    const double after = weighted_norm(w, v);
    info.retained_norm.push_back(before > 0.0 ? after / before : 0.0);
    if (after <= 1e-15 * before || after == 0.0) {
      info.dropped.push_back(static_cast<std::size_t>(k));
      continue;
    }
    if (renormalize) v /= after;
    kept.push_back(std::move(v));
  }
  MatrixXcd m(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = kept[k];
  return ModeBasis(basis.grid(), std::move(m), basis.label() + "_clipped", Orthogonality::non_orthogonal,
                   std::move(info));
}

struct RankReport {
  std::vector<double> singular_values;  // descending
  int rank = 0;
};

/// Singular values of the matrix whose rows are the mode amplitudes, scaled
/// by sqrt(quadrature weight) so an orthonormal basis gives all ones.
inline RankReport rank_analysis(const ModeBasis& basis, double threshold_fraction) {
  detail::require(!basis.empty(), Errc::invalid_argument, "rank analysis of an empty basis");
  detail::require(threshold_fraction >= 0.0 && threshold_fraction <= 1.0, Errc::invalid_argument,
                  "threshold fraction must lie in [0, 1]");
  const VectorXd sw = basis.grid()->weights().cwiseSqrt();
  const MatrixXcd scaled = sw.asDiagonal() * basis.amplitudes();
  Eigen::JacobiSVD<MatrixXcd> svd(scaled);
  const VectorXd s = svd.singularValues();
  RankReport r;
  r.singular_values.assign(s.data(), s.data() + s.size());
  std::sort(r.singular_values.begin(), r.singular_values.end(), std::greater<>());
  // slack absorbs rounding so an orthonormal basis keeps full rank at threshold 1
  const double cut = (threshold_fraction - 1e-9) * r.singular_values.front();
  r.rank = static_cast<int>(std::count_if(r.singular_values.begin(), r.singular_values.end(),
                                          [cut](double v) { return v >= cut; }));
  return r;
}

struct ClippingFit {
  ClippingWindow window;
  double residual = 0.0;  // sum of squared singular-value differences
  std::vector<double> singular_values;
};

/// Finds the passband whose clipped, renormalized basis best reproduces
/// `reference` singular values in the least-squares sense. Coarse grid
/// search followed by a pattern search down to the grid resolution.
inline ClippingFit fit_clipping_window(const ModeBasis& basis, std::span<const double> reference,
                                       double coarse_step_nm = 4.0) {
  const FrequencyGrid& grid = *basis.grid();
  const auto n = static_cast<Eigen::Index>(grid.size());
  const Eigen::Index m = basis.size();
  detail::require(m >= 1 && !reference.empty(), Errc::invalid_argument, "nothing to fit");
  const VectorXd w = grid.weights();

  // prefix[i] = sum_{j < i} w_j a_j a_j^H, so a window Gram is a difference.
  std::vector<MatrixXcd> prefix(static_cast<std::size_t>(n + 1), MatrixXcd::Zero(m, m));
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXcd row = basis.amplitudes().row(i).transpose();
    prefix[static_cast<std::size_t>(i + 1)] =
        prefix[static_cast<std::size_t>(i)] + w[i] * row.conjugate() * row.transpose();
  }
  const auto index_of = [&](double nm) {
    return static_cast<Eigen::Index>(std::clamp(std::round((nm - grid.lo()) / grid.resolution()), 0.0,
                                                static_cast<double>(n - 1)));
  };
  const auto spectrum = [&](Eigen::Index lo, Eigen::Index hi) {
    MatrixXcd g = prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)];
    // Clipped modes are renormalized, i.e. the Gram gets a unit diagonal.
    // Weighted sums (not renormalized) treat the trapezoid end weights
    // slightly differently from apply_clipping; the difference is O(h) at
    // the window edge and irrelevant for the fit.
    VectorXd d = g.diagonal().real();
    for (Eigen::Index k = 0; k < m; ++k) d[k] = d[k] > 1e-300 ? 1.0 / std::sqrt(d[k]) : 0.0;
    g = d.asDiagonal() * g * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(g, Eigen::EigenvaluesOnly);
    std::vector<double> s(static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < m; ++k) s[static_cast<std::size_t>(k)] = std::sqrt(std::max(es.eigenvalues()[k], 0.0));
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
  };
  const auto cost = [&](Eigen::Index lo, Eigen::Index hi) {
    if (hi <= lo + 1) return std::numeric_limits<double>::infinity();
    const auto s = spectrum(lo, hi);
    double acc = 0.0;
    for (std::size_t k = 0; k < std::min(s.size(), reference.size()); ++k) acc += std::pow(s[k] - reference[k], 2);
    return acc;
  };

  const Eigen::Index mid = index_of(basis.center());
  const Eigen::Index step0 = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(coarse_step_nm / grid.resolution()));
  Eigen::Index best_lo = 0, best_hi = n - 1;
  double best = cost(best_lo, best_hi);
  for (Eigen::Index lo = 0; lo <= mid; lo += step0)
    for (Eigen::Index hi = n - 1; hi >= mid; hi -= step0) {
      const double c = cost(lo, hi);
      if (c < best) {
        best = c;
        best_lo = lo;
        best_hi = hi;
      }
    }
  for (Eigen::Index step = step0; step >= 1; step /= 2) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (const auto& [dl, dh] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
        const Eigen::Index lo = best_lo + dl * step;
        const Eigen::Index hi = best_hi + dh * step;
        if (lo < 0 || hi >= n || lo >= hi) continue;
        const double c = cost(lo, hi);
        if (c < best) {
          best = c;
          best_lo = lo;
          best_hi = hi;
          improved = true;
        }
      }
    }
  }
  return ClippingFit{ClippingWindow(grid[static_cast<std::size_t>(best_lo)], grid[static_cast<std::size_t>(best_hi)]),
                     best, spectrum(best_lo, best_hi)};
}

}  // namespace sqsim
