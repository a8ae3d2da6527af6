#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sqsim/core.hpp"
#include "sqsim/gaussian.hpp"
#include "sqsim/modes.hpp"

namespace sqsim {

inline constexpr double kPptTol = 1e-10;

/// Subset A of a bipartition A|B, stored as a bitmask over mode indices.
/// Canonical form: A contains mode 0 and is not the full set.
class Bipartition {
 public:
  Bipartition(std::uint32_t mask, int n_modes) : mask_(mask), n_(n_modes) {
    detail::require(n_modes >= 2 && n_modes <= 24, Errc::out_of_range, "bipartitions need 2 <= N <= 24");
    const std::uint32_t full = (std::uint32_t{1} << n_modes) - 1;
    detail::require((mask & ~full) == 0 && (mask & 1u) != 0 && mask != full, Errc::invalid_argument,
                    "bipartition mask must contain mode 0 and leave B non-empty");
  }

  [[nodiscard]] std::uint32_t mask() const noexcept { return mask_; }
  [[nodiscard]] int n_modes() const noexcept { return n_; }
  [[nodiscard]] bool contains(int mode) const noexcept { return ((mask_ >> mode) & 1u) != 0; }
  [[nodiscard]] int size_a() const noexcept { return std::popcount(mask_); }

  [[nodiscard]] std::vector<int> subset_a() const {
    std::vector<int> out;
    for (int k = 0; k < n_; ++k)
      if (contains(k)) out.push_back(k);
    return out;
  }

  friend bool operator==(const Bipartition&, const Bipartition&) = default;

 private:
  std::uint32_t mask_;
  int n_;
};

/// All 2^{n-1} - 1 canonical bipartitions in ascending mask order.
inline std::vector<Bipartition> enumerate_bipartitions(int n) {
  detail::require(n >= 2 && n <= 24, Errc::out_of_range, "bipartition enumeration needs 2 <= N <= 24");
  const std::uint32_t full = (std::uint32_t{1} << n) - 1;
  std::vector<Bipartition> out;
  out.reserve((std::size_t{1} << (n - 1)) - 1);
  for (std::uint32_t m = 1; m < full; m += 2) out.emplace_back(m, n);
  return out;
}

/// Minimum eigenvalue of P Gamma P + (i/2) Omega, where P flips p_k for the
/// modes in A. Negative values certify entanglement across the cut. Note that
/// the plain spectrum of P Gamma P is never negative; the uncertainty term is
/// what makes this a test.
inline double ppt_value(const CovarianceMatrix& cm, const Bipartition& bp) {
  const Eigen::Index n = cm.n_modes();
  detail::require(bp.n_modes() == n, Errc::dimension_mismatch, "bipartition size differs from CM mode count");
  VectorXd p = VectorXd::Ones(2 * n);
  for (Eigen::Index k = 0; k < n; ++k)
    if (bp.contains(static_cast<int>(k))) p[n + k] = -1.0;
  const MatrixXd flipped = p.asDiagonal() * cm.matrix() * p.asDiagonal();
  return physicality_margin(flipped);
}

struct PPTEntry {
  Bipartition bipartition;
  double value;
  bool violated;
};

struct PPTReport {
  std::vector<PPTEntry> entries;
  int violated_count = 0;
  double fraction_violated = 0.0;
  double tol = kPptTol;
};

inline PPTReport ppt_scan(const CovarianceMatrix& cm, double tol = kPptTol) {
  PPTReport rep;
  rep.tol = tol;
  for (const auto& bp : enumerate_bipartitions(static_cast<int>(cm.n_modes()))) {
    const double v = ppt_value(cm, bp);
    const bool bad = v < -tol;
    rep.entries.push_back({bp, v, bad});
    rep.violated_count += bad ? 1 : 0;
  }
  rep.fraction_violated = static_cast<double>(rep.violated_count) / static_cast<double>(rep.entries.size());
  return rep;
}

struct SupermodeReport {
  /// Eigenmodes on the measurement grid, each oriented so that p is its
  /// squeezed quadrature. Ordered by decreasing antisqueezing.
  ModeBasis eigenmodes;
  /// Row k: coefficients of eigenmode k in the measurement basis.
  MatrixXcd coefficients;
  std::vector<double> var_squeezed;
  std::vector<double> var_antisqueezed;
  std::vector<double> sq_db;
  std::vector<double> antisq_db;
  /// |<xx eigenvector, paired pp eigenvector>| per mode.
  std::vector<double> pair_overlap;
  bool ill_paired = false;
  double xp_norm = 0.0;
};

struct SupermodeOptions {
  /// Limit on ||xp||_F relative to trace(Gamma).
  double cross_tol = 1e-6;
  double pair_warn = 0.9;
};

namespace detail {

/// Eigenvectors of `a` (ascending), with each cluster of equal eigenvalues
/// rotated to diagonalize `b` inside that cluster.
inline std::pair<VectorXd, MatrixXd> split_degenerate(const MatrixXd& a, const MatrixXd& b) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  VectorXd val = es.eigenvalues();
  MatrixXd vec = es.eigenvectors();
  const Eigen::Index n = a.rows();
  const double scale = std::max(1e-300, val.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i + 1;
    while (j < n && val[j] - val[j - 1] <= 1e-9 * scale) ++j;
    if (j - i > 1) {
      const MatrixXd q = vec.middleCols(i, j - i);
      Eigen::SelfAdjointEigenSolver<MatrixXd> sub(q.transpose() * b * q);
      vec.middleCols(i, j - i) = q * sub.eigenvectors();
    }
    i = j;
  }
  return {val, vec};
}

}  // namespace detail

/// Diagonalizes the xx and pp blocks of a CM with vanishing xp block and
/// pairs their eigenvectors by overlap (greedy over descending xx
/// eigenvalue, lowest index on ties).
inline SupermodeReport extract_supermodes(const CovarianceMatrix& cm, const ModeBasis& basis,
                                          const SupermodeOptions& opt = {}) {
  const Eigen::Index n = cm.n_modes();
  detail::require(basis.size() == n, Errc::dimension_mismatch, "basis size differs from CM mode count");
  detail::require(basis.orthonormal(), Errc::invalid_argument, "supermode extraction needs an orthonormal basis");
  const double xp = cm.xp().norm();
  detail::require(xp <= opt.cross_tol * cm.matrix().trace(), Errc::assumption_violated,
                  "xp block of the covariance matrix is not negligible (" + std::to_string(xp) + ")");

  const MatrixXd xx = cm.xx(), pp = cm.pp();
  const auto [vx, ex] = detail::split_degenerate(xx, pp);
  const auto [vp, ep] = detail::split_degenerate(pp, xx);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return vx[a] > vx[b]; });

  struct Mode {
    VectorXd v;
    double var_x, var_p, overlap;
  };
  std::vector<Mode> modes;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (const Eigen::Index i : order) {
    Eigen::Index best = -1;
    double best_ov = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double ov = std::abs(ex.col(i).dot(ep.col(j)));
      if (ov > best_ov) {
        best_ov = ov;
        best = j;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    modes.push_back({ex.col(i), vx[i], vp[best], best_ov});
  }
  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    return std::max(a.var_x, a.var_p) > std::max(b.var_x, b.var_p);
  });

  SupermodeReport rep{ModeBasis(basis.grid(), MatrixXcd::Identity(basis.grid()->size(), 0), "eigenmodes",
                                Orthogonality::orthonormal),
                      MatrixXcd(n, n), {}, {}, {}, {}, {}, false, xp};
  for (Eigen::Index k = 0; k < n; ++k) {
    const Mode& m = modes[static_cast<std::size_t>(k)];
    Eigen::Index peak;
    m.v.cwiseAbs().maxCoeff(&peak);
    VectorXcd c = (m.v[peak] < 0.0 ? -m.v : m.v).cast<cplx>();
    // multiplying a mode by i exchanges its x and p
    if (m.var_x < m.var_p) c *= cplx(0.0, 1.0);
    rep.coefficients.row(k) = c.transpose();
    const double lo = std::min(m.var_x, m.var_p), hi = std::max(m.var_x, m.var_p);
    rep.var_squeezed.push_back(lo);
    rep.var_antisqueezed.push_back(hi);
    rep.sq_db.push_back(to_db(lo));
    rep.antisq_db.push_back(to_db(hi));
    rep.pair_overlap.push_back(m.overlap);
    rep.ill_paired = rep.ill_paired || m.overlap < opt.pair_warn;
  }
  rep.eigenmodes = ModeBasis(basis.grid(), basis.amplitudes() * rep.coefficients.transpose(), "eigenmodes",
                             Orthogonality::orthonormal);
  return rep;
}

}  // namespace sqsim
