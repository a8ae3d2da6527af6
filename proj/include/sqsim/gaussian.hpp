#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sqsim/core.hpp"
#include "sqsim/modes.hpp"
#include "sqsim/spdc.hpp"

namespace sqsim {

inline constexpr double kPhysicalityTol = 1e-9;

/// Omega = [[0, I], [-I, 0]] in xxpp ordering.
inline MatrixXd symplectic_form(Eigen::Index n) {
  MatrixXd om = MatrixXd::Zero(2 * n, 2 * n);
  om.topRightCorner(n, n) = MatrixXd::Identity(n, n);
  om.bottomLeftCorner(n, n) = -MatrixXd::Identity(n, n);
  return om;
}

/// Smallest eigenvalue of gamma + (i/2) Omega.
inline double physicality_margin(const MatrixXd& gamma) {
  const Eigen::Index n = gamma.rows() / 2;
  const MatrixXcd h = gamma.cast<cplx>() + cplx(0.0, 0.5) * symplectic_form(n).cast<cplx>();
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

enum class CmCheck { physical, symmetric_only };

/// Quadrature covariance matrix, xxpp ordering, vacuum variance 1/2.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(MatrixXd gamma, CmCheck check = CmCheck::physical) : gamma_(std::move(gamma)) {
    detail::require(gamma_.rows() == gamma_.cols() && gamma_.rows() >= 2 && gamma_.rows() % 2 == 0,
                    Errc::dimension_mismatch, "covariance matrix must be 2N x 2N with N >= 1");
    detail::require(gamma_.allFinite(), Errc::invalid_argument, "covariance matrix has non-finite entries");
    const double asym = (gamma_ - gamma_.transpose()).cwiseAbs().maxCoeff();
    detail::require(asym <= 1e-12 * std::max(1.0, gamma_.cwiseAbs().maxCoeff()), Errc::invalid_argument,
                    "covariance matrix is not symmetric");
    gamma_ = 0.5 * (gamma_ + gamma_.transpose()).eval();
    if (check == CmCheck::physical) {
      const double m = physicality_margin(gamma_);
      detail::require(m >= -kPhysicalityTol, Errc::invalid_argument,
                      "covariance matrix violates the uncertainty principle (margin " + std::to_string(m) + ")");
    }
  }

  static CovarianceMatrix vacuum(Eigen::Index n) {
    return CovarianceMatrix(kVacuumVariance * MatrixXd::Identity(2 * n, 2 * n));
  }

  [[nodiscard]] Eigen::Index n_modes() const noexcept { return gamma_.rows() / 2; }
  [[nodiscard]] const MatrixXd& matrix() const noexcept { return gamma_; }
  [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return gamma_(i, j); }

  [[nodiscard]] auto xx() const { return gamma_.topLeftCorner(n_modes(), n_modes()); }
  [[nodiscard]] auto pp() const { return gamma_.bottomRightCorner(n_modes(), n_modes()); }
  [[nodiscard]] auto xp() const { return gamma_.topRightCorner(n_modes(), n_modes()); }

 private:
  MatrixXd gamma_;
};

/// Symplectic eigenvalues nu_1 <= ... <= nu_N (eigenvalues of |i Omega gamma|).
inline std::vector<double> symplectic_eigenvalues(const CovarianceMatrix& cm) {
  const Eigen::Index n = cm.n_modes();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cm.matrix());
  detail::require(es.eigenvalues().minCoeff() > 0.0, Errc::invalid_argument,
                  "symplectic spectrum needs a positive-definite covariance matrix");
  const MatrixXd root = es.operatorSqrt();
  // root (i Omega) root is Hermitian with eigenvalues +-nu_k
  const MatrixXcd h = cplx(0.0, 1.0) * (root * symplectic_form(n) * root).cast<cplx>();
  Eigen::SelfAdjointEigenSolver<MatrixXcd> hs(h, Eigen::EigenvaluesOnly);
  std::vector<double> nu(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) nu[static_cast<std::size_t>(k)] = hs.eigenvalues()[n + k];
  return nu;
}

enum class BasisChangeKind {
  isometry,     // C C^dag = I
  contraction,  // output modes orthonormal, partly outside the input span
  general,      // non-orthogonal output modes
};

/// Row j of `overlap()` expresses output mode j in the input modes:
/// C(j, k) = <out_j, in_k>.
class BasisChange {
 public:
  explicit BasisChange(MatrixXcd overlap, BasisChangeKind kind = BasisChangeKind::isometry,
                       std::optional<MatrixXcd> output_gram = std::nullopt)
      : c_(std::move(overlap)), kind_(kind) {
    const Eigen::Index m = c_.rows();
    gram_ = output_gram.value_or(MatrixXcd::Identity(m, m));
    detail::require(gram_.rows() == m && gram_.cols() == m, Errc::dimension_mismatch,
                    "output Gram does not match overlap rows");
    const MatrixXcd cc = c_ * c_.adjoint();
    switch (kind_) {
      case BasisChangeKind::isometry:
        detail::require((cc - MatrixXcd::Identity(m, m)).cwiseAbs().maxCoeff() <= 1e-10, Errc::invalid_argument,
                        "basis change is not an isometry; flag it as contraction or general");
        break;
      case BasisChangeKind::contraction: {
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(MatrixXcd::Identity(m, m) - cc, Eigen::EigenvaluesOnly);
        detail::require(es.eigenvalues().minCoeff() >= -1e-10, Errc::invalid_argument,
                        "basis change is not a contraction");
        break;
      }
      case BasisChangeKind::general: break;
    }
  }

  /// Overlaps between two bases on the same grid; the kind is inferred.
  static BasisChange between(const ModeBasis& out, const ModeBasis& in) {
    detail::require(in.orthonormal(), Errc::invalid_argument, "input basis of a basis change must be orthonormal");
    MatrixXcd c = overlap_matrix(out, in);
    if (!out.orthonormal()) return BasisChange(std::move(c), BasisChangeKind::general, out.gram());
    const MatrixXcd cc = c * c.adjoint();
    const bool iso = (cc - MatrixXcd::Identity(c.rows(), c.rows())).cwiseAbs().maxCoeff() <= 1e-10;
    return BasisChange(std::move(c), iso ? BasisChangeKind::isometry : BasisChangeKind::contraction);
  }

  [[nodiscard]] const MatrixXcd& overlap() const noexcept { return c_; }
  [[nodiscard]] BasisChangeKind kind() const noexcept { return kind_; }
  [[nodiscard]] const MatrixXcd& output_gram() const noexcept { return gram_; }
  [[nodiscard]] Eigen::Index n_out() const noexcept { return c_.rows(); }
  [[nodiscard]] Eigen::Index n_in() const noexcept { return c_.cols(); }

 private:
  MatrixXcd c_;
  BasisChangeKind kind_;
  MatrixXcd gram_;
};

namespace detail {

/// Real (x, p) image of a complex mode transformation C = A + iB.
inline MatrixXd real_form(const MatrixXcd& c) {
  const Eigen::Index r = c.rows(), k = c.cols();
  MatrixXd s(2 * r, 2 * k);
  s << c.real(), -c.imag(), c.imag(), c.real();
  return s;
}

}  // namespace detail

/// Var(x_k) = e^{2 r_k}/2, Var(p_k) = e^{-2 r_k}/2.
inline CovarianceMatrix squeezed_vacuum(const SqueezingSpectrum& r) {
  const auto n = static_cast<Eigen::Index>(r.size());
  detail::require(n >= 1, Errc::invalid_argument, "squeezed vacuum needs at least one mode");
  MatrixXd g = MatrixXd::Zero(2 * n, 2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    g(k, k) = 0.5 * std::exp(2.0 * r[static_cast<std::size_t>(k)]);
    g(n + k, n + k) = 0.5 * std::exp(-2.0 * r[static_cast<std::size_t>(k)]);
  }
  return CovarianceMatrix(std::move(g));
}

/// Gamma' = S Gamma S^T + (G - S S^T)/2, with S the real image of C and G the
/// real image of the output Gram (identity for orthonormal outputs). The
/// second term is the vacuum carried by output components outside the
/// input span.
inline CovarianceMatrix change_basis(const CovarianceMatrix& cm, const BasisChange& bc) {
  detail::require(bc.n_in() == cm.n_modes(), Errc::dimension_mismatch,
                  "basis change input dimension differs from CM mode count");
  const MatrixXd s = detail::real_form(bc.overlap());
  const MatrixXd g = detail::real_form(bc.output_gram());
  MatrixXd out = s * cm.matrix() * s.transpose() + kVacuumVariance * (g - s * s.transpose());
  out = 0.5 * (out + out.transpose()).eval();
  return CovarianceMatrix(std::move(out),
                          bc.kind() == BasisChangeKind::general ? CmCheck::symmetric_only : CmCheck::physical);
}

/// Pure-loss channel per mode: Gamma -> E Gamma E + (I - E^2)/2.
inline CovarianceMatrix apply_loss(const CovarianceMatrix& cm, const std::vector<double>& eta) {
  const Eigen::Index n = cm.n_modes();
  detail::require(static_cast<Eigen::Index>(eta.size()) == n, Errc::dimension_mismatch,
                  "loss vector length differs from CM mode count");
  VectorXd e(2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double t = eta[static_cast<std::size_t>(k)];
    detail::require(t >= 0.0 && t <= 1.0, Errc::invalid_argument, "efficiency outside [0, 1]");
    e[k] = e[n + k] = std::sqrt(t);
  }
  MatrixXd out = e.asDiagonal() * cm.matrix() * e.asDiagonal();
  out.diagonal().array() += kVacuumVariance * (1.0 - e.array().square());
  return CovarianceMatrix(std::move(out));
}

inline CovarianceMatrix apply_loss(const CovarianceMatrix& cm, double eta) {
  return apply_loss(cm, std::vector<double>(static_cast<std::size_t>(cm.n_modes()), eta));
}

inline double to_db(double variance) {
  detail::require(variance > 0.0, Errc::non_positive_variance, "variance must be positive");
  return 10.0 * std::log10(variance / kVacuumVariance);
}

inline double from_db(double db) { return kVacuumVariance * std::pow(10.0, db / 10.0); }

struct HomodyneResult {
  double variance = kVacuumVariance;
  /// Fraction of the LO outside the span of the CM's modes.
  double residue = 1.0;
  /// LO orthogonal to every mode: pure shot noise.
  bool no_overlap = false;
};

namespace detail {

struct LoProjection {
  VectorXcd c;  // <m_k, lo>
  double residue;
};

inline LoProjection project_lo(const ModeBasis& basis, const SpectralMode& lo) {
  detail::require(basis.orthonormal(), Errc::invalid_argument, "homodyne projection needs an orthonormal basis");
  detail::require(same_grid(basis.grid(), lo.grid()), Errc::dimension_mismatch, "LO and basis on different grids");
  VectorXcd c = basis.project(lo);
  return {c, std::max(0.0, 1.0 - c.squaredNorm())};
}

/// Quadrature vector for phase phi: d = conj(c) e^{-i phi}, v = (Re d, -Im d).
inline VectorXd quadrature_vector(const VectorXcd& c, double phase) {
  const VectorXcd d = c.conjugate() * std::polar(1.0, -phase);
  VectorXd v(2 * c.size());
  v << d.real(), -d.imag();
  return v;
}

}  // namespace detail

/// Variance of X_phi = x cos(phi) + p sin(phi) of the LO mode. The CM
/// describes the modes of `basis`; LO components outside their span add
/// vacuum noise.
inline HomodyneResult homodyne_variance(const CovarianceMatrix& cm, const ModeBasis& basis, const SpectralMode& lo,
                                        double phase) {
  detail::require(basis.size() == cm.n_modes(), Errc::dimension_mismatch, "basis size differs from CM mode count");
  const auto proj = detail::project_lo(basis, lo);
  HomodyneResult r;
  r.residue = proj.residue;
  if (proj.c.norm() < 1e-12) {
    r.no_overlap = true;
    r.variance = kVacuumVariance;
    return r;
  }
  const VectorXd v = detail::quadrature_vector(proj.c, phase);
  r.variance = v.dot(cm.matrix() * v) + kVacuumVariance * proj.residue;
  return r;
}

struct HomodyneExtrema {
  double min_variance;
  double max_variance;
  double phase_min;  // rad, in [0, pi)
  double phase_max;
  double residue;
};

/// Closed-form extrema over the LO phase: V(phi) is a quadratic form in
/// (cos phi, sin phi).
inline HomodyneExtrema homodyne_extrema(const CovarianceMatrix& cm, const ModeBasis& basis, const SpectralMode& lo) {
  detail::require(basis.size() == cm.n_modes(), Errc::dimension_mismatch, "basis size differs from CM mode count");
  const auto proj = detail::project_lo(basis, lo);
  const VectorXd v0 = detail::quadrature_vector(proj.c, 0.0);
  const VectorXd v1 = detail::quadrature_vector(proj.c, 0.5 * kPi);
  Eigen::Matrix2d q;
  q(0, 0) = v0.dot(cm.matrix() * v0);
  q(1, 1) = v1.dot(cm.matrix() * v1);
  q(0, 1) = q(1, 0) = v0.dot(cm.matrix() * v1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q);
  const auto angle = [](const Eigen::Vector2d& e) {
    double a = std::atan2(e[1], e[0]);
    if (a < 0.0) a += kPi;
    if (a >= kPi) a -= kPi;
    return a;
  };
  const double vac = kVacuumVariance * proj.residue;
  return {es.eigenvalues()[0] + vac, es.eigenvalues()[1] + vac, angle(es.eigenvectors().col(0)),
          angle(es.eigenvectors().col(1)), proj.residue};
}

}  // namespace sqsim
