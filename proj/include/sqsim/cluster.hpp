#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sqsim/core.hpp"
#include "sqsim/gaussian.hpp"
#include "sqsim/modes.hpp"
#include "sqsim/spdc.hpp"

namespace sqsim {

/// Graph adjacency matrix: real, exactly symmetric, zero diagonal.
class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(MatrixXd v, std::string name = "custom") : v_(std::move(v)), name_(std::move(name)) {
    detail::require(v_.rows() == v_.cols() && v_.rows() >= 1, Errc::dimension_mismatch,
                    "adjacency matrix must be square and non-empty");
    detail::require(v_.allFinite(), Errc::invalid_argument, "adjacency matrix has non-finite entries");
    detail::require(v_ == v_.transpose(), Errc::invalid_argument, "adjacency matrix must be symmetric");
    detail::require(v_.diagonal().cwiseAbs().maxCoeff() == 0.0, Errc::invalid_argument,
                    "adjacency matrix must have a zero diagonal");
  }

  [[nodiscard]] const MatrixXd& matrix() const noexcept { return v_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return v_.rows(); }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return v_(i, j); }
  [[nodiscard]] double degree(Eigen::Index i) const { return v_.row(i).cwiseAbs().sum(); }

 private:
  MatrixXd v_;
  std::string name_;
};

inline constexpr std::array<std::string_view, 5> kAdjacencyPresets{"linear4", "square", "star", "linear6", "linear8"};

inline AdjacencyMatrix preset_adjacency(std::string_view name) {
  const auto linear = [](Eigen::Index n) {
    MatrixXd v = MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) v(i, i + 1) = v(i + 1, i) = 1.0;
    return v;
  };
  MatrixXd v;
  if (name == "linear4") {
    v = linear(4);
  } else if (name == "linear6") {
    v = linear(6);
  } else if (name == "linear8") {
    v = linear(8);
  } else if (name == "square") {
    v = linear(4);
    v(0, 3) = v(3, 0) = 1.0;
  } else if (name == "star") {
    v = MatrixXd::Zero(4, 4);
    for (Eigen::Index i = 1; i < 4; ++i) v(0, i) = v(i, 0) = 1.0;
  } else {
    throw Error(Errc::unknown_preset, "unknown adjacency preset '" + std::string(name) + "'");
  }
  return AdjacencyMatrix(std::move(v), std::string(name));
}

/// Passive transformation U = A + iB from input supermodes to cluster
/// nodes, with A = (I + V^2)^{-1/2} O and B = V A. Row j expresses node j
/// in the input modes, as in `BasisChange`.
class ClusterUnitary {
 public:
  explicit ClusterUnitary(const AdjacencyMatrix& v, std::optional<MatrixXd> o = std::nullopt) {
    const Eigen::Index n = v.size();
    o_ = o.value_or(MatrixXd::Identity(n, n));
    detail::require(o_.rows() == n && o_.cols() == n, Errc::dimension_mismatch,
                    "orthogonal freedom must match the graph size");
    detail::require((o_ * o_.transpose() - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10,
                    Errc::invalid_argument, "orthogonal freedom is not orthogonal");
    const MatrixXd m = MatrixXd::Identity(n, n) + v.matrix() * v.matrix();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    // eigenvalues of I + V^2 are >= 1 for real symmetric V
    if (es.eigenvalues().minCoeff() < 1.0 - 1e-9) throw Error(Errc::invalid_argument, "I + V^2 is not >= I");
    a_ = es.operatorInverseSqrt() * o_;
    b_ = v.matrix() * a_;
    u_ = a_.cast<cplx>() + cplx(0.0, 1.0) * b_.cast<cplx>();
  }

  [[nodiscard]] const MatrixXcd& matrix() const noexcept { return u_; }
  [[nodiscard]] const MatrixXd& real_part() const noexcept { return a_; }
  [[nodiscard]] const MatrixXd& imag_part() const noexcept { return b_; }
  [[nodiscard]] const MatrixXd& orthogonal_freedom() const noexcept { return o_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return u_.rows(); }
  [[nodiscard]] BasisChange basis_change() const { return BasisChange(u_); }

 private:
  MatrixXd o_, a_, b_;
  MatrixXcd u_;
};

inline ClusterUnitary cluster_unitary(const AdjacencyMatrix& v, std::optional<MatrixXd> o = std::nullopt) {
  return ClusterUnitary(v, std::move(o));
}

/// Box-plot summary; quartiles use linear interpolation between order
/// statistics (R type 7).
struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

inline double quantile_type7(std::vector<double> x, double q) {
  detail::require(!x.empty(), Errc::invalid_argument, "quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline BoxStats box_stats(const std::vector<double>& x) {
  detail::require(!x.empty(), Errc::invalid_argument, "statistics of an empty sample");
  BoxStats s;
  s.min = *std::min_element(x.begin(), x.end());
  s.max = *std::max_element(x.begin(), x.end());
  s.q1 = quantile_type7(x, 0.25);
  s.median = quantile_type7(x, 0.5);
  s.q3 = quantile_type7(x, 0.75);
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  return s;
}

struct NullifierReport {
  std::string topology;
  std::vector<double> variances;
  std::vector<double> shot_refs;
  std::vector<double> squeezing_db;
  BoxStats stats;
};

struct ClusterOptions {
  std::optional<MatrixXd> orthogonal;
  /// Node i is fed by supermode permutation[i]; identity when empty.
  std::vector<int> permutation;
  /// Per-node detection efficiency; all ones when empty.
  std::vector<double> eta;
};

namespace detail {

inline std::vector<int> node_permutation(const std::vector<int>& perm, Eigen::Index n, Eigen::Index available) {
  if (perm.empty()) {
    std::vector<int> id(static_cast<std::size_t>(n));
    std::iota(id.begin(), id.end(), 0);
    return id;
  }
  detail::require(static_cast<Eigen::Index>(perm.size()) == n, Errc::dimension_mismatch,
                  "node permutation length differs from graph size");
  std::vector<int> seen = perm;
  std::sort(seen.begin(), seen.end());
  detail::require(std::adjacent_find(seen.begin(), seen.end()) == seen.end() && seen.front() >= 0 &&
                      seen.back() < available,
                  Errc::invalid_argument, "node permutation must pick distinct available supermodes");
  return perm;
}

}  // namespace detail

/// Nullifier variances Var(delta_i), delta = p - V x, for p-squeezed
/// supermodes mapped to the nodes by the cluster unitary and then detected
/// with efficiency eta. The shot reference is the same combination on
/// vacuum, (I + V^2)_ii / 2.
inline NullifierReport nullifier_report(const AdjacencyMatrix& v, const SqueezingSpectrum& r,
                                        const ClusterOptions& opt = {}) {
  const Eigen::Index n = v.size();
  detail::require(static_cast<Eigen::Index>(r.size()) >= n, Errc::dimension_mismatch,
                  "squeezing spectrum shorter than the graph");
  const auto perm = detail::node_permutation(opt.permutation, n, static_cast<Eigen::Index>(r.size()));
  std::vector<double> rn(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    rn[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];

  const ClusterUnitary u(v, opt.orthogonal);
  CovarianceMatrix cm = change_basis(squeezed_vacuum(SqueezingSpectrum(rn)), u.basis_change());
  if (!opt.eta.empty()) cm = apply_loss(cm, opt.eta);

  MatrixXd m(n, 2 * n);
  m << -v.matrix(), MatrixXd::Identity(n, n);
  const MatrixXd cov = m * cm.matrix() * m.transpose();
  const MatrixXd ref = kVacuumVariance * (MatrixXd::Identity(n, n) + v.matrix() * v.matrix());

  NullifierReport rep;
  rep.topology = v.name();
  for (Eigen::Index i = 0; i < n; ++i) {
    rep.variances.push_back(cov(i, i));
    rep.shot_refs.push_back(ref(i, i));
    rep.squeezing_db.push_back(10.0 * std::log10(cov(i, i) / ref(i, i)));
  }
  rep.stats = box_stats(rep.squeezing_db);
  return rep;
}

/// LO spectral shapes of the cluster nodes: node j = sum_k conj(U_jk) m_k
/// over the first N basis modes (permuted), so that <node_j, m_k> = U_jk.
inline std::vector<SpectralMode> nullifier_lo_masks(const ClusterUnitary& u, const ModeBasis& basis,
                                                    const std::vector<int>& permutation = {}) {
  const Eigen::Index n = u.size();
  detail::require(basis.size() >= n, Errc::dimension_mismatch, "basis has fewer modes than the graph");
  const auto perm = detail::node_permutation(permutation, n, basis.size());
  std::vector<SpectralMode> out;
  for (Eigen::Index j = 0; j < n; ++j) {
    VectorXcd f = VectorXcd::Zero(basis.amplitudes().rows());
    for (Eigen::Index k = 0; k < n; ++k)
      f += std::conj(u.matrix()(j, k)) * basis.column(perm[static_cast<std::size_t>(k)]);
    out.push_back(SpectralMode::normalized(basis.grid(), std::move(f)));
  }
  return out;
}

}  // namespace sqsim
