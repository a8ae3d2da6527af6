#pragma once

#include <random>
#include <vector>

#include "sqsim/gaussian.hpp"

namespace sqsim::test {

/// Haar-ish random unitary from the QR of a complex Gaussian matrix.
inline MatrixXcd random_unitary(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  MatrixXcd z(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) z(i, j) = cplx(nd(rng), nd(rng));
  Eigen::HouseholderQR<MatrixXcd> qr(z);
  MatrixXcd q = qr.householderQ();
  const MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k) q.col(k) *= std::polar(1.0, std::arg(r(k, k)));
  return q;
}

inline MatrixXd random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  MatrixXd z(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) z(i, j) = nd(rng);
  Eigen::HouseholderQR<MatrixXd> qr(z);
  return qr.householderQ();
}

inline std::vector<double> random_r(Eigen::Index n, std::mt19937_64& rng, double max_r = 1.5) {
  std::uniform_real_distribution<double> u(0.0, max_r);
  std::vector<double> r(static_cast<std::size_t>(n));
  for (auto& x : r) x = u(rng);
  return r;
}

/// Squeezed vacuum, passively mixed, optionally lossy.
inline CovarianceMatrix random_cm(Eigen::Index n, std::mt19937_64& rng, bool lossy) {
  auto cm = change_basis(squeezed_vacuum(SqueezingSpectrum(random_r(n, rng))), BasisChange(random_unitary(n, rng)));
  if (lossy) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> eta(static_cast<std::size_t>(n));
    for (auto& e : eta) e = u(rng);
    cm = apply_loss(cm, eta);
  }
  return cm;
}

}  // namespace sqsim::test
