#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sqsim/cluster.hpp"
#include "support.hpp"

using namespace sqsim;

TEST(Adjacency, Presets) {
  const auto star = preset_adjacency("star");
  MatrixXd s(4, 4);
  s << 0, 1, 1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0;
  EXPECT_EQ(star.matrix(), s);
  const auto sq = preset_adjacency("square");
  MatrixXd q(4, 4);
  q << 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0;
  EXPECT_EQ(sq.matrix(), q);
  const auto l8 = preset_adjacency("linear8");
  ASSERT_EQ(l8.size(), 8);
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 8; ++j) EXPECT_EQ(l8(i, j), std::abs(i - j) == 1 ? 1.0 : 0.0);
  EXPECT_EQ(preset_adjacency("linear6").size(), 6);
  EXPECT_EQ(preset_adjacency("linear4").degree(1), 2.0);
  try {
    preset_adjacency("ring");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_preset);
  }
  EXPECT_THROW(AdjacencyMatrix(MatrixXd::Identity(3, 3)), Error);
  MatrixXd asym = MatrixXd::Zero(2, 2);
  asym(0, 1) = 1.0;
  EXPECT_THROW(AdjacencyMatrix{asym}, Error);
}

TEST(ClusterUnitary, ConstructionIdentity) {
  for (const auto name : kAdjacencyPresets) {
    const auto v = preset_adjacency(name);
    const ClusterUnitary u(v);
    const Eigen::Index n = v.size();
    EXPECT_LT((u.matrix() * u.matrix().adjoint() - MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12) << name;
    EXPECT_LT((u.matrix().imag() - v.matrix() * u.matrix().real()).cwiseAbs().maxCoeff(), 1e-12) << name;
    // symbolic block product: [-V, I] S has no x-input columns
    const MatrixXd s = detail::real_form(u.matrix());
    MatrixXd m(n, 2 * n);
    m << -v.matrix(), MatrixXd::Identity(n, n);
    EXPECT_LT((m * s).leftCols(n).cwiseAbs().maxCoeff(), 1e-12) << name;
  }
  const ClusterUnitary edgeless(AdjacencyMatrix(MatrixXd::Zero(3, 3)));
  EXPECT_LT((edgeless.matrix() - MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(ClusterUnitary(preset_adjacency("linear4"), MatrixXd::Ones(4, 4)), Error);
}

TEST(ClusterUnitary, OrthogonalFreedomKeepsIdentity) {
  std::mt19937_64 rng(3);
  const auto v = preset_adjacency("linear6");
  const ClusterUnitary u(v, test::random_orthogonal(6, rng));
  EXPECT_LT((u.matrix().imag() - v.matrix() * u.matrix().real()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((u.matrix() * u.matrix().adjoint() - MatrixXcd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Nullifiers, VacuumVariancesAreDegreePlusOneHalves) {
  const auto rep = nullifier_report(preset_adjacency("linear4"), SqueezingSpectrum({0, 0, 0, 0}));
  const std::vector<double> want{1.0, 1.5, 1.5, 1.0};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(rep.variances[i], want[i], 1e-12);
    EXPECT_NEAR(rep.shot_refs[i], want[i], 1e-15);
    EXPECT_NEAR(rep.squeezing_db[i], 0.0, 1e-12);
  }
}

TEST(Nullifiers, UniformSqueezingTheorem) {
  const double r = 0.5;
  for (const auto name : kAdjacencyPresets) {
    const auto v = preset_adjacency(name);
    const auto rep = nullifier_report(v, SqueezingSpectrum(std::vector<double>(8, r)));
    for (double db : rep.squeezing_db) EXPECT_NEAR(db, -20.0 * r / std::log(10.0), 1e-9) << name;
    EXPECT_NEAR(rep.stats.max - rep.stats.min, 0.0, 1e-9);
    // variances shrink as e^{-2r} times the vacuum value (1 + degree) / 2
    const auto big = nullifier_report(v, SqueezingSpectrum(std::vector<double>(8, 4.0)));
    for (Eigen::Index i = 0; i < v.size(); ++i)
      EXPECT_NEAR(big.variances[static_cast<std::size_t>(i)] / (0.5 * (1.0 + v.degree(i)) * std::exp(-8.0)), 1.0, 1e-6);
  }
}

TEST(Nullifiers, MonotoneInSqueezingAndLoss) {
  std::mt19937_64 rng(5);
  for (const auto name : kAdjacencyPresets) {
    const auto v = preset_adjacency(name);
    const auto n = static_cast<std::size_t>(v.size());
    auto r = test::random_r(v.size(), rng, 1.0);
    const auto a = nullifier_report(v, SqueezingSpectrum(r));
    for (auto& x : r) x += 0.1;
    const auto b = nullifier_report(v, SqueezingSpectrum(r));
    ClusterOptions lo, hi;
    lo.eta.assign(n, 0.4);
    hi.eta.assign(n, 0.8);
    const auto c = nullifier_report(v, SqueezingSpectrum(r), lo);
    const auto d = nullifier_report(v, SqueezingSpectrum(r), hi);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LT(b.variances[i], a.variances[i]) << name;
      EXPECT_GE(c.squeezing_db[i], d.squeezing_db[i]) << name;
      EXPECT_LT(c.squeezing_db[i], 0.0) << name;
    }
  }
}

TEST(Nullifiers, UnequalSqueezingSpreads) {
  const auto rep = nullifier_report(preset_adjacency("linear8"),
                                    SqueezingSpectrum({0.9, 0.8, 0.7, 0.6, 0.5, 0.45, 0.4, 0.3}));
  EXPECT_GT(rep.stats.max - rep.stats.min, 1e-3);
  EXPECT_LE(rep.stats.min, rep.stats.q1);
  EXPECT_LE(rep.stats.q1, rep.stats.median);
  EXPECT_LE(rep.stats.median, rep.stats.q3);
  EXPECT_LE(rep.stats.q3, rep.stats.max);
  for (double db : rep.squeezing_db) EXPECT_LT(db, 0.0);
}

TEST(Nullifiers, PermutationAndErrors) {
  const auto v = preset_adjacency("star");
  const SqueezingSpectrum r({0.9, 0.1, 0.2, 0.3, 0.4});
  ClusterOptions opt;
  opt.permutation = {4, 3, 2, 1};
  const auto a = nullifier_report(v, r, opt);
  const auto b = nullifier_report(v, SqueezingSpectrum({0.4, 0.3, 0.2, 0.1}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.variances[i], b.variances[i], 1e-14);
  opt.permutation = {0, 0, 1, 2};
  EXPECT_THROW(nullifier_report(v, r, opt), Error);
  EXPECT_THROW(nullifier_report(preset_adjacency("linear8"), r), Error);
}

TEST(BoxStats, TypeSevenQuartiles) {
  const auto s = box_stats({4.0, 1.0, 3.0, 2.0});
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.q1, 1.75);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.q3, 3.25);
  EXPECT_DOUBLE_EQ(s.max, 4.0);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(box_stats({7.0}).q3, 7.0);
}

TEST(LoMasks, ShapesAndHomodyneConsistency) {
  const auto g = make_grid(FrequencyGrid::uniform(1400.0, 1720.0, 321, 1560.0));
  const auto hg = hermite_gauss_basis(g, 1560.0, 45.0, 6);
  const auto id = nullifier_lo_masks(ClusterUnitary(AdjacencyMatrix(MatrixXd::Zero(4, 4))), hg);
  for (Eigen::Index k = 0; k < 4; ++k)
    EXPECT_NEAR(std::abs(inner_product(id[static_cast<std::size_t>(k)], hg.mode(k))), 1.0, 1e-12);

  const auto v = preset_adjacency("linear4");
  const ClusterUnitary u(v);
  const auto masks = nullifier_lo_masks(u, hg);
  ASSERT_EQ(masks.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_NEAR(std::abs(inner_product(masks[i], masks[j])), i == j ? 1.0 : 0.0, 1e-10);

  // node quadratures measured through the homodyne model equal the cluster CM
  const ModeBasis first4(g, hg.amplitudes().leftCols(4), "hg4", Orthogonality::orthonormal);
  const auto cm = squeezed_vacuum(SqueezingSpectrum({0.6, 0.5, 0.4, 0.3}));
  const auto nodes = change_basis(cm, u.basis_change());
  for (Eigen::Index j = 0; j < 4; ++j) {
    const auto& lo = masks[static_cast<std::size_t>(j)];
    EXPECT_NEAR(homodyne_variance(cm, first4, lo, 0.0).variance, nodes(j, j), 1e-10);
    EXPECT_NEAR(homodyne_variance(cm, first4, lo, 0.5 * kPi).variance, nodes(4 + j, 4 + j), 1e-10);
  }

  const auto star = nullifier_lo_masks(ClusterUnitary(preset_adjacency("star")), hg);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_GT(std::abs(inner_product(hg.mode(k), star[0])), 0.1);
  EXPECT_THROW(nullifier_lo_masks(ClusterUnitary(preset_adjacency("linear8")), hg), Error);
}
