#include <cmath>

#include <gtest/gtest.h>

#include "sqsim/reference.hpp"
#include "sqsim/spdc.hpp"

using namespace sqsim;

namespace {

GridPtr telecom_grid(double step = 0.8) {
  const auto n = static_cast<std::size_t>(std::lround(320.0 / step)) + 1;
  return make_grid(FrequencyGrid::uniform(1400.0, 1720.0, n, 1560.0));
}

PumpEnvelope reference_pump() {
  return PumpEnvelope(reference::kPumpCenterNm, reference::kPumpBandwidthNm);
}

// Pump-limited source: no linear mismatch, strong quadratic term.
JSAGrid pump_limited_jsa(double step) {
  const auto n = static_cast<std::size_t>(std::lround(220.0 / step)) + 1;
  const auto g = make_grid(FrequencyGrid::uniform(1450.0, 1670.0, n, 1560.0));
  MismatchCoefficients c;
  c.c20 = c.c02 = -3e-4;
  return build_jsa(reference_pump(), PhaseMatchModel(15.0, c), g, g);
}

double double_gaussian(double x, double y, double sp, double sm) {
  return std::exp(-(x + y) * (x + y) / (4.0 * sp * sp)) * std::exp(-(x - y) * (x - y) / (4.0 * sm * sm));
}

}  // namespace

TEST(Pump, ShapesPeakAtCenterWithDeclaredFwhm) {
  for (const auto shape : {PumpShape::gaussian, PumpShape::sech2}) {
    const PumpEnvelope p(780.0, 2.0, shape);
    const double wp = wavelength_to_omega(780.0);
    const double dw = 2.0 * kPi * kSpeedOfLight * 2.0 / (780.0 * 780.0);
    EXPECT_DOUBLE_EQ(p.amplitude(wp), 1.0);
    EXPECT_NEAR(std::pow(p.amplitude(wp + 0.5 * dw), 2), 0.5, 1e-12);
  }
  EXPECT_THROW(PumpEnvelope(780.0, 0.0), Error);
}

TEST(Pump, TabulatedInterpolatesInWavelength) {
  const auto p = PumpEnvelope::tabulated({779.0, 780.0, 781.0}, {0.0, 1.0, 0.0});
  EXPECT_NEAR(p.amplitude(wavelength_to_omega(780.5)), 0.5, 1e-9);
  EXPECT_EQ(p.amplitude(wavelength_to_omega(782.0)), 0.0);
  EXPECT_DOUBLE_EQ(p.center_nm(), 780.0);
}

TEST(BuildJsa, ZeroMismatchIsPumpRidge) {
  const auto g = telecom_grid(2.0);
  const auto pump = reference_pump();
  const auto jsa = build_jsa(pump, PhaseMatchModel(15.0, {}), g, g);
  EXPECT_NEAR(jsa.weighted_norm(), 1.0, 1e-12);
  const VectorXd o = g->omega();
  // ratio J / alpha(ws + wi) is a constant
  const double ref = jsa.values()(80, 80).real() / pump.amplitude(o[80] + o[80]);
  for (Eigen::Index a = 0; a < o.size(); a += 7)
    for (Eigen::Index b = 0; b < o.size(); b += 5) {
      const double alpha = pump.amplitude(o[a] + o[b]);
      if (alpha > 1e-3) {
        EXPECT_NEAR(jsa.values()(a, b).real() / alpha, ref, 1e-9 * ref);
      }
    }
}

TEST(BuildJsa, AntiDiagonalElongation) {
  const auto g = telecom_grid(2.0);
  MismatchCoefficients c;
  c.c10 = c.c01 = 0.1;
  const auto jsa = build_jsa(reference_pump(), PhaseMatchModel(15.0, c), g, g);
  const Eigen::Index mid = 80;  // 1560 nm
  for (Eigen::Index d = 3; d <= 12; d += 3) {
    const double anti = std::abs(jsa.values()(mid + d, mid - d));
    const double diag = std::abs(jsa.values()(mid + d, mid + d));
    EXPECT_GT(anti, 10.0 * diag) << d;
  }
}

TEST(BuildJsa, EmptyOverlap) {
  const auto g = make_grid(FrequencyGrid::uniform(1000.0, 1100.0, 101));
  try {
    build_jsa(reference_pump(), PhaseMatchModel(15.0, {}), g, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_overlap);
  }
  EXPECT_THROW(PhaseMatchModel(0.0, {}), Error);
}

TEST(Schmidt, SeparableJsaIsRankOne) {
  const auto g = telecom_grid(2.0);
  const auto jsa = tabulate_jsa(g, g, [](const JointSample& s) {
    return cplx(std::exp(-std::pow((s.nm_s - 1550.0) / 20.0, 2)) * std::exp(-std::pow((s.nm_i - 1570.0) / 30.0, 2)));
  });
  const auto sd = schmidt_decompose(jsa);
  ASSERT_EQ(sd.coefficients.size(), 1u);
  EXPECT_NEAR(sd.coefficients[0], 1.0, 1e-12);
  EXPECT_NEAR(sd.schmidt_number, 1.0, 1e-12);
  EXPECT_LT(sd.reconstruction_error, 1e-7);
}

TEST(Schmidt, DoubleGaussianOracle) {
  const double sp = 10.0, sm = 3.0, c = 1560.0;
  const auto g = make_grid(FrequencyGrid::uniform(1480.0, 1640.0, 801, c));
  const auto jsa = tabulate_jsa(g, g, [&](const JointSample& s) {
    return cplx(double_gaussian(s.nm_s - c, s.nm_i - c, sp, sm));
  });
  const auto sd = schmidt_decompose(jsa);
  const double mu = std::abs(sp - sm) / (sp + sm);
  for (int k = 1; k <= 10; ++k)
    EXPECT_NEAR(sd.coefficients[k] / sd.coefficients[k - 1] / mu, 1.0, 1e-6) << k;
  // Mehler kernel: modes are Hermite functions of x / sqrt(sp sm)
  const auto hg = hermite_gauss_basis(g, c, 2.0 * std::sqrt(2.0 * sp * sm), 11);
  const MatrixXcd o = overlap_matrix(hg, sd.signal_modes);
  for (int k = 0; k <= 10; ++k) EXPECT_GT(std::abs(o(k, k)), 1.0 - 1e-6) << k;
  // closed-form Schmidt number: (1 + mu^2) / (1 - mu^2)
  EXPECT_NEAR(sd.schmidt_number, (1.0 + mu * mu) / (1.0 - mu * mu), 1e-6);
}

TEST(Schmidt, ParsevalOrthonormalityAndTail) {
  const auto sd = schmidt_decompose(pump_limited_jsa(1.0));
  double s2 = 0.0;
  for (double l : sd.coefficients) s2 += l * l;
  EXPECT_NEAR(s2, 1.0, 1e-10);
  EXPECT_LT(sd.tail_mass, 1e-6);
  EXPECT_TRUE(std::is_sorted(sd.coefficients.rbegin(), sd.coefficients.rend()));
  for (const auto* b : {&sd.signal_modes, &sd.idler_modes}) {
    const MatrixXcd gram = b->gram();
    EXPECT_LT((gram - MatrixXcd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_LT(sd.reconstruction_error, 1e-3);
}

TEST(Schmidt, SignConventionAndSymmetricModes) {
  // needs a non-degenerate spectrum: degenerate pairs may mix freely
  const auto g = telecom_grid(1.0);
  MismatchCoefficients c;
  c.c10 = c.c01 = 0.1;
  c.c20 = c.c02 = -5e-5;
  const auto sd = schmidt_decompose(build_jsa(reference_pump(), PhaseMatchModel(15.0, c), g, g), 20);
  for (Eigen::Index k = 0; k < sd.signal_modes.size(); ++k) {
    const VectorXcd h = sd.signal_modes.column(k);
    Eigen::Index i = 0;
    h.cwiseAbs().maxCoeff(&i);
    EXPECT_EQ(h[i].imag(), 0.0);
    EXPECT_GT(h[i].real(), 0.0);
    const VectorXcd gk = sd.idler_modes.column(k);
    const double dev = std::min((h - gk).cwiseAbs().maxCoeff(), (h + gk).cwiseAbs().maxCoeff());
    EXPECT_LT(dev / h.cwiseAbs().maxCoeff(), 1e-8) << k;
  }
}

TEST(Schmidt, ConvergesUnderGridRefinement) {
  const auto a = schmidt_decompose(pump_limited_jsa(1.0));
  const auto b = schmidt_decompose(pump_limited_jsa(0.5));
  for (int k = 0; k < 10; ++k)
    EXPECT_LT(std::abs(a.coefficients[k] - b.coefficients[k]) / b.coefficients[k], 1e-4) << k;
}

TEST(Supermodes, TakagiPhasesReconstructJsa) {
  const auto g = telecom_grid(2.0);
  MismatchCoefficients c;
  c.c10 = c.c01 = 0.1;
  c.c20 = c.c02 = -5e-5;
  const auto jsa = build_jsa(reference_pump(), PhaseMatchModel(15.0, c), g, g);
  const auto sd = schmidt_decompose(jsa, 161);
  const auto u = supermode_basis(sd);
  EXPECT_TRUE(u.orthonormal());
  // J = sum lambda_k u_k(s) u_k(i), no conjugation
  MatrixXcd recon = MatrixXcd::Zero(jsa.values().rows(), jsa.values().cols());
  for (Eigen::Index k = 0; k < u.size(); ++k)
    recon += sd.coefficients[static_cast<std::size_t>(k)] * u.column(k) * u.column(k).transpose();
  const double scale = std::sqrt(1.0 - sd.tail_mass);
  EXPECT_LT((recon * scale - jsa.values()).cwiseAbs().maxCoeff(), 1e-6 * jsa.values().cwiseAbs().maxCoeff());
  // odd HG-like modes pick up a quarter-period phase
  EXPECT_NEAR(std::abs(u.column(0).imag().maxCoeff()), 0.0, 1e-12);
  EXPECT_LT(u.column(1).real().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Supermodes, AsymmetricJsaRejected) {
  const auto g = telecom_grid(2.0);
  const auto jsa = tabulate_jsa(g, g, [](const JointSample& s) {
    const double x = s.nm_s - 1560.0, y = s.nm_i - 1560.0;
    return cplx(std::exp(-std::pow(x / 20.0, 2) - std::pow(y / 35.0, 2) - x * y / 900.0));
  });
  EXPECT_THROW(supermode_basis(schmidt_decompose(jsa)), Error);
}

TEST(Squeezing, SpectrumScalesCoefficients) {
  const auto sd = schmidt_decompose(pump_limited_jsa(1.0));
  const auto vac = squeezing_spectrum(sd, 0.0);
  for (double r : vac.r()) EXPECT_EQ(r, 0.0);
  const auto sq = squeezing_spectrum(sd, 2.0);
  for (std::size_t k = 0; k < sq.size(); ++k) EXPECT_DOUBLE_EQ(sq[k], 2.0 * sd.coefficients[k]);
  EXPECT_THROW(squeezing_spectrum(sd, -1.0), Error);
  // lambda = [1], g = 1.151 -> about -10 dB
  EXPECT_NEAR(10.0 * std::log10(std::exp(-2.0 * 1.151)), -10.0, 0.01);
}

TEST(Squeezing, PumpScaleHitsTarget) {
  const auto sd = schmidt_decompose(pump_limited_jsa(1.0));
  const double eta = 0.5;
  const double g = pump_scale_for_squeezing(sd, -2.5, eta);
  const double r0 = g * sd.coefficients[0];
  const double v = eta * std::exp(-2.0 * r0) + (1.0 - eta);
  EXPECT_NEAR(10.0 * std::log10(v), -2.5, 1e-12);
  EXPECT_THROW(pump_scale_for_squeezing(sd, -4.0, eta), Error);
}

TEST(Squeezing, ReferenceSourceHasAboutThirtyFourModes) {
  const auto g = telecom_grid(0.8);
  MismatchCoefficients c;
  c.c10 = c.c01 = 0.1;
  const auto fit = fit_quadratic_mismatch(reference_pump(), PhaseMatchModel(reference::kWaveguideLengthMm, c), g,
                                          reference::kHg0WidthNm);
  EXPECT_NEAR(fit.leading.width_nm, 45.0, 1e-3);
  EXPECT_GT(fit.leading.overlap, 0.99);
  const auto sd = schmidt_decompose(build_jsa(reference_pump(), fit.model, g, g), 128);
  EXPECT_NEAR(sd.schmidt_number, 34.0, 0.2 * 34.0);
  EXPECT_LT(sd.tail_mass, 1e-6);
}
