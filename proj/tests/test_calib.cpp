#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "sqsim/calib.hpp"

using namespace sqsim;

TEST(Efficiency, ReferenceBudget) {
  const auto b = EfficiencyBudget::from_visibility_snr(0.85, 1.0, 0.77, 20.0);
  EXPECT_NEAR(b.eta_mod(), 0.5929, 1e-15);
  EXPECT_EQ(b.eta_el(), 0.99);
  EXPECT_NEAR(total_efficiency(b), 0.85 * 0.99 * 0.5929, 1e-15);
  EXPECT_NEAR(total_efficiency(b), 0.4989, 1e-4);
  EXPECT_EQ(total_efficiency(EfficiencyBudget(1, 1, 1, 1)), 1.0);
  EXPECT_EQ(EfficiencyBudget::electronic_efficiency(std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_EQ(EfficiencyBudget::electronic_efficiency(0.0), 0.0);
  EXPECT_THROW(EfficiencyBudget(1.1, 1, 1, 1), Error);
  EXPECT_THROW(EfficiencyBudget(1, -0.1, 1, 1), Error);
  EXPECT_THROW(EfficiencyBudget::from_visibility_snr(0.85, 1.0, 1.2, 20.0), Error);
  EXPECT_THROW(EfficiencyBudget::electronic_efficiency(-3.0), Error);
}

TEST(Efficiency, Monotonicity) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    double f[4] = {u(rng), u(rng), u(rng), u(rng)};
    const double base = total_efficiency(EfficiencyBudget(f[0], f[1], f[2], f[3]));
    const int k = t % 4;
    f[k] = f[k] + (1.0 - f[k]) * u(rng);
    EXPECT_GE(total_efficiency(EfficiencyBudget(f[0], f[1], f[2], f[3])), base);
  }
  double prev = -1.0;
  for (double snr = 0.0; snr <= 40.0; snr += 0.5) {
    const double e = EfficiencyBudget::electronic_efficiency(snr);
    EXPECT_GT(e, prev);
    prev = e;
  }
}

TEST(Gain, Model) {
  for (auto br : {GainBranch::plus, GainBranch::minus}) EXPECT_EQ(gain_model(0.33, 0.0, br), 1.0);
  EXPECT_NEAR(gain_model(0.33, 0.004, GainBranch::plus), 1.0754, 1e-4);
  EXPECT_NEAR(gain_model(0.33, 0.004, GainBranch::minus), 0.9299, 1e-4);
  // oracle: direct evaluation of the exponent
  EXPECT_NEAR(gain_model(0.33, 0.004, GainBranch::plus), std::exp(2.0 * std::sqrt(0.00132)), 1e-15);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const double e = u(rng), p = u(rng);
    EXPECT_NEAR(gain_model(e, p, GainBranch::plus) * gain_model(e, p, GainBranch::minus), 1.0, 1e-14);
  }
  EXPECT_THROW(gain_model(-1.0, 1.0, GainBranch::plus), Error);
}

TEST(GainFit, NoiselessRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> eta(0.01, 2.0), pw(0.001, 1.0);
  for (int t = 0; t < 100; ++t) {
    const double e = eta(rng);
    for (auto br : {GainBranch::plus, GainBranch::minus}) {
      std::vector<GainSample> s;
      for (int k = 0; k < 3 + t % 5; ++k) {
        const double p = pw(rng);
        s.push_back({p, gain_model(e, p, br)});
      }
      const auto fit = fit_gain(s, br);
      EXPECT_NEAR(fit.eta_psa / e, 1.0, 1e-10);
      EXPECT_LT(fit.residual_rms, 1e-12);
    }
  }
  std::vector<GainSample> mw;
  for (int k = 1; k <= 10; ++k) mw.push_back({k * 1e-3, gain_model(0.33, k * 1e-3, GainBranch::plus)});
  EXPECT_NEAR(fit_gain(mw, GainBranch::plus).eta_psa / 0.33, 1.0, 1e-10);
}

TEST(GainFit, TwoPointsInterpolateExactly) {
  const std::vector<GainSample> s{{0.2, gain_model(0.5, 0.2, GainBranch::minus)},
                                  {0.7, gain_model(0.5, 0.7, GainBranch::minus)}};
  const auto fit = fit_gain(s, GainBranch::minus);
  EXPECT_NEAR(fit.eta_psa, 0.5, 1e-12);
  EXPECT_NEAR(fit.residual_rms, 0.0, 1e-14);
}

TEST(GainFit, Errors) {
  try {
    fit_gain({{0.0, 1.0}, {0.0, 1.0}}, GainBranch::plus);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_fit);
  }
  EXPECT_THROW(fit_gain({{0.1, 1.2}}, GainBranch::plus), Error);
  EXPECT_THROW(fit_gain({{0.1, 0.0}, {0.2, 1.0}}, GainBranch::plus), Error);
  EXPECT_THROW(fit_gain({{0.1, 0.8}, {0.2, 0.7}}, GainBranch::plus), Error);
}

// 5% multiplicative noise, 10 powers over 100-1000 mW: at least 45 of 50
// seeds land within 10% of the true efficiency.
TEST(GainFit, NoisyMonteCarlo) {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<GainSample> s;
    for (int k = 1; k <= 10; ++k) {
      const double p = 0.1 * k;
      s.push_back({p, gain_model(0.33, p, GainBranch::plus) * (1.0 + noise(rng))});
    }
    good += std::abs(fit_gain(s, GainBranch::plus).eta_psa / 0.33 - 1.0) <= 0.1 ? 1 : 0;
  }
  EXPECT_GE(good, 45);
}
