#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sqsim/core.hpp"

namespace sqsim {

/// Homodyne efficiency factors. eta_mod is the squared mode-matching
/// visibility and eta_el = 1 - 1/SNR with SNR the linear clearance.
class EfficiencyBudget {
 public:
  EfficiencyBudget(double eta_pd, double eta_opt, double eta_mod, double eta_el)
      : pd_(eta_pd), opt_(eta_opt), mod_(eta_mod), el_(eta_el) {
    check(pd_, "eta_pd");
    check(opt_, "eta_opt");
    check(mod_, "eta_mod");
    check(el_, "eta_el");
  }

  static EfficiencyBudget from_visibility_snr(double eta_pd, double eta_opt, double visibility, double snr_db) {
    check(visibility, "visibility");
    return EfficiencyBudget(eta_pd, eta_opt, visibility * visibility, electronic_efficiency(snr_db));
  }

  /// 1 - 10^{-snr_db/10}; +inf gives 1.
  static double electronic_efficiency(double snr_db) {
    detail::require(!std::isnan(snr_db), Errc::invalid_argument, "snr_db is NaN");
    detail::require(snr_db >= 0.0, Errc::out_of_range, "electronic clearance must be >= 0 dB");
    return 1.0 - std::pow(10.0, -snr_db / 10.0);
  }

  [[nodiscard]] double eta_pd() const noexcept { return pd_; }
  [[nodiscard]] double eta_opt() const noexcept { return opt_; }
  [[nodiscard]] double eta_mod() const noexcept { return mod_; }
  [[nodiscard]] double eta_el() const noexcept { return el_; }

 private:
  static void check(double x, const char* name) {
    detail::require(x >= 0.0 && x <= 1.0, Errc::out_of_range, std::string(name) + " must lie in [0, 1]");
  }

  double pd_, opt_, mod_, el_;
};

inline double total_efficiency(const EfficiencyBudget& b) {
  return b.eta_pd() * b.eta_el() * b.eta_opt() * b.eta_mod();
}

enum class GainBranch { plus, minus };

/// G = exp(+-2 sqrt(eta_psa P)), eta_psa in 1/W and P in W.
inline double gain_model(double eta_psa, double p_w, GainBranch branch) {
  detail::require(eta_psa >= 0.0 && p_w >= 0.0, Errc::invalid_argument, "eta_psa and pump power must be >= 0");
  const double e = 2.0 * std::sqrt(eta_psa * p_w);
  return std::exp(branch == GainBranch::plus ? e : -e);
}

struct GainSample {
  double power_w;
  double gain;
};

struct GainFit {
  double eta_psa;
  /// RMS residual of ln G.
  double residual_rms;
  int n_samples;
};

/// Least squares of ln G = +-s sqrt(P) through the origin; eta = (s/2)^2.
inline GainFit fit_gain(const std::vector<GainSample>& samples, GainBranch branch) {
  double suu = 0.0, suy = 0.0;
  int used = 0;
  for (const auto& s : samples) {
    detail::require(s.power_w >= 0.0 && std::isfinite(s.power_w), Errc::invalid_argument, "pump power must be >= 0");
    detail::require(s.gain > 0.0 && std::isfinite(s.gain), Errc::invalid_argument, "gain must be > 0");
    const double u = std::sqrt(s.power_w);
    const double y = (branch == GainBranch::plus ? 1.0 : -1.0) * std::log(s.gain);
    suu += u * u;
    suy += u * y;
    used += s.power_w > 0.0 ? 1 : 0;
  }
  detail::require(used >= 1 && suu > 0.0, Errc::degenerate_fit, "gain fit needs samples with non-zero pump power");
  detail::require(used >= 2, Errc::degenerate_fit, "gain fit needs at least two samples with non-zero pump power");
  const double slope = suy / suu;
  detail::require(slope >= 0.0, Errc::invalid_argument, "gain data trends opposite to the requested branch");
  double ss = 0.0;
  for (const auto& s : samples) {
    const double r = (branch == GainBranch::plus ? 1.0 : -1.0) * std::log(s.gain) - slope * std::sqrt(s.power_w);
    ss += r * r;
  }
  const double half = slope / 2.0;
  return {half * half, std::sqrt(ss / static_cast<double>(samples.size())), static_cast<int>(samples.size())};
}

}  // namespace sqsim
