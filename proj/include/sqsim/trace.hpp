#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "sqsim/core.hpp"
#include "sqsim/gaussian.hpp"

namespace sqsim {

/// Counter-based generator: the stream for (seed, index, stream) is
/// independent of evaluation order. splitmix64 over a mixed key.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0)
      : state_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) ^ mix(index + 0x9e3779b97f4a7c15ULL) ^
                   mix(stream * 0xbb67ae8584caa73bULL + 1))) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform in (0, 1).
  double uniform() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal (Marsaglia polar method).
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Triangular piezo ramp: `segments` monotone sweeps alternating up/down.
struct ScanSettings {
  double rate_rad_per_s = 16.0 * kPi;
  double duration_s = 1.0;
  int samples = 4800;
  int segments = 2;
};

struct NoiseSettings {
  /// Gaussian draws per trace point; 0 gives the noiseless trace.
  int shot_samples_per_point = 10000;
  std::uint64_t seed = 0;
};

struct PhaseScanTrace {
  std::vector<double> phase;  // rad
  std::vector<double> variance_db;
  std::uint64_t noise_seed = 0;
  /// Sample indices where the ramp reverses (trace ends included).
  std::vector<std::size_t> vertices;
};

namespace detail {

/// Gamma(shape, 1) variate (Marsaglia-Tsang; shape < 1 via the U^{1/a}
/// boost).
inline double gamma_variate(CounterRng& rng, double shape) {
  if (shape < 1.0) return gamma_variate(rng, shape + 1.0) * std::pow(rng.uniform(), 1.0 / shape);
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

/// Unbiased sample variance of n Gaussian draws with the given variance.
/// Sampled from its exact law, variance * chi2(n - 1) / (n - 1), so the cost
/// does not grow with n.
inline double sampled_variance(CounterRng& rng, double variance, int n) {
  const double dof = n - 1.0;
  return variance * 2.0 * gamma_variate(rng, 0.5 * dof) / dof;
}

}  // namespace detail

/// Phase ramp with the true variance V(phi) of the LO quadrature, estimated
/// per point from `shot_samples_per_point` draws and referenced to an
/// equally estimated shot-noise level.
inline PhaseScanTrace synth_phase_trace(const CovarianceMatrix& cm, const ModeBasis& basis, const SpectralMode& lo,
                                        const ScanSettings& scan, const NoiseSettings& noise) {
  detail::require(scan.samples >= 10, Errc::invalid_argument, "a trace needs at least 10 samples");
  detail::require(scan.segments >= 1 && scan.duration_s > 0.0 && scan.rate_rad_per_s > 0.0, Errc::invalid_argument,
                  "invalid scan settings");
  detail::require(noise.shot_samples_per_point == 0 || noise.shot_samples_per_point >= 2, Errc::invalid_argument,
                  "shot_samples_per_point must be 0 or >= 2");
  const auto ex = homodyne_extrema(cm, basis, lo);

  const auto n = static_cast<std::size_t>(scan.samples);
  PhaseScanTrace tr;
  tr.noise_seed = noise.seed;
  tr.phase.resize(n);
  tr.variance_db.resize(n);
  const double seg = scan.duration_s / scan.segments;
  for (int s = 0; s <= scan.segments; ++s)
    tr.vertices.push_back(static_cast<std::size_t>(std::lround(s * seg / scan.duration_s * static_cast<double>(n - 1))));

  for (std::size_t i = 0; i < n; ++i) {
    const double t = scan.duration_s * static_cast<double>(i) / static_cast<double>(n - 1);
    const int s = std::min(static_cast<int>(t / seg), scan.segments - 1);
    const double tau = t - s * seg;
    const double phi = scan.rate_rad_per_s * (s % 2 == 0 ? tau : seg - tau);
    tr.phase[i] = phi;
    const double c = std::cos(phi - ex.phase_max);
    const double v = ex.max_variance * c * c + ex.min_variance * (1.0 - c * c);
    if (noise.shot_samples_per_point == 0) {
      tr.variance_db[i] = to_db(v);
    } else {
      CounterRng signal(noise.seed, i, 0);
      CounterRng shot(noise.seed, i, 1);
      const double sv = detail::sampled_variance(signal, v, noise.shot_samples_per_point);
      const double s0 = detail::sampled_variance(shot, kVacuumVariance, noise.shot_samples_per_point);
      tr.variance_db[i] = 10.0 * std::log10(sv / s0);
    }
  }
  return tr;
}

struct SavitzkyGolay {
  int window = 31;
  int poly_order = 3;
};

/// Least-squares polynomial smoothing; the first and last window/2 points
/// are evaluated from the nearest full window.
inline std::vector<double> savitzky_golay(const std::vector<double>& y, const SavitzkyGolay& sg) {
  detail::require(sg.window % 2 == 1 && sg.window > sg.poly_order && sg.poly_order >= 0, Errc::invalid_argument,
                  "Savitzky-Golay window must be odd and exceed the polynomial order");
  const int h = sg.window / 2;
  const auto n = static_cast<int>(y.size());
  detail::require(n >= sg.window, Errc::invalid_argument, "trace shorter than the smoothing window");

  MatrixXd a(sg.window, sg.poly_order + 1);
  for (int i = 0; i < sg.window; ++i)
    for (int p = 0; p <= sg.poly_order; ++p) a(i, p) = std::pow(static_cast<double>(i - h) / h, p);
  // rows of `proj` evaluate the fitted polynomial at each window offset
  const MatrixXd pinv = (a.transpose() * a).ldlt().solve(a.transpose());
  const MatrixXd proj = a * pinv;

  std::vector<double> out(y.size());
  for (int i = 0; i < n; ++i) {
    const int start = std::clamp(i - h, 0, n - sg.window);
    const int row = i - start;
    double acc = 0.0;
    for (int k = 0; k < sg.window; ++k) acc += proj(row, k) * y[static_cast<std::size_t>(start + k)];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

struct ExtremaResult {
  double sq_db = 0.0;
  double antisq_db = 0.0;
  int n_minima = 0;
  int n_maxima = 0;
};

/// Smooths the trace, finds local extrema over +-window/2 samples (ignoring
/// any within window/2 of a ramp vertex), refines each with a parabola and
/// averages the `max_used` deepest minima and highest maxima. Needs at
/// least two of each.
inline ExtremaResult extract_extrema(const PhaseScanTrace& tr, const SavitzkyGolay& sg = {}, int max_used = 15) {
  detail::require(tr.phase.size() == tr.variance_db.size(), Errc::dimension_mismatch,
                  "trace phase and variance lengths differ");
  detail::require(max_used >= 1, Errc::invalid_argument, "max_used must be >= 1");
  const std::vector<double> y = savitzky_golay(tr.variance_db, sg);
  const int h = sg.window / 2;
  const auto n = static_cast<int>(y.size());

  std::vector<std::size_t> vertices = tr.vertices;
  vertices.push_back(0);
  vertices.push_back(y.size() - 1);
  const auto near_vertex = [&](int i) {
    return std::any_of(vertices.begin(), vertices.end(),
                       [&](std::size_t v) { return std::abs(i - static_cast<int>(v)) <= h; });
  };
  const auto refine = [&](int i) {
    const double den = y[static_cast<std::size_t>(i + 1)] - 2.0 * y[static_cast<std::size_t>(i)] +
                       y[static_cast<std::size_t>(i - 1)];
    if (den == 0.0) return y[static_cast<std::size_t>(i)];
    const double num = y[static_cast<std::size_t>(i + 1)] - y[static_cast<std::size_t>(i - 1)];
    return y[static_cast<std::size_t>(i)] - num * num / (8.0 * den);
  };

  std::vector<double> minima, maxima;
  for (int i = 1; i + 1 < n; ++i) {
    if (near_vertex(i)) continue;
    bool is_min = true, is_max = true;
    for (int j = std::max(0, i - h); j <= std::min(n - 1, i + h) && (is_min || is_max); ++j) {
      if (j == i) continue;
      const double a = y[static_cast<std::size_t>(j)], b = y[static_cast<std::size_t>(i)];
      // ties resolve to the leftmost sample
      if (j < i ? a <= b : a < b) is_min = false;
      if (j < i ? a >= b : a > b) is_max = false;
    }
    if (is_min) minima.push_back(refine(i));
    if (is_max) maxima.push_back(refine(i));
  }
  detail::require(minima.size() >= 2 && maxima.size() >= 2, Errc::insufficient_extrema,
                  "need at least two usable minima and maxima");
  std::sort(minima.begin(), minima.end());
  std::sort(maxima.begin(), maxima.end(), std::greater<>());
  const auto take = [&](const std::vector<double>& v) {
    const std::size_t k = std::min(v.size(), static_cast<std::size_t>(max_used));
    return std::pair{std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k),
                     static_cast<int>(k)};
  };
  const auto [sq, nmin] = take(minima);
  const auto [asq, nmax] = take(maxima);
  return {sq, asq, nmin, nmax};
}

}  // namespace sqsim
