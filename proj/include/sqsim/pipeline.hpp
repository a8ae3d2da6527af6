#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sqsim/calib.hpp"
#include "sqsim/cluster.hpp"
#include "sqsim/config.hpp"
#include "sqsim/entanglement.hpp"
#include "sqsim/gaussian.hpp"
#include "sqsim/modes.hpp"
#include "sqsim/reference.hpp"
#include "sqsim/spdc.hpp"
#include "sqsim/trace.hpp"

// Config-driven assembly of the simulated experiment.
namespace sqsim::pipeline {

inline GridPtr build_grid(const GridConfig& g) {
  const auto n = static_cast<std::size_t>(std::llround((g.hi_nm - g.lo_nm) / g.step_nm)) + 1;
  return make_grid(FrequencyGrid::uniform(g.lo_nm, g.hi_nm, n, g.center_nm));
}

inline EfficiencyBudget build_budget(const BudgetConfig& b) {
  return EfficiencyBudget::from_visibility_snr(b.eta_pd, b.eta_opt, b.visibility, b.snr_db);
}

/// Independent noise seed per (run seed, basis, mode).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  CounterRng r(seed, index, 0x5eed0000ULL + tag);
  return r.next();
}

struct Source {
  GridPtr grid;
  PumpEnvelope pump;
  PhaseMatchModel phasematch;
  SchmidtDecomposition schmidt;
  ModeBasis supermodes;
  HgFit leading;
  EfficiencyBudget budget;
  double eta;
  double pump_scale;
  SqueezingSpectrum r;
  CovarianceMatrix pure;   // supermode basis
  CovarianceMatrix lossy;  // after the homodyne efficiency
};

inline Source build_source(const ExperimentConfig& cfg) {
  auto grid = build_grid(cfg.grid);
  PumpEnvelope pump(cfg.pump.center_nm, cfg.pump.fwhm_nm,
                    cfg.pump.shape == "sech2" ? PumpShape::sech2 : PumpShape::gaussian);
  const auto& p = cfg.phasematch;
  PhaseMatchModel pm(p.length_mm, MismatchCoefficients{p.c00, p.c10, p.c01, p.c20, p.c02, p.c11});
  if (p.fit_hg0_width_nm > 0.0) pm = fit_quadratic_mismatch(pump, pm, grid, p.fit_hg0_width_nm).model;
  auto sd = schmidt_decompose(build_jsa(pump, pm, grid, grid), cfg.max_modes);
  auto sm = supermode_basis(sd);
  const auto leading = leading_mode_width(sd, 2.0 * cfg.pump.center_nm, cfg.basis.width_nm);
  const auto budget = build_budget(cfg.budget);
  const double eta = total_efficiency(budget);
  const double g = cfg.pump_scale.mode == "fixed" ? cfg.pump_scale.value
                                                  : pump_scale_for_squeezing(sd, cfg.pump_scale.target_db, eta);
  auto r = squeezing_spectrum(sd, g);
  auto pure = squeezed_vacuum(r);
  auto lossy = apply_loss(pure, eta);
  return {std::move(grid), pump, std::move(pm), std::move(sd), std::move(sm), leading, budget, eta, g,
          std::move(r),    std::move(pure), std::move(lossy)};
}

struct CurveRow {
  int mode;
  double sq_db, antisq_db;
  double trace_sq_db = std::nan(""), trace_antisq_db = std::nan("");
};

struct Bases {
  ModeBasis hg;
  std::optional<ModeBasis> flat;
};

inline Bases build_bases(const ExperimentConfig& cfg, const GridPtr& grid) {
  auto hg = hermite_gauss_basis(grid, cfg.basis.center_nm, cfg.basis.width_nm, cfg.basis.hg_modes,
                                width_convention(cfg.basis.width_convention));
  std::optional<ModeBasis> flat;
  if (cfg.basis.flat_modes > 0) flat = flat_basis(hg, cfg.basis.flat_modes);
  return {std::move(hg), std::move(flat)};
}

inline ScanSettings scan_settings(const TraceConfig& t) {
  return {t.rate_rad_per_s, t.duration_s, t.samples, t.segments};
}

/// Homodyne squeezing/antisqueezing of every mode of `basis` measured on
/// the source state; `tag` separates the noise streams of different bases.
inline std::vector<CurveRow> squeezing_curve(const ExperimentConfig& cfg, const Source& src, const ModeBasis& basis,
                                             std::uint64_t tag) {
  std::vector<CurveRow> rows;
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    const auto lo = basis.mode(k);
    const auto ex = homodyne_extrema(src.lossy, src.supermodes, lo);
    CurveRow row{static_cast<int>(k), to_db(ex.min_variance), to_db(ex.max_variance)};
    if (cfg.trace.enabled) {
      const NoiseSettings noise{cfg.trace.shot_samples, derive_seed(cfg.seed, tag, static_cast<std::uint64_t>(k))};
      const auto tr = synth_phase_trace(src.lossy, src.supermodes, lo, scan_settings(cfg.trace), noise);
      const auto got = extract_extrema(tr, {cfg.trace.sg_window, cfg.trace.sg_order}, cfg.trace.extrema_used);
      row.trace_sq_db = got.sq_db;
      row.trace_antisq_db = got.antisq_db;
    }
    rows.push_back(row);
  }
  return rows;
}

struct FrexelState {
  ModeBasis basis;
  CovarianceMatrix cm;
  BasisChangeKind kind;
};

inline FrexelState frexel_state(const ExperimentConfig& cfg, const Source& src) {
  auto fx = frexel_basis(src.grid, cfg.frexel.lo_nm, cfg.frexel.hi_nm, cfg.frexel.bands);
  const auto bc = BasisChange::between(fx, src.supermodes);
  auto cm = change_basis(src.lossy, bc);
  return {std::move(fx), std::move(cm), bc.kind()};
}

inline ModeBasis frexel_only(const ExperimentConfig& cfg) {
  return frexel_basis(build_grid(cfg.grid), cfg.frexel.lo_nm, cfg.frexel.hi_nm, cfg.frexel.bands);
}

struct RankResult {
  ModeBasis hg;
  ClippingWindow window;
  double fit_residual;
  RankReport report;
};

inline RankResult rank_study(const ExperimentConfig& cfg) {
  const auto grid = build_grid(cfg.grid);
  auto hg = hermite_gauss_basis(grid, cfg.basis.center_nm, cfg.basis.width_nm, cfg.basis.hg_modes,
                                width_convention(cfg.basis.width_convention));
  ClippingWindow window(cfg.clipping.lo_nm, cfg.clipping.hi_nm);
  double residual = std::nan("");
  if (cfg.clipping.fit_to_reference) {
    const auto fit = fit_clipping_window(hg, reference::kClippedSingularValues, cfg.clipping.coarse_step_nm);
    window = fit.window;
    residual = fit.residual;
  }
  auto report = rank_analysis(apply_clipping(hg, window, true), cfg.clipping.rank_threshold);
  return {std::move(hg), window, residual, std::move(report)};
}

struct ClusterResult {
  AdjacencyMatrix adjacency;
  NullifierReport report;
};

inline std::vector<ClusterResult> cluster_study(const ExperimentConfig& cfg, const Source& src) {
  std::vector<AdjacencyMatrix> graphs;
  for (const auto& name : cfg.cluster.topologies) graphs.push_back(preset_adjacency(name));
  if (!cfg.cluster.adjacency_csv.empty()) graphs.push_back(io::read_adjacency_csv(cfg.cluster.adjacency_csv));
  std::vector<ClusterResult> out;
  for (auto& v : graphs) {
    ClusterOptions opt;
    opt.eta.assign(static_cast<std::size_t>(v.size()), src.eta);
    if (!cfg.cluster.node_permutation.empty()) {
      detail::require(static_cast<Eigen::Index>(cfg.cluster.node_permutation.size()) >= v.size(), Errc::config,
                      "cluster.node_permutation: shorter than graph '" + v.name() + "'");
      opt.permutation.assign(cfg.cluster.node_permutation.begin(), cfg.cluster.node_permutation.begin() + v.size());
    }
    auto rep = nullifier_report(v, src.r, opt);
    out.push_back({std::move(v), std::move(rep)});
  }
  return out;
}

}  // namespace sqsim::pipeline
