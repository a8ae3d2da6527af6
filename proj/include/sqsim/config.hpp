#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "sqsim/cluster.hpp"
#include "sqsim/core.hpp"
#include "sqsim/io.hpp"
#include "sqsim/modes.hpp"
#include "sqsim/spdc.hpp"

namespace sqsim {

using json = nlohmann::json;

struct GridConfig {
  double lo_nm = 1400.0;
  double hi_nm = 1720.0;
  double step_nm = 0.8;
  double center_nm = 1560.0;
};

struct PumpConfig {
  double center_nm = 780.0;
  double fwhm_nm = 2.0;
  std::string shape = "gaussian";
};

struct PhaseMatchConfig {
  double length_mm = 15.0;
  double c00 = 0.0, c10 = 0.1, c01 = 0.1, c11 = 0.0, c20 = -5.35e-5, c02 = -5.35e-5;
  /// When > 0, c20 = c02 are refitted so the leading Schmidt mode has this
  /// HG0 width (full 1/e amplitude, nm).
  double fit_hg0_width_nm = 45.0;
};

struct PumpScaleConfig {
  std::string mode = "target_db";  // or "fixed"
  double target_db = -2.5;
  double value = 1.0;
};

struct BasisConfig {
  double center_nm = 1560.0;
  double width_nm = 45.0;
  std::string width_convention = "full_width_1e_amplitude";
  int hg_modes = 21;
  int flat_modes = 4;
};

struct FrexelConfig {
  double lo_nm = 1532.0;
  double hi_nm = 1588.0;
  int bands = 8;
};

struct ClippingConfig {
  bool fit_to_reference = true;
  double lo_nm = 1500.0;
  double hi_nm = 1620.0;
  double coarse_step_nm = 4.0;
  double rank_threshold = 0.1;
};

struct BudgetConfig {
  double eta_pd = 0.85;
  double eta_opt = 1.0;
  double visibility = 0.77;
  double snr_db = 20.0;
};

struct ClusterConfig {
  std::vector<std::string> topologies{"linear4", "square", "star", "linear6", "linear8"};
  std::vector<int> node_permutation;
  /// Extra graph read from a CSV 0/1 matrix; empty for none.
  std::string adjacency_csv;
};

struct TraceConfig {
  bool enabled = true;
  int samples = 4800;
  int segments = 2;
  double rate_rad_per_s = 16.0 * kPi;
  double duration_s = 1.0;
  int shot_samples = 10000;
  int sg_window = 31;
  int sg_order = 3;
  int extrema_used = 15;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  GridConfig grid;
  PumpConfig pump;
  PhaseMatchConfig phasematch;
  int max_modes = 128;
  PumpScaleConfig pump_scale;
  BasisConfig basis;
  FrexelConfig frexel;
  ClippingConfig clipping;
  BudgetConfig budget;
  ClusterConfig cluster;
  TraceConfig trace;
  double ppt_tol = 1e-10;
  double supermode_cross_tol = 1e-6;
  std::string output_dir = "out";
};

inline json to_json(const ExperimentConfig& c) {
  return json{
      {"seed", c.seed},
      {"grid", {{"lo_nm", c.grid.lo_nm}, {"hi_nm", c.grid.hi_nm}, {"step_nm", c.grid.step_nm}, {"center_nm", c.grid.center_nm}}},
      {"pump", {{"center_nm", c.pump.center_nm}, {"fwhm_nm", c.pump.fwhm_nm}, {"shape", c.pump.shape}}},
      {"phasematch",
       {{"length_mm", c.phasematch.length_mm},
        {"c00", c.phasematch.c00},
        {"c10", c.phasematch.c10},
        {"c01", c.phasematch.c01},
        {"c11", c.phasematch.c11},
        {"c20", c.phasematch.c20},
        {"c02", c.phasematch.c02},
        {"fit_hg0_width_nm", c.phasematch.fit_hg0_width_nm}}},
      {"schmidt", {{"max_modes", c.max_modes}}},
      {"pump_scale", {{"mode", c.pump_scale.mode}, {"target_db", c.pump_scale.target_db}, {"value", c.pump_scale.value}}},
      {"basis",
       {{"center_nm", c.basis.center_nm},
        {"width_nm", c.basis.width_nm},
        {"width_convention", c.basis.width_convention},
        {"hg_modes", c.basis.hg_modes},
        {"flat_modes", c.basis.flat_modes}}},
      {"frexel", {{"lo_nm", c.frexel.lo_nm}, {"hi_nm", c.frexel.hi_nm}, {"bands", c.frexel.bands}}},
      {"clipping",
       {{"fit_to_reference", c.clipping.fit_to_reference},
        {"lo_nm", c.clipping.lo_nm},
        {"hi_nm", c.clipping.hi_nm},
        {"coarse_step_nm", c.clipping.coarse_step_nm},
        {"rank_threshold", c.clipping.rank_threshold}}},
      {"budget",
       {{"eta_pd", c.budget.eta_pd},
        {"eta_opt", c.budget.eta_opt},
        {"visibility", c.budget.visibility},
        {"snr_db", c.budget.snr_db}}},
      {"cluster",
       {{"topologies", c.cluster.topologies},
        {"node_permutation", c.cluster.node_permutation},
        {"adjacency_csv", c.cluster.adjacency_csv}}},
      {"trace",
       {{"enabled", c.trace.enabled},
        {"samples", c.trace.samples},
        {"segments", c.trace.segments},
        {"rate_rad_per_s", c.trace.rate_rad_per_s},
        {"duration_s", c.trace.duration_s},
        {"shot_samples", c.trace.shot_samples},
        {"sg_window", c.trace.sg_window},
        {"sg_order", c.trace.sg_order},
        {"extrema_used", c.trace.extrema_used}}},
      {"ppt", {{"tol", c.ppt_tol}}},
      {"supermodes", {{"cross_tol", c.supermode_cross_tol}}},
      {"outputs", {{"dir", c.output_dir}}},
  };
}

namespace detail {

[[noreturn]] inline void config_error(const std::string& path, const std::string& what) {
  throw Error(Errc::config, path + ": " + what);
}

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline bool same_kind(const json& ref, const json& v) {
  if (ref.is_number()) return v.is_number();
  if (ref.is_array()) return v.is_array();
  return ref.type() == v.type();
}

/// Overlays `user` onto `base`, rejecting keys or value kinds that `base`
/// does not have.
inline void strict_merge(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) config_error(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = join_path(path, it.key());
    if (!base.contains(it.key())) config_error(p, "unknown key");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      strict_merge(slot, it.value(), p);
    } else {
      if (!same_kind(slot, it.value())) config_error(p, std::string("expected ") + slot.type_name() + ", got " +
                                                           it.value().type_name());
      slot = it.value();
    }
  }
}

template <class T>
T get_field(const json& j, const std::string& section, const std::string& key) {
  const std::string p = join_path(section, key);
  const json& node = section.empty() ? j.at(key) : j.at(section).at(key);
  try {
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!node.is_number_integer() && !node.is_number_unsigned()) config_error(p, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (node.is_number_integer() && node.get<long long>() < 0) config_error(p, "expected a non-negative integer");
      }
    }
    return node.get<T>();
  } catch (const json::exception& e) {
    config_error(p, e.what());
  }
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  using detail::config_error;
  if (!(c.grid.lo_nm > 0.0 && c.grid.hi_nm > c.grid.lo_nm)) config_error("grid.hi_nm", "must exceed grid.lo_nm > 0");
  if (!(c.grid.step_nm > 0.0)) config_error("grid.step_nm", "must be > 0");
  if ((c.grid.hi_nm - c.grid.lo_nm) / c.grid.step_nm > 20000.0) config_error("grid.step_nm", "grid exceeds 20000 points");
  if (c.grid.center_nm < c.grid.lo_nm || c.grid.center_nm > c.grid.hi_nm) config_error("grid.center_nm", "outside the grid");
  if (!(c.pump.center_nm > 0.0)) config_error("pump.center_nm", "must be > 0");
  if (!(c.pump.fwhm_nm > 0.0)) config_error("pump.fwhm_nm", "must be > 0");
  if (c.pump.shape != "gaussian" && c.pump.shape != "sech2") config_error("pump.shape", "must be gaussian or sech2");
  if (!(c.phasematch.length_mm > 0.0)) config_error("phasematch.length_mm", "must be > 0");
  if (c.phasematch.fit_hg0_width_nm < 0.0) config_error("phasematch.fit_hg0_width_nm", "must be >= 0");
  if (c.max_modes < 1) config_error("schmidt.max_modes", "must be >= 1");
  if (c.pump_scale.mode != "target_db" && c.pump_scale.mode != "fixed")
    config_error("pump_scale.mode", "must be target_db or fixed");
  if (c.pump_scale.mode == "target_db" && !(c.pump_scale.target_db < 0.0))
    config_error("pump_scale.target_db", "must be < 0 dB");
  if (c.pump_scale.value < 0.0) config_error("pump_scale.value", "must be >= 0");
  if (!(c.basis.width_nm > 0.0)) config_error("basis.width_nm", "must be > 0");
  if (c.basis.width_convention != "full_width_1e_amplitude" && c.basis.width_convention != "fwhm_amplitude" &&
      c.basis.width_convention != "fwhm_intensity")
    config_error("basis.width_convention", "unknown convention");
  if (c.basis.hg_modes < 1) config_error("basis.hg_modes", "must be >= 1");
  if (c.basis.flat_modes < 0 || c.basis.flat_modes > c.basis.hg_modes)
    config_error("basis.flat_modes", "must lie in [0, basis.hg_modes]");
  if (c.frexel.bands < 2) config_error("frexel.bands", "must be >= 2");
  if (c.frexel.bands > 24) config_error("frexel.bands", "PPT enumeration supports at most 24 modes");
  if (!(c.frexel.lo_nm < c.frexel.hi_nm)) config_error("frexel.hi_nm", "must exceed frexel.lo_nm");
  if (!(c.clipping.lo_nm < c.clipping.hi_nm)) config_error("clipping.hi_nm", "must exceed clipping.lo_nm");
  if (!(c.clipping.coarse_step_nm > 0.0)) config_error("clipping.coarse_step_nm", "must be > 0");
  if (c.clipping.rank_threshold < 0.0 || c.clipping.rank_threshold > 1.0)
    config_error("clipping.rank_threshold", "must lie in [0, 1]");
  for (const auto& [name, v] : {std::pair{"budget.eta_pd", c.budget.eta_pd}, std::pair{"budget.eta_opt", c.budget.eta_opt},
                                std::pair{"budget.visibility", c.budget.visibility}})
    if (v < 0.0 || v > 1.0) config_error(name, "must lie in [0, 1]");
  if (c.budget.snr_db < 0.0) config_error("budget.snr_db", "must be >= 0");
  for (std::size_t i = 0; i < c.cluster.topologies.size(); ++i) {
    const auto& t = c.cluster.topologies[i];
    if (std::find(kAdjacencyPresets.begin(), kAdjacencyPresets.end(), t) == kAdjacencyPresets.end())
      config_error("cluster.topologies[" + std::to_string(i) + "]", "unknown preset '" + t + "'");
  }
  if (c.trace.samples < 10) config_error("trace.samples", "must be >= 10");
  if (c.trace.segments < 1) config_error("trace.segments", "must be >= 1");
  if (!(c.trace.rate_rad_per_s > 0.0)) config_error("trace.rate_rad_per_s", "must be > 0");
  if (!(c.trace.duration_s > 0.0)) config_error("trace.duration_s", "must be > 0");
  if (c.trace.shot_samples != 0 && c.trace.shot_samples < 2) config_error("trace.shot_samples", "must be 0 or >= 2");
  if (c.trace.sg_window % 2 == 0 || c.trace.sg_window <= c.trace.sg_order || c.trace.sg_order < 0)
    config_error("trace.sg_window", "must be odd and exceed trace.sg_order >= 0");
  if (c.trace.extrema_used < 1) config_error("trace.extrema_used", "must be >= 1");
  if (c.ppt_tol < 0.0) config_error("ppt.tol", "must be >= 0");
  if (!(c.supermode_cross_tol > 0.0)) config_error("supermodes.cross_tol", "must be > 0");
  if (c.output_dir.empty()) config_error("outputs.dir", "must not be empty");
}

/// Reads a fully populated (defaults merged) document.
inline ExperimentConfig from_json(const json& j) {
  using detail::get_field;
  ExperimentConfig c;
  c.seed = get_field<std::uint64_t>(j, "", "seed");
  c.grid = {get_field<double>(j, "grid", "lo_nm"), get_field<double>(j, "grid", "hi_nm"),
            get_field<double>(j, "grid", "step_nm"), get_field<double>(j, "grid", "center_nm")};
  c.pump = {get_field<double>(j, "pump", "center_nm"), get_field<double>(j, "pump", "fwhm_nm"),
            get_field<std::string>(j, "pump", "shape")};
  auto& pm = c.phasematch;
  pm.length_mm = get_field<double>(j, "phasematch", "length_mm");
  pm.c00 = get_field<double>(j, "phasematch", "c00");
  pm.c10 = get_field<double>(j, "phasematch", "c10");
  pm.c01 = get_field<double>(j, "phasematch", "c01");
  pm.c11 = get_field<double>(j, "phasematch", "c11");
  pm.c20 = get_field<double>(j, "phasematch", "c20");
  pm.c02 = get_field<double>(j, "phasematch", "c02");
  pm.fit_hg0_width_nm = get_field<double>(j, "phasematch", "fit_hg0_width_nm");
  c.max_modes = get_field<int>(j, "schmidt", "max_modes");
  c.pump_scale = {get_field<std::string>(j, "pump_scale", "mode"), get_field<double>(j, "pump_scale", "target_db"),
                  get_field<double>(j, "pump_scale", "value")};
  c.basis = {get_field<double>(j, "basis", "center_nm"), get_field<double>(j, "basis", "width_nm"),
             get_field<std::string>(j, "basis", "width_convention"), get_field<int>(j, "basis", "hg_modes"),
             get_field<int>(j, "basis", "flat_modes")};
  c.frexel = {get_field<double>(j, "frexel", "lo_nm"), get_field<double>(j, "frexel", "hi_nm"),
              get_field<int>(j, "frexel", "bands")};
  c.clipping = {get_field<bool>(j, "clipping", "fit_to_reference"), get_field<double>(j, "clipping", "lo_nm"),
                get_field<double>(j, "clipping", "hi_nm"), get_field<double>(j, "clipping", "coarse_step_nm"),
                get_field<double>(j, "clipping", "rank_threshold")};
  c.budget = {get_field<double>(j, "budget", "eta_pd"), get_field<double>(j, "budget", "eta_opt"),
              get_field<double>(j, "budget", "visibility"), get_field<double>(j, "budget", "snr_db")};
  c.cluster.topologies = get_field<std::vector<std::string>>(j, "cluster", "topologies");
  c.cluster.node_permutation = get_field<std::vector<int>>(j, "cluster", "node_permutation");
  c.cluster.adjacency_csv = get_field<std::string>(j, "cluster", "adjacency_csv");
  auto& t = c.trace;
  t.enabled = get_field<bool>(j, "trace", "enabled");
  t.samples = get_field<int>(j, "trace", "samples");
  t.segments = get_field<int>(j, "trace", "segments");
  t.rate_rad_per_s = get_field<double>(j, "trace", "rate_rad_per_s");
  t.duration_s = get_field<double>(j, "trace", "duration_s");
  t.shot_samples = get_field<int>(j, "trace", "shot_samples");
  t.sg_window = get_field<int>(j, "trace", "sg_window");
  t.sg_order = get_field<int>(j, "trace", "sg_order");
  t.extrema_used = get_field<int>(j, "trace", "extrema_used");
  c.ppt_tol = get_field<double>(j, "ppt", "tol");
  c.supermode_cross_tol = get_field<double>(j, "supermodes", "cross_tol");
  c.output_dir = get_field<std::string>(j, "outputs", "dir");
  validate(c);
  return c;
}

/// Applies "a.b.c=value"; the value is read as JSON when it parses,
/// otherwise as a plain string.
inline void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    detail::config_error(std::string(assignment), "override must look like key.path=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  detail::strict_merge(doc, patch, "");
}

/// Defaults, then the file (if any), then overrides in order.
inline ExperimentConfig load_config(const std::filesystem::path* file, const std::vector<std::string>& overrides = {}) {
  json doc = to_json(ExperimentConfig{});
  if (file != nullptr) {
    const std::string text = io::read_text(*file);
    json user;
    try {
      user = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(Errc::config, file->string() + ": " + e.what());
    }
    detail::strict_merge(doc, user, "");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

inline ExperimentConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {}) {
  json doc = to_json(ExperimentConfig{});
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::config, std::string("config: ") + e.what());
  }
  detail::strict_merge(doc, user, "");
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

inline std::string dump_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline HgWidthConvention width_convention(const std::string& name) {
  if (name == "fwhm_amplitude") return HgWidthConvention::fwhm_amplitude;
  if (name == "fwhm_intensity") return HgWidthConvention::fwhm_intensity;
  return HgWidthConvention::full_width_1e_amplitude;
}

}  // namespace sqsim
