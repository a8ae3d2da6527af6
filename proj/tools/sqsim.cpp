#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sqsim/config.hpp"
#include "sqsim/io.hpp"
#include "sqsim/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using sqsim::json;
using sqsim::io::Csv;
using sqsim::io::fmt;

constexpr const char* kVersion = "0.1.0";
constexpr const char* kOutEnv = "SQSIM_OUT_DIR";

enum Exit { ok = 0, config_error = 2, numerical_error = 3, io_error = 4 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  bool verify = false;
  std::string cm;
  std::string cm_units;
  std::string data;
};

using Files = std::map<std::string, std::string>;

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

std::string fmt_i(long long x) { return fmt(x); }

// ---- commands --------------------------------------------------------------

std::string curve_csv(const std::vector<sqsim::pipeline::CurveRow>& rows) {
  Csv c;
  c.header({"mode", "sq_db", "antisq_db", "trace_sq_db", "trace_antisq_db"});
  for (const auto& r : rows)
    c.row({fmt_i(r.mode), fmt(r.sq_db), fmt(r.antisq_db), std::isnan(r.trace_sq_db) ? "" : fmt(r.trace_sq_db),
           std::isnan(r.trace_antisq_db) ? "" : fmt(r.trace_antisq_db)});
  return c.str();
}

json source_json(const sqsim::pipeline::Source& s) {
  const auto& c = s.phasematch.coefficients();
  return {{"pump_scale", s.pump_scale},
          {"total_efficiency", s.eta},
          {"eta_mod", s.budget.eta_mod()},
          {"eta_el", s.budget.eta_el()},
          {"schmidt_number", s.schmidt.schmidt_number},
          {"supermodes", s.schmidt.coefficients.size()},
          {"tail_mass", s.schmidt.tail_mass},
          {"reconstruction_error", s.schmidt.reconstruction_error},
          {"mismatch", {{"c00", c.c00}, {"c10", c.c10}, {"c01", c.c01}, {"c11", c.c11}, {"c20", c.c20}, {"c02", c.c02}}},
          {"leading_mode", {{"center_nm", s.leading.center_nm}, {"hg0_width_nm", s.leading.width_nm},
                            {"overlap", s.leading.overlap}}}};
}

Files cmd_squeezing_curves(const sqsim::ExperimentConfig& cfg) {
  const auto src = sqsim::pipeline::build_source(cfg);
  const auto bases = sqsim::pipeline::build_bases(cfg, src.grid);
  Files f;
  f["squeezing_hg.csv"] = curve_csv(sqsim::pipeline::squeezing_curve(cfg, src, bases.hg, 1));
  f["basis_hg.csv"] = sqsim::io::basis_csv(bases.hg);
  if (bases.flat) {
    f["squeezing_flat.csv"] = curve_csv(sqsim::pipeline::squeezing_curve(cfg, src, *bases.flat, 2));
    f["basis_flat.csv"] = sqsim::io::basis_csv(*bases.flat);
  }
  Csv sm;
  sm.header({"supermode", "lambda", "r", "sq_db", "antisq_db"});
  for (std::size_t k = 0; k < src.r.size(); ++k) {
    const double n = src.pure.n_modes();
    const auto i = static_cast<Eigen::Index>(k);
    sm.row({fmt_i(static_cast<long long>(k)), fmt(src.schmidt.coefficients[k]), fmt(src.r[k]),
            fmt(sqsim::to_db(src.lossy(static_cast<Eigen::Index>(n) + i, static_cast<Eigen::Index>(n) + i))),
            fmt(sqsim::to_db(src.lossy(i, i)))});
  }
  f["supermode_squeezing.csv"] = sm.str();
  f["source.json"] = pretty(source_json(src));
  return f;
}

Files cmd_covariance(const sqsim::ExperimentConfig& cfg) {
  const auto src = sqsim::pipeline::build_source(cfg);
  const auto fx = sqsim::pipeline::frexel_state(cfg, src);
  Files f;
  f["basis_frexel.csv"] = sqsim::io::basis_csv(fx.basis);
  f["covariance_frexel.csv"] = sqsim::io::cm_csv(fx.cm);
  const double xp = fx.cm.xp().norm();
  f["covariance_frexel.json"] =
      pretty({{"n_modes", fx.cm.n_modes()},
              {"basis_change", fx.kind == sqsim::BasisChangeKind::isometry ? "isometry" : "contraction"},
              {"xp_frobenius", xp},
              {"trace", fx.cm.matrix().trace()},
              {"xp_relative", xp / fx.cm.matrix().trace()},
              {"physicality_margin", sqsim::physicality_margin(fx.cm.matrix())}});
  return f;
}

sqsim::CovarianceMatrix input_cm(const sqsim::ExperimentConfig& cfg, const Options& o, std::string& origin) {
  if (!o.cm.empty()) {
    origin = "file";
    std::optional<sqsim::io::CmUnits> u;
    if (o.cm_units == "shot_noise") u = sqsim::io::CmUnits::shot_noise;
    if (o.cm_units == "vacuum_half") u = sqsim::io::CmUnits::vacuum_half;
    return sqsim::io::read_cm_csv(o.cm, u);
  }
  origin = "pipeline";
  return sqsim::pipeline::frexel_state(cfg, sqsim::pipeline::build_source(cfg)).cm;
}

Files cmd_ppt(const sqsim::ExperimentConfig& cfg, const Options& o) {
  std::string origin;
  const auto cm = input_cm(cfg, o, origin);
  const auto rep = sqsim::ppt_scan(cm, cfg.ppt_tol);
  double min_v = rep.entries.front().value;
  for (const auto& e : rep.entries) min_v = std::min(min_v, e.value);
  Files f;
  f["ppt.csv"] = sqsim::io::ppt_csv(rep);
  f["ppt_summary.json"] = pretty({{"source", origin},
                                  {"n_modes", cm.n_modes()},
                                  {"bipartitions", rep.entries.size()},
                                  {"violated", rep.violated_count},
                                  {"fraction_violated", rep.fraction_violated},
                                  {"tol", rep.tol},
                                  {"min_value", min_v}});
  return f;
}

Files cmd_supermodes(const sqsim::ExperimentConfig& cfg, const Options& o) {
  std::string origin;
  const auto cm = input_cm(cfg, o, origin);
  const auto basis = sqsim::pipeline::frexel_only(cfg);
  sqsim::detail::require(basis.size() == cm.n_modes(), sqsim::Errc::dimension_mismatch,
                         "covariance matrix has " + std::to_string(cm.n_modes()) + " modes but frexel.bands is " +
                             std::to_string(basis.size()));
  sqsim::SupermodeOptions opt;
  opt.cross_tol = cfg.supermode_cross_tol;
  const auto rep = sqsim::extract_supermodes(cm, basis, opt);
  Csv c;
  c.header({"eigenmode", "sq_db", "antisq_db", "var_squeezed", "var_antisqueezed", "pair_overlap"});
  for (std::size_t k = 0; k < rep.sq_db.size(); ++k)
    c.row({fmt_i(static_cast<long long>(k)), fmt(rep.sq_db[k]), fmt(rep.antisq_db[k]), fmt(rep.var_squeezed[k]),
           fmt(rep.var_antisqueezed[k]), fmt(rep.pair_overlap[k])});
  json fits = json::array();
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(4, rep.eigenmodes.size()); ++k) {
    const auto fit = sqsim::fit_hermite_gauss(rep.eigenmodes.mode(k), static_cast<int>(k), cfg.basis.center_nm,
                                              cfg.basis.width_nm, true);
    // HG restricted to the span of the measured bands
    const auto& grid = *basis.grid();
    const Eigen::VectorXcd hg =
        sqsim::hermite_gauss_function(grid, fit.center_nm, 0.5 * fit.width_nm, static_cast<int>(k)).cast<sqsim::cplx>();
    const Eigen::VectorXcd proj = basis.amplitudes().adjoint() * grid.weights().asDiagonal() * hg;
    const double in_span = fit.overlap / proj.norm();
    fits.push_back({{"order", k},
                    {"center_nm", fit.center_nm},
                    {"width_nm", fit.width_nm},
                    {"overlap", fit.overlap},
                    {"overlap_in_band_span", in_span}});
  }
  Files f;
  f["eigenmodes.csv"] = sqsim::io::basis_csv(rep.eigenmodes);
  f["supermodes.csv"] = c.str();
  f["supermodes.json"] =
      pretty({{"source", origin}, {"ill_paired", rep.ill_paired}, {"xp_frobenius", rep.xp_norm}, {"hg_fits", fits}});
  return f;
}

Files cmd_cluster(const sqsim::ExperimentConfig& cfg) {
  const auto src = sqsim::pipeline::build_source(cfg);
  const auto res = sqsim::pipeline::cluster_study(cfg, src);
  Csv c;
  c.header({"topology", "node", "variance", "shot_ref", "squeezing_db"});
  json tops = json::array();
  Files f;
  for (const auto& r : res) {
    const auto& n = r.report;
    for (std::size_t i = 0; i < n.variances.size(); ++i)
      c.row({n.topology, fmt_i(static_cast<long long>(i)), fmt(n.variances[i]), fmt(n.shot_refs[i]),
             fmt(n.squeezing_db[i])});
    tops.push_back({{"name", n.topology},
                    {"nodes", n.variances.size()},
                    {"min", n.stats.min},
                    {"q1", n.stats.q1},
                    {"median", n.stats.median},
                    {"q3", n.stats.q3},
                    {"max", n.stats.max},
                    {"mean", n.stats.mean}});
    f["adjacency_" + n.topology + ".csv"] = sqsim::io::adjacency_csv(r.adjacency);
  }
  f["cluster_nullifiers.csv"] = c.str();
  f["cluster_stats.json"] =
      pretty({{"total_efficiency", src.eta}, {"node_permutation", cfg.cluster.node_permutation}, {"topologies", tops}});
  return f;
}

Files cmd_rank(const sqsim::ExperimentConfig& cfg) {
  const auto res = sqsim::pipeline::rank_study(cfg);
  Csv c;
  c.header({"index", "singular_value", "reference"});
  const auto& ref = sqsim::reference::kClippedSingularValues;
  for (std::size_t k = 0; k < res.report.singular_values.size(); ++k)
    c.row({fmt_i(static_cast<long long>(k)), fmt(res.report.singular_values[k]), k < ref.size() ? fmt(ref[k]) : ""});
  Files f;
  f["rank.csv"] = c.str();
  f["rank.json"] = pretty({{"window_lo_nm", res.window.lo_nm},
                           {"window_hi_nm", res.window.hi_nm},
                           {"fitted", cfg.clipping.fit_to_reference},
                           {"fit_residual", res.fit_residual},
                           {"threshold", cfg.clipping.rank_threshold},
                           {"rank", res.report.rank},
                           {"max_singular_value", res.report.singular_values.front()}});
  return f;
}

Files cmd_gainfit(const Options& o) {
  if (o.data.empty()) throw sqsim::Error(sqsim::Errc::config, "gainfit: --data is required");
  const auto data = sqsim::io::read_gain_csv(o.data);
  json out = {{"eta_shg_per_w", sqsim::reference::kEtaShg}};
  Csv c;
  c.header({"branch", "power_W", "gain", "model_gain"});
  for (const auto& [name, branch, samples] :
       {std::tuple{"plus", sqsim::GainBranch::plus, &data.plus}, std::tuple{"minus", sqsim::GainBranch::minus, &data.minus}}) {
    if (samples->empty()) {
      out[name] = nullptr;
      continue;
    }
    const auto fit = sqsim::fit_gain(*samples, branch);
    out[name] = {{"eta_psa_per_w", fit.eta_psa}, {"residual_rms", fit.residual_rms}, {"samples", fit.n_samples}};
    for (const auto& s : *samples)
      c.row({std::string(name), fmt(s.power_w), fmt(s.gain), fmt(sqsim::gain_model(fit.eta_psa, s.power_w, branch))});
  }
  Files f;
  f["gainfit.json"] = pretty(out);
  f["gain_model.csv"] = c.str();
  return f;
}

Files cmd_jsa(const sqsim::ExperimentConfig& cfg) {
  const auto src = sqsim::pipeline::build_source(cfg);
  const auto jsa = sqsim::build_jsa(src.pump, src.phasematch, src.grid, src.grid);
  Csv c;
  c.header({"k", "lambda"});
  for (std::size_t k = 0; k < src.schmidt.coefficients.size(); ++k)
    c.row({fmt_i(static_cast<long long>(k)), fmt(src.schmidt.coefficients[k])});
  Files f;
  f["jsa.csv"] = sqsim::io::jsa_csv(jsa);
  f["schmidt.csv"] = c.str();
  f["jsa.json"] = pretty(source_json(src));
  return f;
}

// ---- driver ----------------------------------------------------------------

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path output_dir(const Options& o, const sqsim::ExperimentConfig& cfg) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') return env;
  return cfg.output_dir;
}

int run(const std::string& command, const Options& o) {
  const fs::path cfg_path(o.config);
  auto cfg = sqsim::load_config(o.config.empty() ? nullptr : &cfg_path, o.sets);
  if (o.seed) cfg.seed = *o.seed;
  const fs::path dir = output_dir(o, cfg);

  Files files;
  if (command == "squeezing-curves") files = cmd_squeezing_curves(cfg);
  else if (command == "covariance") files = cmd_covariance(cfg);
  else if (command == "ppt") files = cmd_ppt(cfg, o);
  else if (command == "supermodes") files = cmd_supermodes(cfg, o);
  else if (command == "cluster") files = cmd_cluster(cfg);
  else if (command == "rank") files = cmd_rank(cfg);
  else if (command == "gainfit") files = cmd_gainfit(o);
  else if (command == "jsa") files = cmd_jsa(cfg);
  const std::string cfg_text = sqsim::dump_config(cfg);
  files["config.json"] = cfg_text;

  json listing = json::array();
  for (const auto& [name, text] : files)
    listing.push_back({{"path", name}, {"sha256", sqsim::io::sha256_hex(text)}, {"bytes", text.size()}});

  if (o.verify) {
    const auto old = json::parse(sqsim::io::read_text(dir / "manifest.json"), nullptr, false);
    if (old.is_discarded() || !old.contains("files"))
      throw sqsim::Error(sqsim::Errc::io, (dir / "manifest.json").string() + ": unreadable manifest");
    std::map<std::string, std::string> before;
    for (const auto& e : old["files"]) before[e.at("path").get<std::string>()] = e.at("sha256").get<std::string>();
    int bad = 0;
    for (const auto& e : listing) {
      const auto name = e["path"].get<std::string>();
      const auto it = before.find(name);
      if (it == before.end() || it->second != e["sha256"].get<std::string>()) {
        std::cerr << "digest mismatch: " << name << "\n";
        ++bad;
      }
      // the files on disk must also still match the manifest
      if (it != before.end() && fs::exists(dir / name) &&
          sqsim::io::sha256_hex(sqsim::io::read_text(dir / name)) != it->second) {
        std::cerr << "file changed on disk: " << name << "\n";
        ++bad;
      }
    }
    if (before.size() != listing.size()) {
      std::cerr << "manifest lists " << before.size() << " files, run produced " << listing.size() << "\n";
      ++bad;
    }
    if (bad > 0) return numerical_error;
    std::cout << "verified " << listing.size() << " files in " << dir.string() << "\n";
    return ok;
  }

  for (const auto& [name, text] : files) sqsim::io::write_text(dir / name, text);
  const json manifest = {{"tool", "sqsim"},
                         {"version", kVersion},
                         {"command", command},
                         {"seed", cfg.seed},
                         {"config_sha256", sqsim::io::sha256_hex(cfg_text)},
                         {"created_utc", utc_now()},
                         {"files", listing}};
  sqsim::io::write_text(dir / "manifest.json", pretty(manifest));
  std::cout << command << ": wrote " << files.size() << " files to " << dir.string() << "\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimode squeezed-light simulation and analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"squeezing-curves", "squeezing of HG and flat modes (analytic and synthetic-trace paths)"},
      {"covariance", "covariance matrix in the frexel basis"},
      {"ppt", "PPT scan over all bipartitions"},
      {"supermodes", "eigenmodes and squeezing from diagonalizing the covariance matrix"},
      {"cluster", "nullifier squeezing of cluster-state topologies"},
      {"rank", "singular values and rank of the clipped HG basis"},
      {"gainfit", "parametric efficiency from gain-vs-power data"},
      {"jsa", "joint spectral amplitude and Schmidt coefficients"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides $SQSIM_OUT_DIR and outputs.dir)");
    sub->add_option("--seed", o.seed, "noise seed (overrides the config)");
    sub->add_option("--set", o.sets, "override a config field, key.path=value")->take_all();
    sub->add_flag("--verify", o.verify, "re-run and compare against the existing manifest instead of writing");
    if (name == "ppt" || name == "supermodes") {
      sub->add_option("--cm", o.cm, "covariance matrix CSV to analyse instead of the simulated one")
          ->check(CLI::ExistingFile);
      sub->add_option("--cm-units", o.cm_units, "units of --cm")->check(CLI::IsMember({"vacuum_half", "shot_noise"}));
    }
    if (name == "gainfit")
      sub->add_option("--data", o.data, "CSV with power_W, gain[, branch]")->check(CLI::ExistingFile);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const sqsim::Error& e) {
    std::cerr << "sqsim " << command << ": " << e.what() << "\n";
    switch (e.code()) {
      case sqsim::Errc::config: return config_error;
      case sqsim::Errc::io: return io_error;
      default: return numerical_error;
    }
  } catch (const std::exception& e) {
    std::cerr << "sqsim " << command << ": " << e.what() << "\n";
    return numerical_error;
  }
}
