#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <openssl/evp.h>

#include "sqsim/calib.hpp"
#include "sqsim/cluster.hpp"
#include "sqsim/core.hpp"
#include "sqsim/entanglement.hpp"
#include "sqsim/gaussian.hpp"
#include "sqsim/modes.hpp"
#include "sqsim/spdc.hpp"
#include "sqsim/trace.hpp"

namespace sqsim::io {

namespace fs = std::filesystem;

/// Shortest decimal that round-trips; independent of locale.
inline std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

inline std::string fmt(long long x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  detail::require(res.ec == std::errc() && res.ptr == s.data() + s.size(), Errc::io,
                  where + ": '" + std::string(s) + "' is not a number");
  return x;
}

class Csv {
 public:
  void comment(std::string_view text) { out_ << "# " << text << '\n'; }

  void header(const std::vector<std::string>& cols) { row(cols); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << fmt(values[i]);
    out_ << '\n';
  }

  [[nodiscard]] std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  detail::require(static_cast<bool>(f), Errc::io, "cannot open '" + path.string() + "' for writing");
  f << text;
  f.close();
  detail::require(static_cast<bool>(f), Errc::io, "failed writing '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  detail::require(static_cast<bool>(f), Errc::io, "cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct CsvTable {
  std::vector<std::string> comments;  // '#' lines, marker stripped
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

/// Reads a comma-separated file. With `has_header`, the first non-comment
/// line names the columns.
inline CsvTable read_csv(const fs::path& path, bool has_header) {
  std::istringstream in(read_text(path));
  CsvTable t;
  std::string line;
  bool need_header = has_header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
      continue;
    }
    if (need_header) {
      t.header = split_cells(line);
      need_header = false;
      continue;
    }
    t.rows.push_back(split_cells(line));
  }
  return t;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  detail::require(EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) == 1, Errc::io,
                  "sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// ---- domain formats -------------------------------------------------------

inline std::string basis_csv(const ModeBasis& b) {
  Csv c;
  c.comment("basis=" + b.label() + ", modes=" + fmt(static_cast<long long>(b.size())) +
            ", orthonormal=" + (b.orthonormal() ? "true" : "false"));
  std::vector<std::string> h{"wavelength_nm", "omega_rad_per_ps"};
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    h.push_back("mode" + fmt(static_cast<long long>(k)) + "_re");
    h.push_back("mode" + fmt(static_cast<long long>(k)) + "_im");
  }
  c.header(h);
  const auto& g = *b.grid();
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::vector<double> row{g[i], wavelength_to_omega(g[i])};
    for (Eigen::Index k = 0; k < b.size(); ++k) {
      const cplx a = b.amplitudes()(static_cast<Eigen::Index>(i), k);
      row.push_back(a.real());
      row.push_back(a.imag());
    }
    c.row(row);
  }
  return c.str();
}

/// Header "# n_modes=<N>, convention=vacuum_half", then 2N rows in xxpp order.
inline std::string cm_csv(const CovarianceMatrix& cm) {
  Csv c;
  c.comment("n_modes=" + fmt(static_cast<long long>(cm.n_modes())) + ", convention=vacuum_half");
  for (Eigen::Index i = 0; i < cm.matrix().rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(cm.matrix().cols()));
    for (Eigen::Index j = 0; j < cm.matrix().cols(); ++j) row[static_cast<std::size_t>(j)] = cm(i, j);
    c.row(row);
  }
  return c.str();
}

/// Units of an ingested CM: vacuum variance 1/2, or shot-noise units where
/// the vacuum variance is 1.
enum class CmUnits { vacuum_half, shot_noise };

inline CovarianceMatrix read_cm_csv(const fs::path& path, std::optional<CmUnits> units = std::nullopt) {
  const auto t = read_csv(path, false);
  CmUnits u = CmUnits::vacuum_half;
  for (const auto& line : t.comments) {
    if (line.find("convention=shot_noise") != std::string::npos) u = CmUnits::shot_noise;
  }
  if (units) u = *units;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  detail::require(n >= 2 && n % 2 == 0, Errc::io, path.string() + ": covariance matrix needs 2N rows");
  MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = t.rows[static_cast<std::size_t>(i)];
    detail::require(static_cast<Eigen::Index>(r.size()) == n, Errc::io,
                    path.string() + ": row " + fmt(static_cast<long long>(i + 1)) + " has " +
                        fmt(static_cast<long long>(r.size())) + " entries, expected " + fmt(static_cast<long long>(n)));
    for (Eigen::Index j = 0; j < n; ++j)
      g(i, j) = parse_double(r[static_cast<std::size_t>(j)], path.string() + " row " + fmt(static_cast<long long>(i + 1)));
  }
  if (u == CmUnits::shot_noise) g *= kVacuumVariance;
  return CovarianceMatrix(std::move(g));
}

inline std::string adjacency_csv(const AdjacencyMatrix& v) {
  Csv c;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(v.size()));
    for (Eigen::Index j = 0; j < v.size(); ++j) row[static_cast<std::size_t>(j)] = v(i, j);
    c.row(row);
  }
  return c.str();
}

inline AdjacencyMatrix read_adjacency_csv(const fs::path& path) {
  const auto t = read_csv(path, false);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  detail::require(n >= 1, Errc::io, path.string() + ": empty adjacency matrix");
  MatrixXd v(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = t.rows[static_cast<std::size_t>(i)];
    detail::require(static_cast<Eigen::Index>(r.size()) == n, Errc::io, path.string() + ": adjacency matrix is not square");
    for (Eigen::Index j = 0; j < n; ++j) v(i, j) = parse_double(r[static_cast<std::size_t>(j)], path.string());
  }
  return AdjacencyMatrix(std::move(v), path.stem().string());
}

struct GainData {
  std::vector<GainSample> plus;
  std::vector<GainSample> minus;
};

/// Columns power_W, gain and an optional branch ("plus"/"minus"). Without a
/// branch column, G >= 1 is amplification and G < 1 deamplification.
inline GainData read_gain_csv(const fs::path& path) {
  const auto t = read_csv(path, true);
  const auto col = [&](std::string_view name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < t.header.size(); ++i)
      if (t.header[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  };
  const auto ip = col("power_W"), ig = col("gain"), ib = col("branch");
  detail::require(ip >= 0 && ig >= 0, Errc::io, path.string() + ": gain data needs power_W and gain columns");
  GainData d;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& r = t.rows[k];
    const std::string where = path.string() + " line " + fmt(static_cast<long long>(k + 2));
    detail::require(r.size() == t.header.size(), Errc::io, where + ": wrong number of columns");
    const GainSample s{parse_double(r[static_cast<std::size_t>(ip)], where),
                       parse_double(r[static_cast<std::size_t>(ig)], where)};
    bool plus = s.gain >= 1.0;
    if (ib >= 0) {
      const auto& b = r[static_cast<std::size_t>(ib)];
      detail::require(b == "plus" || b == "minus", Errc::io, where + ": branch must be plus or minus");
      plus = b == "plus";
    }
    (plus ? d.plus : d.minus).push_back(s);
  }
  return d;
}

inline std::string ppt_csv(const PPTReport& rep) {
  Csv c;
  c.header({"bitmask", "subset_size", "ppt_value", "violated"});
  for (const auto& e : rep.entries)
    c.row({fmt(static_cast<long long>(e.bipartition.mask())), fmt(static_cast<long long>(e.bipartition.size_a())),
           fmt(e.value), e.violated ? "1" : "0"});
  return c.str();
}

inline std::string trace_csv(const PhaseScanTrace& tr) {
  Csv c;
  c.comment("noise_seed=" + std::to_string(tr.noise_seed));
  c.header({"sample", "phase_rad", "variance_db"});
  for (std::size_t i = 0; i < tr.phase.size(); ++i)
    c.row({fmt(static_cast<long long>(i)), fmt(tr.phase[i]), fmt(tr.variance_db[i])});
  return c.str();
}

/// |J| and arg J on the (signal, idler) grid, one row per sample pair.
inline std::string jsa_csv(const JSAGrid& jsa) {
  Csv c;
  c.header({"signal_nm", "idler_nm", "magnitude", "phase_rad"});
  const auto& gs = *jsa.grid_s();
  const auto& gi = *jsa.grid_i();
  for (std::size_t a = 0; a < gs.size(); ++a)
    for (std::size_t b = 0; b < gi.size(); ++b) {
      const cplx v = jsa.values()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      c.row({gs[a], gi[b], std::abs(v), std::arg(v)});
    }
  return c.str();
}

}  // namespace sqsim::io
