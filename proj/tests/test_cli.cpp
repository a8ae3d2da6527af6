#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = SQSIM_CLI_PATH;
const std::string kGain = SQSIM_GAIN_SAMPLE;

int run(const std::string& args, const std::string& env = "") {
  const int status = std::system((env + (env.empty() ? "" : " ") + kCli + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh(const std::string& name) {
  const auto p = fs::temp_directory_path() / "sqsim_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST(Cli, GainfitWritesManifestAndVerifies) {
  const auto out = fresh("gainfit");
  ASSERT_EQ(run("gainfit --data " + kGain + " --out " + out.string() + " --seed 5"), 0);
  const auto manifest = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["command"], "gainfit");
  EXPECT_EQ(manifest["seed"], 5);
  std::set<std::string> listed;
  for (const auto& f : manifest["files"]) listed.insert(f["path"].get<std::string>());
  for (const auto& e : fs::directory_iterator(out))
    if (e.path().filename() != "manifest.json") EXPECT_TRUE(listed.count(e.path().filename().string())) << e.path();
  const auto fit = json::parse(slurp(out / "gainfit.json"));
  EXPECT_NEAR(fit["plus"]["eta_psa_per_w"].get<double>(), 0.40, 0.02);
  EXPECT_NEAR(fit["minus"]["eta_psa_per_w"].get<double>(), 0.33, 0.02);

  EXPECT_EQ(run("gainfit --data " + kGain + " --out " + out.string() + " --seed 5 --verify"), 0);
  spit(out / "gainfit.json", "{}\n");
  EXPECT_EQ(run("gainfit --data " + kGain + " --out " + out.string() + " --seed 5 --verify"), 3);
}

TEST(Cli, ExitCodes) {
  const auto out = fresh("codes");
  EXPECT_EQ(run("rank --out " + out.string()), 0);
  // config errors
  EXPECT_EQ(run("rank --out " + out.string() + " --set basis.nope=1"), 2);
  EXPECT_EQ(run("rank --out " + out.string() + " --set basis.hg_modes=abc"), 2);
  EXPECT_EQ(run("rank --config /nonexistent.json"), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  const auto bad = out.parent_path() / "bad.json";
  spit(bad, "{ \"seed\": 1,, }");
  EXPECT_EQ(run("rank --config " + bad.string()), 2);
  // numerical failure: nothing to fit
  const auto zeros = out.parent_path() / "zeros.csv";
  spit(zeros, "power_W,gain\n0,1\n0,1\n");
  EXPECT_EQ(run("gainfit --data " + zeros.string() + " --out " + out.string()), 3);
  // io: output path below a regular file
  const auto blocker = out.parent_path() / "blocker";
  spit(blocker, "x");
  EXPECT_EQ(run("rank --out " + (blocker / "sub").string()), 4);
  const auto ragged = out.parent_path() / "ragged.csv";
  spit(ragged, "0.5,0\n0\n");
  EXPECT_EQ(run("ppt --cm " + ragged.string() + " --out " + out.string()), 4);
}

TEST(Cli, OutputDirectoryPrecedence) {
  const auto flag = fresh("prec_flag");
  const auto env = fresh("prec_env");
  const auto cfgdir = fresh("prec_cfg");
  const std::string data = " --data " + kGain;
  EXPECT_EQ(run("gainfit" + data + " --out " + flag.string(), "SQSIM_OUT_DIR=" + env.string()), 0);
  EXPECT_TRUE(fs::exists(flag / "manifest.json"));
  EXPECT_FALSE(fs::exists(env));
  EXPECT_EQ(run("gainfit" + data + " --set outputs.dir=" + cfgdir.string(), "SQSIM_OUT_DIR=" + env.string()), 0);
  EXPECT_TRUE(fs::exists(env / "manifest.json"));
  EXPECT_FALSE(fs::exists(cfgdir));
  EXPECT_EQ(run("gainfit" + data + " --set outputs.dir=" + cfgdir.string(), "SQSIM_OUT_DIR="), 0);
  EXPECT_TRUE(fs::exists(cfgdir / "manifest.json"));
  // the override directory does not leak into the recorded config
  EXPECT_EQ(slurp(cfgdir / "config.json"), slurp(env / "config.json"));
}

TEST(Cli, OverridesReachTheEffectiveConfig) {
  const auto out = fresh("overrides");
  const auto cfg = out.parent_path() / "overrides.json";
  spit(cfg, R"({"seed": 3, "clipping": {"fit_to_reference": false, "lo_nm": 1500, "hi_nm": 1620}})");
  ASSERT_EQ(run("rank --config " + cfg.string() + " --out " + out.string() + " --set clipping.lo_nm=1510 --seed 11"), 0);
  const auto eff = json::parse(slurp(out / "config.json"));
  EXPECT_EQ(eff["seed"], 11);
  EXPECT_EQ(eff["clipping"]["lo_nm"].get<double>(), 1510.0);
  EXPECT_EQ(eff["clipping"]["hi_nm"].get<double>(), 1620.0);
  const auto rank = json::parse(slurp(out / "rank.json"));
  EXPECT_FALSE(rank["fitted"].get<bool>());
  EXPECT_EQ(rank["window_lo_nm"].get<double>(), 1510.0);

  // the emitted config reproduces the run
  const auto again = fresh("overrides_again");
  ASSERT_EQ(run("rank --config " + (out / "config.json").string() + " --out " + again.string()), 0);
  EXPECT_EQ(slurp(out / "rank.csv"), slurp(again / "rank.csv"));
  EXPECT_EQ(slurp(out / "config.json"), slurp(again / "config.json"));
}

TEST(Cli, IngestedCovarianceMatrix) {
  const auto out = fresh("ingest");
  const auto cm = out.parent_path() / "epr.csv";
  // two-mode squeezed vacuum, r = 0.5, shot-noise units
  const double c = std::cosh(1.0), s = std::sinh(1.0);
  std::ostringstream m;
  m.precision(17);
  m << c << ',' << s << ",0,0\n" << s << ',' << c << ",0,0\n0,0," << c << ',' << -s << "\n0,0," << -s << ',' << c << '\n';
  spit(cm, m.str());
  ASSERT_EQ(run("ppt --cm " + cm.string() + " --cm-units shot_noise --out " + out.string()), 0);
  const auto summary = json::parse(slurp(out / "ppt_summary.json"));
  EXPECT_EQ(summary["bipartitions"], 1);
  EXPECT_EQ(summary["violated"], 1);
  EXPECT_NEAR(summary["min_value"].get<double>(), 0.5 * (std::exp(-1.0) - 1.0), 1e-9);
}
