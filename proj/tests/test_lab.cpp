#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rnls/error.hpp"
#include "rnls/lab.hpp"
#include "rnls/profiles.hpp"
#include "rnls/snapshot.hpp"

using namespace rnls;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("rnls_lab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string cache_dir() { return (fs::temp_directory_path() / "rnls_lab_test_cache").string(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

lab::RunConfig base(lab::Experiment e, const fs::path& out) {
  lab::RunConfig c;
  c.experiment = e;
  c.output_dir = out.string();
  c.cache_dir = cache_dir();
  return c;
}

double check_value(const lab::RunResult& r, const std::string& name) {
  for (const auto& c : r.summary["checks"])
    if (c["name"] == name) return c["value"].get<double>();
  FAIL("missing check " << name);
  return 0.0;
}

}  // namespace

TEST_CASE("config parsing, comments and canonical text") {
  auto c = lab::RunConfig::parse(
      "# a run\n"
      "experiment = rough_check   # trailing comment\n"
      "n = 256\n"
      "\n"
      "noise_amps = 0.1, 0.2\n"
      "noise_modes = 2\n"
      "adaptive = true\n"
      "scheme = yoshida4_gauge\n");
  CHECK(c.experiment == lab::Experiment::rough_check);
  CHECK(c.n == 256);
  CHECK(c.noise_amps == std::vector<double>{0.1, 0.2});
  CHECK(c.adaptive);
  CHECK(c.scheme == Scheme::yoshida4_gauge);
  auto d = lab::RunConfig::parse(c.to_text());
  CHECK(d.to_text() == c.to_text());
  CHECK(lab::RunConfig::keys().size() == 31);
}

TEST_CASE("config errors name the key or line") {
  CHECK_THROWS_WITH_AS(lab::RunConfig::parse("bogus = 1\n"), doctest::Contains("unknown config key 'bogus'"), Error);
  CHECK_THROWS_WITH_AS(lab::RunConfig::parse("n = 12x\n"), doctest::Contains("config key 'n'"), Error);
  CHECK_THROWS_WITH_AS(lab::RunConfig::parse("dim = 1\n\nn\n"), doctest::Contains("config line 3"), Error);
  CHECK_THROWS_WITH_AS(lab::RunConfig::parse("n = 64\nn = 128\n"), doctest::Contains("duplicate key 'n'"), Error);
  CHECK_THROWS_WITH_AS(lab::RunConfig::parse("n = 100\n"), doctest::Contains("power of two"), Error);
  CHECK_THROWS_WITH_AS(lab::RunConfig::parse("experiment = exact_soliton\nnoise_modes = 1\n"),
                       doctest::Contains("noise_modes = 0"), Error);
  CHECK_THROWS_WITH_AS(lab::RunConfig::parse("experiment = magic\n"), doctest::Contains("unknown experiment"), Error);
  CHECK_THROWS_AS(lab::RunConfig::parse("adaptive = maybe\n"), Error);
  CHECK_THROWS_AS(lab::RunConfig::parse("t0 = 2\nT = 1\n"), Error);
}

TEST_CASE("running median ratio against brute force") {
  std::vector<double> v{1.0, 3.0, 2.0, 8.0, 2.5, 40.0, 1.0, 2.0};
  double brute = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::vector<double> w(v.begin(), v.begin() + long(i) + 1);
    std::sort(w.begin(), w.end());
    const std::size_t m = w.size();
    const double med = m % 2 ? w[m / 2] : 0.5 * (w[m / 2 - 1] + w[m / 2]);
    brute = std::max(brute, v[i] / med);
  }
  CHECK(lab::max_running_median_ratio(v) == doctest::Approx(brute).epsilon(1e-15));
  CHECK(lab::max_running_median_ratio({}) == 0.0);
}

TEST_CASE("ground_state experiment writes a versioned summary") {
  auto out = scratch("gs");
  auto c = base(lab::Experiment::ground_state, out);
  c.n = 2048;
  c.L = 20.0;
  auto r = lab::run(c);
  CHECK(r.passed);
  CHECK(r.summary["schema"] == "rnls.summary");
  CHECK(r.summary["version"] == lab::kSummaryVersion);
  CHECK(r.summary["results"]["Q0"].get<double>() == doctest::Approx(1.31607).epsilon(1e-5));
  CHECK(r.summary["results"]["mass"].get<double>() == doctest::Approx(2.72070).epsilon(1e-5));
  for (const char* f : {"config.txt", "summary.json", "ground_state.rnls", "profile.csv"}) CHECK(fs::exists(out / f));
  CHECK(slurp(out / "config.txt") == c.to_text());
}

TEST_CASE("config text is echoed verbatim") {
  auto out = scratch("echo");
  const std::string text = "# comment kept\nexperiment = ground_state\nn = 512\nL = 16\noutput_dir = " + out.string() +
                           "\ncache_dir = " + cache_dir() + "\n";
  lab::run(lab::RunConfig::parse(text), text);
  CHECK(slurp(out / "config.txt") == text);
}

TEST_CASE("rough_check is reproducible byte for byte") {
  auto c = base(lab::Experiment::rough_check, "");
  c.n = 256;
  c.L = 12.0;
  c.t_end = 0.125;
  c.lift_cells = 128;
  c.noise_modes = 2;
  c.seed = 4;
  c.ensemble = 2;
  auto a = scratch("rc_a"), b = scratch("rc_b");
  c.output_dir = a.string();
  auto ra = lab::run(c);
  c.output_dir = b.string();
  c.threads = 2;
  lab::run(c);
  CHECK(check_value(ra, "bdb_identity_error") < 1e-12);
  for (const char* f : {"summary.json", "refinement.csv", "rough_report.json"}) CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("rough_check without noise has a zero right-hand side") {
  auto out = scratch("rc0");
  auto c = base(lab::Experiment::rough_check, out);
  c.n = 256;
  c.L = 12.0;
  c.t_end = 0.125;
  c.lift_cells = 64;
  auto r = lab::run(c);
  CHECK(r.passed);
  CHECK(check_value(r, "rhs_abs") == 0.0);
}

TEST_CASE("threshold_sweep separates sub-threshold and S_T members") {
  auto c = base(lab::Experiment::threshold_sweep, "");
  c.n = 1024;
  c.L = 16.0;
  c.t_end = 0.6;
  c.T = 0.5;
  c.mass_ratios = {0.9, 1.0};
  c.noise_modes = 2;
  c.ensemble = 2;
  auto a = scratch("ts_a"), b = scratch("ts_b");
  c.output_dir = a.string();
  c.threads = 1;
  auto r = lab::run(c);
  c.output_dir = b.string();
  c.threads = 3;
  lab::run(c);
  CHECK(r.passed);
  CHECK(slurp(a / "sweep.csv") == slurp(b / "sweep.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
  const auto& members = r.summary["results"]["members"];
  REQUIRE(members.size() == 4);
  CHECK(members[0]["status"] == "completed");
  CHECK(members[3]["status"] != "completed");
}

TEST_CASE("pseudoconformal experiment against the exact solution") {
  auto out = scratch("pc");
  auto c = base(lab::Experiment::pseudoconformal, out);
  c.n = 4096;
  c.L = 40.0;
  c.adaptive = true;
  c.t_end = 0.3;
  c.snapshot_every = 0.1;
  auto r = lab::run(c);
  CHECK(r.passed);
  CHECK(check_value(r, "l2_error_vs_exact") < 1e-4);
  CHECK(fs::exists(out / "snapshots" / "snapshots.csv"));

  // Time-series modfit on the stored snapshots.
  lab::ModfitOptions opt;
  opt.input = out / "snapshots";
  opt.pinit = {0.95, 0.0, 0.0, 0.95, 1.0};
  opt.out = out / "track";
  opt.cache_dir = cache_dir();
  auto m = lab::run_modfit(opt);
  CHECK(m.passed);
  CHECK(fs::exists(out / "track" / "mod_track.csv"));
}

TEST_CASE("modfit on a single snapshot") {
  auto dir = scratch("mf");
  fs::create_directories(dir);
  auto g = make_grid(1, 4096, 40.0);
  auto gs = cached_ground_state(g, fs::path(cache_dir()));
  write_snapshot(dir / "st.rnls", pseudo_conformal_ST(gs, 1.0, 0.4, g));
  lab::ModfitOptions opt;
  opt.input = dir / "st.rnls";
  opt.pinit = {0.66, 0.0, 0.0, 0.54, 1.8};
  opt.out = dir / "report.json";
  opt.cache_dir = cache_dir();
  auto r = lab::run_modfit(opt);
  CHECK(r.passed);
  CHECK(r.summary["results"]["P"]["lambda"].get<double>() == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(fs::exists(opt.out));
  opt.pinit = {0.6, 0.0, 0.6};
  CHECK_THROWS_WITH_AS(lab::run_modfit(opt), doctest::Contains("--pinit needs 5 values"), Error);
}

TEST_CASE("module errors name the failing stage") {
  auto out = scratch("stage");
  auto c = base(lab::Experiment::evolve, out);
  c.n = 256;
  c.L = 4.0;
  c.noise_modes = 1;
  c.noise_widths = {3.0};
  CHECK_THROWS_WITH_AS(lab::run(c), doctest::Contains("noise basis:"), Error);
}
