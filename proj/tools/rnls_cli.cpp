#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rnls/error.hpp"
#include "rnls/lab.hpp"

using namespace rnls;

namespace {

std::string env_cache() {
  const char* v = std::getenv("RNLS_CACHE");
  return v ? std::string(v) : std::string();
}

void print_checks(const lab::RunResult& r) {
  for (const auto& c : r.summary["checks"])
    std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " = "
              << c["value"].dump() << " (" << c["relation"].get<std::string>() << " " << c["threshold"].dump()
              << ")\n";
  std::cout << (r.passed ? "all checks passed" : "some checks failed") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic mass-critical NLS lab"};
  app.require_subcommand(1);

  lab::RunConfig cfg;
  cfg.cache_dir = env_cache();
  std::string config_file;
  std::string ratios, snapshots;
  std::string modfit_input, modfit_pinit, modfit_out;
  double modfit_A = 10.0;
  double noise_amp = cfg.noise_amps.front();

  auto grid_opts = [&](CLI::App* c) {
    c->add_option("--dim", cfg.dim, "Spatial dimension (1 or 2)");
    c->add_option("--n", cfg.n, "Grid points per axis");
    c->add_option("--L", cfg.L, "Box half-length");
    c->add_option("--out", cfg.output_dir, "Output directory");
  };
  auto noise_opts = [&](CLI::App* c) {
    c->add_option("--seed", cfg.seed, "Random seed");
    c->add_option("--noise-modes", cfg.noise_modes, "Number of noise modes (0 = no noise)");
    c->add_option("--noise-amp", noise_amp, "Noise amplitude for every mode");
    c->add_option("--lift-cells", cfg.lift_cells, "Cells of the Brownian lift mesh");
  };
  auto solver_opts = [&](CLI::App* c) {
    c->add_option("--dt", cfg.dt0, "Base time step");
    c->add_flag("--adaptive", cfg.adaptive, "Adaptive time step");
    c->add_option("--scheme", cfg.scheme, "strang_gauge or yoshida4_gauge")
        ->transform(CLI::CheckedTransformer(std::map<std::string, Scheme>{{"strang_gauge", Scheme::strang_gauge},
                                                                          {"yoshida4_gauge", Scheme::yoshida4_gauge}}));
  };

  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", config_file, "Config file (key = value)")->required()->check(CLI::ExistingFile);

  auto* gs = app.add_subcommand("ground-state", "Solve for the ground state Q");
  grid_opts(gs);

  auto* ev = app.add_subcommand("evolve", "Evolve initial data with optional noise");
  grid_opts(ev);
  noise_opts(ev);
  solver_opts(ev);
  double T_flag = -1.0, t_end_flag = -1.0;
  ev->add_option("--T", T_flag, "Blow-up time of S_T; also the end time unless --t-end is given");
  ev->add_option("--t-end", t_end_flag, "End time");
  ev->add_option("--init", cfg.init, "Initial data: gaussian, ground or ST")
      ->transform(CLI::CheckedTransformer(std::map<std::string, lab::InitKind>{
          {"gaussian", lab::InitKind::gaussian}, {"ground", lab::InitKind::ground}, {"ST", lab::InitKind::ST}}));
  ev->add_option("--mass-ratio", cfg.mass_ratio, "L2-norm ratio ||u0|| / ||Q||");
  ev->add_option("--snapshots", snapshots, "Comma-separated snapshot times");
  ev->add_option("--snapshot-every", cfg.snapshot_every, "Snapshot spacing");

  auto* mf = app.add_subcommand("modfit", "Geometrical decomposition of snapshots");
  mf->add_option("--input", modfit_input, "Snapshot file, or directory with snapshots.csv")->required();
  mf->add_option("--pinit", modfit_pinit, "lambda,alpha..,beta..,gamma,theta")->required();
  mf->add_option("--out", modfit_out, "report.json (file input) or output directory")->required();
  mf->add_option("--A", modfit_A, "Cutoff scale of the generalized energy");

  auto* rc = app.add_subcommand("rough-check", "Weak rough-form residual of a gauged trajectory");
  grid_opts(rc);
  noise_opts(rc);
  rc->add_option("--t-end", cfg.t_end, "End time");
  rc->add_option("--mass-ratio", cfg.mass_ratio, "L2-norm ratio ||u0|| / ||Q||");
  rc->add_option("--seeds", cfg.ensemble, "Ensemble size; the rate is fitted to the mean residual");
  rc->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");

  auto* ts = app.add_subcommand("threshold-sweep", "Ensemble over mass ratios and seeds");
  grid_opts(ts);
  noise_opts(ts);
  solver_opts(ts);
  ts->add_option("--ratios", ratios, "Comma-separated mass ratios");
  ts->add_option("--seeds", cfg.ensemble, "Ensemble size per ratio");
  ts->add_option("--t-end", cfg.t_end, "End time");
  ts->add_option("--T", cfg.T, "Blow-up time of S_T for ratios >= 1");
  ts->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
  ts->add_flag("--member-diagnostics", cfg.member_diagnostics, "Write diagnostics.csv per member");

  CLI11_PARSE(app, argc, argv);

  try {
    lab::RunResult result;
    if (run->parsed()) {
      std::ifstream in(config_file, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      auto c = lab::RunConfig::parse(ss.str());
      if (c.cache_dir.empty()) c.cache_dir = env_cache();
      result = lab::run(c, ss.str());
    } else if (mf->parsed()) {
      lab::ModfitOptions opt;
      opt.input = modfit_input;
      opt.pinit = lab::parse_list(modfit_pinit);
      opt.out = modfit_out;
      if (!cfg.cache_dir.empty()) opt.cache_dir = cfg.cache_dir;
      opt.cutoff_A = modfit_A;
      result = lab::run_modfit(opt);
    } else {
      cfg.noise_amps = {noise_amp};
      if (gs->parsed()) {
        cfg.experiment = lab::Experiment::ground_state;
      } else if (ev->parsed()) {
        cfg.experiment = lab::Experiment::evolve;
        if (T_flag > 0.0) cfg.T = T_flag;
        cfg.t_end = t_end_flag > 0.0 ? t_end_flag : (T_flag > 0.0 ? T_flag : cfg.t_end);
        if (!snapshots.empty()) cfg.snapshot_times = lab::parse_list(snapshots);
      } else if (rc->parsed()) {
        cfg.experiment = lab::Experiment::rough_check;
      } else if (ts->parsed()) {
        cfg.experiment = lab::Experiment::threshold_sweep;
        if (!ratios.empty()) cfg.mass_ratios = lab::parse_list(ratios);
      }
      result = lab::run(cfg);
    }
    print_checks(result);
    return result.passed ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
