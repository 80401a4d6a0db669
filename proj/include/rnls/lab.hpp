#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rnls/evolve.hpp"
#include "rnls/profiles.hpp"

namespace rnls::lab {

enum class Experiment { ground_state, exact_soliton, pseudoconformal, threshold_sweep, rough_check, modulation_track, evolve };
enum class InitKind { gaussian, ground, ST };

std::string to_string(Experiment e);
std::string to_string(InitKind k);

inline constexpr int kSummaryVersion = 1;

/// One run: flat `key = value` text, `#` starts a comment. Every key has a
/// type and a default; unknown keys and malformed values are errors.
struct RunConfig {
  Experiment experiment = Experiment::evolve;

  int dim = 1;
  int n = 1024;
  double L = 16.0;

  double dt0 = 1e-3;
  bool adaptive = false;
  double dt_c = 0.1;
  double dt_min = 1e-10;
  double t_end = 1.0;
  Scheme scheme = Scheme::strang_gauge;
  double gradnorm_cap = 0.0;
  double width_floor_cells = 8.0;

  int noise_modes = 0;
  std::vector<double> noise_amps{0.05};
  std::vector<double> noise_widths;
  int lift_substeps = 8;
  /// Cells of the Brownian lift mesh; 0 uses one cell per dt0.
  int lift_cells = 0;

  std::uint64_t seed = 1;
  /// Ensemble members use seeds seed, seed + 1, ..., seed + ensemble - 1.
  int ensemble = 1;
  /// Worker threads for ensembles; 0 uses the hardware concurrency.
  int threads = 0;

  InitKind init = InitKind::ground;
  /// L2-norm ratio ||u0|| / ||Q||.
  double mass_ratio = 0.9;
  std::vector<double> mass_ratios{0.8, 0.9, 0.95, 1.0};
  /// Blow-up time of S_T.
  double T = 1.0;
  double t0 = 0.0;

  std::vector<double> snapshot_times;
  double snapshot_every = 0.0;
  bool member_diagnostics = false;
  double cutoff_A = 10.0;

  std::string output_dir = "out";
  std::string cache_dir;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Sets one key from its text form; throws naming the key on failure.
  void set(const std::string& key, const std::string& value);
  /// Canonical text with every key, in schema order.
  std::string to_text() const;
  void validate() const;
  static std::vector<std::string> keys();
};

/// Comma-separated reals.
std::vector<double> parse_list(const std::string& text);

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  double threshold_hi = 0.0;  ///< upper end for "in"
  std::string relation;  ///< "<", "<=", ">=", "==", "!=", "in"
  bool pass = false;
};

/// Versioned summary shared by every experiment.
class Summary {
 public:
  Summary(std::string experiment, std::uint64_t seed);

  void check(const std::string& name, double value, const std::string& relation, double threshold);
  /// For the "in" relation: lo <= value <= hi.
  void check_in(const std::string& name, double value, double lo, double hi);
  void check_flag(const std::string& name, bool ok);

  nlohmann::ordered_json& results() { return results_; }
  void artifact(const std::string& file) { artifacts_.push_back(file); }
  bool passed() const;
  const std::vector<Check>& checks() const { return checks_; }
  nlohmann::ordered_json to_json() const;

 private:
  std::string experiment_;
  std::uint64_t seed_;
  std::vector<Check> checks_;
  std::vector<std::string> artifacts_;
  nlohmann::ordered_json results_ = nlohmann::ordered_json::object();
};

struct RunResult {
  nlohmann::ordered_json summary;
  bool passed = false;
  std::filesystem::path output_dir;
};

/// Runs one config into cfg.output_dir: config.txt (echo of config_text, or
/// the canonical text when empty), summary.json and the experiment's data files.
RunResult run(const RunConfig& cfg, const std::string& config_text = "");

struct ModfitOptions {
  std::filesystem::path input;  ///< snapshot file, or a directory with snapshots.csv
  std::vector<double> pinit;    ///< lambda, alpha_1..d, beta_1..d, gamma, theta
  std::filesystem::path out;    ///< report.json (file input) or output directory
  std::optional<std::filesystem::path> cache_dir;
  double cutoff_A = 10.0;
};

/// Decomposition of one snapshot, or modulation tracking over a directory.
RunResult run_modfit(const ModfitOptions& opt);

/// Largest gradient norm relative to its running median (two-heap median).
double max_running_median_ratio(const std::vector<double>& values);

}  // namespace rnls::lab
