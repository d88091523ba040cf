#ifndef THERMALEQ_RUNNER_HPP
#define THERMALEQ_RUNNER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermaleq/bath.hpp"
#include "thermaleq/gibbs_laplace.hpp"
#include "thermaleq/hilbert.hpp"

// Experiment orchestration: a single JSON config is the source of truth,
// sweeps run on a worker pool with index-ordered record assembly, and all
// result files are deterministic functions of the config. Wall-clock
// timings go to a separate file that is exempt from that contract.

namespace thermaleq {

inline constexpr const char* artifact_version = "1.0.0";

struct TimeAverageSettings {
  bool enabled = false;
  double t_avg = 0.0;  // <= 0 selects 1e4 / (smallest populated frequency gap)
  int n_samples = 4096;
};

struct OutputSettings {
  std::string directory = ".";
  bool dump_density_matrices = false;
};

struct ExperimentConfig {
  SystemSpec system;
  BathSpec bath;  // per-point seed is derived from the master seed, see below
  CouplingStructure coupling_structure = CouplingStructure::random_hermitian;
  std::vector<int> n_states_list;
  std::vector<double> beta_list;
  std::vector<double> lambda_list;
  // Master seeds. Each sweep point derives independent bath and coupling
  // streams: bath seed = derive_key(s, "bath"), coupling seed =
  // derive_key(s, "coupling").
  std::vector<std::uint64_t> seed_list;
  double epsilon_degeneracy = -1.0;  // < 0 selects 1e-9 of the spectral spread
  TimeAverageSettings time_average;
  int initial_level = 0;
  int dos_bins = 0;  // 0 selects ceil(sqrt(N))
  OutputSettings output;
  int threads = 0;  // 0 defers to THERMALEQ_THREADS, then 1
  int max_dimension = default_dimension_cap;
  int max_memory_mb = 2048;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;  // fully resolved echo, embedded in outputs
  void validate() const;
  int resolve_threads() const;
};

struct PointRecord {
  int n_states = 0;
  double beta = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or the failure message
  double p0_diag = 0.0;
  double p0_gibbs = 0.0;
  double deviation = 0.0;
  double beta_eff = 0.0;
  bool beta_eff_finite = true;
  double consistency_err = 0.0;  // |p0_diag - sum_j A_j f_j|
  double sum_rule_err = 0.0;     // max_j |sum_n f_j^(n) - 1|
  int n_classes = 0;
  int max_class_size = 0;
  double p0_offdiag_part = 0.0;
  double trace_dev = 0.0;
  double herm_dev = 0.0;
  double min_eig = 0.0;
  bool has_time_average = false;
  double p0_timeavg = 0.0;
  double timeavg_dev = 0.0;
  double t_avg_used = 0.0;
  double wall_seconds = 0.0;  // never written to deterministic files
};

struct SweepOutcome {
  std::vector<PointRecord> records;  // ordered by (N idx, beta idx, lambda idx, seed idx)
  bool all_ok = true;
};

/// Pure sweep execution; identical output for any worker count.
SweepOutcome execute_sweep(const ExperimentConfig& config);

/// Sweep plus results.csv / summary.json / timings.csv emission.
/// Returns a process exit status (nonzero when any point failed).
int run_sweep(const ExperimentConfig& config);

/// Single-point run (all parameter lists of length one) emitting
/// result.json, bath.csv and optional density-matrix dumps.
int run_single(const ExperimentConfig& config);

struct LaplaceRunParams {
  double delta = 1.0;
  PartitionModel model;
  int k_max = 16;
  std::vector<double> x_grid;
  double beta_ref = 1.0;
  std::string out_dir = ".";
};

/// Residue partial-sum report emitting laplace.json and laplace.csv.
int run_laplace(const LaplaceRunParams& params);

/// Small-instance oracle battery (D <= 64 enforced): prints one
/// PASS/FAIL line per oracle with the measured error and threshold,
/// writes oracle.json, and returns nonzero when any oracle fails.
int run_oracle_check(const ExperimentConfig& config);

/// The config used by `oracle-check` when none is supplied.
ExperimentConfig default_oracle_config();

/// Default config plus per-field documentation, for `config-schema`.
nlohmann::json config_schema();

/// RFC-4180 field quoting (used by all CSV emitters).
std::string csv_field(const std::string& raw);

/// Shortest round-trip decimal form ("%.17g"); nan/inf spelled out.
std::string format_double(double v);

}  // namespace thermaleq

#endif
