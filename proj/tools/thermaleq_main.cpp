#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thermaleq/runner.hpp"

namespace {

// Flags override the corresponding config fields after parsing.
void apply_overrides(thermaleq::ExperimentConfig& config, const std::string& out_dir,
                     int threads) {
  if (!out_dir.empty()) config.output.directory = out_dir;
  if (threads > 0) config.threads = threads;
  config.validate();
}

thermaleq::PartitionModel model_from_flags(const std::string& name, int np, double gap,
                                           double volume_factor,
                                           const std::vector<double>& frequencies,
                                           const std::vector<double>& energies) {
  using thermaleq::PartitionModel;
  if (name == "two-level-gas") return PartitionModel::two_level(np, gap);
  if (name == "classical-ideal-gas") return PartitionModel::classical_gas(np, volume_factor);
  if (name == "oscillator-bath") return PartitionModel::oscillators(frequencies);
  if (name == "explicit-spectrum") return PartitionModel::explicit_levels(energies);
  throw CLI::ValidationError("--model", "expected two-level-gas, classical-ideal-gas, "
                                        "oscillator-bath or explicit-spectrum");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermaleq: two-level system in a finite thermal bath, exact diagonalization"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int threads = 0;

  auto* simulate = app.add_subcommand("simulate", "single run from a config file");
  simulate->add_option("--config", config_path, "JSON config file")->required();
  simulate->add_option("--out", out_dir, "output directory (overrides config)");
  simulate->add_option("--threads", threads, "worker threads (overrides config)");

  auto* sweep = app.add_subcommand("sweep", "beta/lambda/N/seed sweep from a config file");
  sweep->add_option("--config", config_path, "JSON config file")->required();
  sweep->add_option("--out", out_dir, "output directory (overrides config)");
  sweep->add_option("--threads", threads, "worker threads (overrides config)");

  double delta = 1.0, gap = 1.0, volume_factor = 1.0, beta_ref = 1.0;
  int nmax = 16, np = 1;
  std::string model_name = "two-level-gas";
  std::vector<double> x_grid, frequencies, energies;
  auto* laplace = app.add_subcommand("laplace", "residue partial-sum diagnostic");
  laplace->add_option("--delta", delta, "two-level spacing in the denominator")->required();
  laplace->add_option("--model", model_name,
                      "two-level-gas | classical-ideal-gas | oscillator-bath | explicit-spectrum")
      ->required();
  laplace->add_option("--nmax", nmax, "number of symmetric pole pairs")->required();
  laplace->add_option("--x", x_grid, "x grid (comma separated, each >= 0)")
      ->required()
      ->delimiter(',');
  laplace->add_option("--np", np, "particle count (two-level-gas, classical-ideal-gas)");
  laplace->add_option("--gap", gap, "two-level-gas level spacing");
  laplace->add_option("--volume-factor", volume_factor, "classical-ideal-gas prefactor");
  laplace->add_option("--frequencies", frequencies, "oscillator-bath frequencies")
      ->delimiter(',');
  laplace->add_option("--energies", energies, "explicit-spectrum energies")->delimiter(',');
  laplace->add_option("--beta-ref", beta_ref, "normalization point for Zbar");
  laplace->add_option("--out", out_dir, "output directory");

  auto* oracle = app.add_subcommand("oracle-check", "small-instance oracle battery");
  oracle->add_option("--config", config_path, "JSON config file (small default when omitted)");
  oracle->add_option("--out", out_dir, "output directory (overrides config)");

  auto* schema = app.add_subcommand("config-schema", "print the default config and field docs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      auto config = thermaleq::ExperimentConfig::from_file(config_path);
      apply_overrides(config, out_dir, threads);
      return thermaleq::run_single(config);
    }
    if (sweep->parsed()) {
      auto config = thermaleq::ExperimentConfig::from_file(config_path);
      apply_overrides(config, out_dir, threads);
      return thermaleq::run_sweep(config);
    }
    if (laplace->parsed()) {
      thermaleq::LaplaceRunParams params;
      params.delta = delta;
      params.model = model_from_flags(model_name, np, gap, volume_factor, frequencies, energies);
      params.k_max = nmax;
      params.x_grid = x_grid;
      params.beta_ref = beta_ref;
      if (!out_dir.empty()) params.out_dir = out_dir;
      return thermaleq::run_laplace(params);
    }
    if (oracle->parsed()) {
      auto config = config_path.empty() ? thermaleq::default_oracle_config()
                                        : thermaleq::ExperimentConfig::from_file(config_path);
      if (!out_dir.empty()) config.output.directory = out_dir;
      return thermaleq::run_oracle_check(config);
    }
    if (schema->parsed()) {
      std::printf("%s\n", thermaleq::config_schema().dump(2).c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
