#ifndef THERMALEQ_GIBBS_LAPLACE_HPP
#define THERMALEQ_GIBBS_LAPLACE_HPP

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermaleq/bath.hpp"
#include "thermaleq/dynamics.hpp"

// The equilibrium-statistical-mechanics side of the comparison: the
// two-level Gibbs probability, deviation metrics against simulated
// stationary values, and a numerical pole/residue diagnostic for the
// inverse-Laplace consistency condition
//
//     integral exp(-beta x) fbar(x) dx  =  Zbar(beta) / (1 + exp(-beta delta))
//
// whose right-hand side has simple poles at beta = i (2n+1) pi / delta.
// The diagnostic sums residues e^{beta_n x} Zbar(beta_n)/delta over
// symmetric pole pairs and reports the measured tail behavior; it does
// not assume a verdict.

namespace thermaleq {

struct PoleCollisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ResidueConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PartitionKind { two_level_gas, classical_ideal_gas, oscillator_bath, explicit_spectrum };

struct PartitionModel {
  PartitionKind kind = PartitionKind::two_level_gas;
  int n_particles = 1;        // two-level-gas, classical-ideal-gas
  double volume_factor = 1.0; // classical-ideal-gas prefactor
  double gap = 1.0;           // two-level-gas level spacing
  std::vector<double> frequencies;  // oscillator-bath
  std::vector<double> energies;     // explicit-spectrum

  static PartitionModel two_level(int n_particles, double gap);
  static PartitionModel classical_gas(int n_particles, double volume_factor = 1.0);
  static PartitionModel oscillators(std::vector<double> frequencies);
  static PartitionModel explicit_levels(std::vector<double> energies);

  void validate() const;
  std::string name() const;
};

// A pole carries its integer index so pole-lattice evaluations can use
// exact odd-multiple-of-pi phases instead of a rounded complex beta.
struct Pole {
  int n = 0;
  double delta = 1.0;

  std::complex<double> beta() const;
};

struct ResiduePair {
  std::complex<double> formula;  // e^{beta_n x} Zbar(beta_n) / delta
  std::complex<double> numeric;  // shrinking-circle limit of (beta - beta_n) e^{beta x} rhs(beta)
  double rel_disagreement = 0.0;
  int halvings = 0;  // radius halvings until the limit settled
};

struct LaplacePoleInfo {
  int n = 0;
  std::complex<double> beta;
  double denominator_abs = 0.0;          // |1 + e^{-beta delta}| at the pole
  std::complex<double> zbar;             // normalized partition value at the pole
  std::complex<double> residue_factor;   // zbar / delta
  bool excluded = false;
  std::string exclusion_reason;
};

struct LaplaceReport {
  double delta = 1.0;
  std::string model_name;
  double beta_ref = 1.0;
  double z_ref = 1.0;
  int k_max = 0;
  std::vector<double> x_grid;
  std::vector<LaplacePoleInfo> poles;  // n = -k_max .. k_max-1, ascending in n
  // pair k combines poles n = k and n = -k-1; magnitudes are x-independent
  std::vector<double> pair_term_abs;
  // partial_sums[xi][K-1] = S_K(x) for K = 1..k_max
  std::vector<std::vector<std::complex<double>>> partial_sums;
  double fitted_decay_exponent = 0.0;
  bool fit_valid = false;
  std::vector<std::string> verdicts;     // per x: converged | oscillatory | diverging
  std::vector<double> tail_last_abs;     // per x
  std::vector<double> tail_sum_spread;   // per x, spread of S_K over the last quarter
};

/// Gibbs ground-state probability 1 / (1 + exp(-beta delta)).
double gibbs_p0(double beta, double delta);

/// n-level generalization: exp(-beta E_0) / sum_i exp(-beta E_i).
double gibbs_p0_levels(double beta, const std::vector<double>& level_energies);

struct DeviationReport {
  double p0_sim = 0.0;
  double p0_gibbs = 0.0;
  double deviation = 0.0;  // p0_sim - p0_gibbs
  double beta_eff = 0.0;   // inverse temperature reproducing p0_sim; +-inf at the endpoints
  bool beta_eff_finite = true;
};

/// Signed Gibbs deviation and effective inverse temperature
/// ln(p0 / (1 - p0)) / delta.
DeviationReport deviation_report(double p0_sim, double beta, double delta);

/// Same against an n-level Gibbs prediction (beta_eff by monotone solve).
DeviationReport deviation_report_levels(double p0_sim, double beta,
                                        const std::vector<double>& level_energies);

/// Density-of-states quadrature over f bins; cross-checks sum_j A_j f_j.
double p0_quadrature(const FBinned& bins, const ThermalWeights& weights);

/// Partition value at complex beta, principal branch for fractional powers.
std::complex<double> partition_value(const PartitionModel& model, std::complex<double> beta);

/// Partition value exactly on the pole lattice beta = i (2n+1) pi / delta.
/// Exponentials are evaluated with phases reduced in units of pi, so a
/// matched two-level-gas factor vanishes identically.
std::complex<double> partition_value_at_pole(const PartitionModel& model, const Pole& pole);

/// Zbar(beta) / (1 + exp(-beta delta)) with Zbar = Z / Z(beta_ref).
std::complex<double> rhs_function(std::complex<double> beta, double delta,
                                  const PartitionModel& model, double beta_ref = 1.0);

/// beta_n = i (2n+1) pi / delta for n in [n_lo, n_hi].
std::vector<Pole> poles(double delta, int n_lo, int n_hi);

/// Residue of e^{beta x} rhs(beta) at pole n, by formula and by numeric
/// shrinking-circle limit. Throws ResidueConvergenceError if the circle
/// estimates never settle.
ResiduePair residue(int n, double x, double delta, const PartitionModel& model,
                    double beta_ref = 1.0);

/// Symmetric partial sums S_K(x) for K = 1..k_max with measured tail
/// diagnostics and a per-x verdict.
LaplaceReport residue_partial_sums(const std::vector<double>& x_grid, double delta,
                                   const PartitionModel& model, int k_max,
                                   double beta_ref = 1.0);

}  // namespace thermaleq

#endif
