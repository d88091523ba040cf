#ifndef THERMALEQ_HILBERT_HPP
#define THERMALEQ_HILBERT_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

// Product-space bookkeeping for a small n-level system coupled to an
// N-state reservoir: composite basis indexing, Hamiltonian assembly,
// density-matrix validation and the bath partial trace.
//
// Basis order is system-major: product state (i, j) with system level i
// in [0, n) and bath state j in [1, N] (1-based, as in reports) sits at
// composite index i*N + (j-1). Bath indices are 0-based everywhere else
// in the code.

namespace thermaleq {

using complexd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

inline constexpr int default_dimension_cap = 4096;

struct SystemSpec {
  int n_levels = 2;
  // ascending level energies; default two-level with unit gap
  std::vector<double> level_energies = {0.0, 1.0};

  double gap() const { return level_energies[1] - level_energies[0]; }
  void validate() const;
};

enum class CouplingStructure {
  random_hermitian,        // dense Hermitian on the full composite space
  system_flip_random_bath  // nearest-level flip (x) random Hermitian bath operator
};

struct CouplingSpec {
  double strength = 0.0;  // lambda, >= 0
  CouplingStructure structure = CouplingStructure::random_hermitian;
  std::uint64_t seed = 1;

  void validate() const;
};

struct CompositeHamiltonian {
  int n_levels = 0;
  int bath_size = 0;
  double lambda = 0.0;
  MatrixXcd matrix;         // full H = H_S (x) I + I (x) H_R + lambda V
  MatrixXcd coupling_unit;  // V with unit operator norm (empty when lambda == 0 never built)
  VectorXd bath_energies;
  std::vector<double> system_energies;

  int dimension() const { return n_levels * bath_size; }
};

enum class SpaceTag { composite, system };

struct DensityMatrix {
  SpaceTag tag = SpaceTag::composite;
  MatrixXcd rho;

  Eigen::Index dimension() const { return rho.rows(); }
};

struct DensityDiagnostics {
  double trace_deviation = 0.0;    // |Tr rho - 1|
  double hermiticity_deviation = 0.0;  // max |rho - rho^dagger|
  double min_eigenvalue = 0.0;
  bool trace_ok = true;
  bool hermitian_ok = true;
  bool positive_ok = true;

  bool ok() const { return trace_ok && hermitian_ok && positive_ok; }
};

inline constexpr double density_trace_tol = 1e-10;
inline constexpr double density_hermiticity_tol = 1e-10;
inline constexpr double density_positivity_tol = -1e-10;

/// Composite index of product state |i j> (bath index 1-based).
int product_index(int i, int j, int n_levels, int bath_size);

/// Inverse of product_index: (system level, 1-based bath state).
std::pair<int, int> product_index_inverse(int idx, int n_levels, int bath_size);

/// Unit-operator-norm coupling matrix for the given structure and seed.
/// Deterministic; independent of lambda and of temperature.
MatrixXcd build_coupling_matrix(CouplingStructure structure, std::uint64_t seed,
                                int n_levels, int bath_size);

/// H = H_S (x) I + I (x) H_R + lambda V on the n*N product space.
/// Throws std::length_error when n*N exceeds dimension_cap.
CompositeHamiltonian build_hamiltonian(const SystemSpec& sys,
                                       const VectorXd& bath_energies,
                                       const CouplingSpec& coupling,
                                       int dimension_cap = default_dimension_cap);

/// Same, reusing an already-built unit-norm coupling matrix (sweeps scan
/// lambda without redrawing V).
CompositeHamiltonian build_hamiltonian(const SystemSpec& sys,
                                       const VectorXd& bath_energies,
                                       const MatrixXcd& coupling_unit,
                                       double lambda,
                                       int dimension_cap = default_dimension_cap);

/// Trace out the reservoir: (rho_S)_{i i'} = sum_k rho_{(i k), (i' k)}.
DensityMatrix partial_trace_bath(const DensityMatrix& rho, int n_levels, int bath_size);

/// Trace, hermiticity and positivity diagnostics; never throws on a square input.
DensityDiagnostics validate_density_matrix(const DensityMatrix& rho);

}  // namespace thermaleq

#endif
