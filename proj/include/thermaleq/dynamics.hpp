#ifndef THERMALEQ_DYNAMICS_HPP
#define THERMALEQ_DYNAMICS_HPP

#include <vector>

#include "thermaleq/bath.hpp"
#include "thermaleq/hilbert.hpp"

// Exact diagonalization and what follows from it: unitary evolution of
// the composite density matrix, the infinite-time (diagonal-ensemble)
// average, the temperature-independent overlap weights f_j, and the
// explicit finite-time average used as an independent check.
//
// Conventions. transform's column l is the interacting eigenvector |l>
// expressed over product states, so T_{l(ij)} = transform(i*N + j, l)
// with 0-based bath index j. Evolution multiplies eigenbasis entry
// (l, m) by exp(+i (omega_l - omega_m) t).

namespace thermaleq {

struct EigenSystem {
  int n_levels = 0;
  int bath_size = 0;
  VectorXd omega;      // ascending frequencies
  MatrixXcd transform; // unitary; column l = eigenvector l over product states

  int dimension() const { return n_levels * bath_size; }
};

// Frequencies equal within epsilon form a class; since omega is ascending
// each class is a contiguous index range [begin, end).
struct DegeneracyClasses {
  struct Range {
    int begin = 0;
    int end = 0;
    int size() const { return end - begin; }
  };
  std::vector<Range> classes;
  double epsilon = 0.0;

  int count() const { return static_cast<int>(classes.size()); }
  int max_size() const;
};

struct DiagonalEnsembleResult {
  DensityMatrix rho_s_inf;               // system-space stationary matrix
  double p0 = 0.0;                       // (rho_s_inf)_{0,0}
  VectorXd f;                            // per-bath-level overlap weights for level 0
  std::vector<double> class_p0_contrib;  // per-class contribution to p0
  double p0_diagonal_part = 0.0;         // l == m terms of p0
  double p0_offdiagonal_part = 0.0;      // l != m intra-class terms
};

struct FBinned {
  std::vector<double> centers;  // bin centers with at least one state
  std::vector<double> mean_f;   // average f_j over the bin
  std::vector<int> counts;
  std::vector<double> omega;    // counts / bin width
  double bin_width = 1.0;
  double e_min = 0.0;
};

/// Full spectral decomposition of a composite Hamiltonian. Eigenvector
/// phases are fixed by making the largest-magnitude component real
/// positive, so repeated runs are comparable.
EigenSystem eigendecompose(const CompositeHamiltonian& h);

/// rho(0) = sum_j A_j |i0 j><i0 j|, diagonal in the product basis.
DensityMatrix initial_composite_state(int initial_level, const ThermalWeights& weights,
                                      int n_levels);

/// Unitary evolution by time t in the interacting eigenbasis.
DensityMatrix evolve(const DensityMatrix& rho0, const EigenSystem& eig, double t);

/// Greedy left-to-right clustering of ascending frequencies: a gap
/// larger than epsilon starts a new class.
DegeneracyClasses degeneracy_classes(const VectorXd& omega, double epsilon);

/// Default tolerance: 1e-9 of the spectral spread.
double default_degeneracy_epsilon(const VectorXd& omega);

/// Keep only eigenbasis entries within a degeneracy class, transform
/// back and trace out the bath. f is computed alongside so that
/// p0 == sum_j A_j f_j holds for product-form initial states.
DiagonalEnsembleResult diagonal_ensemble(const EigenSystem& eig, const DensityMatrix& rho0,
                                         const DegeneracyClasses& classes,
                                         int initial_level = 0);

/// The quadruple overlap sum restricted to intra-class (l, m) pairs,
/// summed over the bath index at target_level. Temperature never enters.
VectorXd f_weights(const EigenSystem& eig, const DegeneracyClasses& classes,
                   int initial_level = 0, int target_level = 0);

/// f_j aggregated into density-of-states bins by bath energy.
/// Empty bins are omitted, not reported as zero.
FBinned f_binned(const VectorXd& f, const VectorXd& bath_energies,
                 const DensityOfStates& dos);

/// Midpoint-grid average of partial_trace_bath(evolve(rho0, t)) over
/// t in [0, t_avg]. The average is accumulated in the eigenbasis and
/// transformed once at the end (the two orders agree by linearity).
DensityMatrix time_average(const DensityMatrix& rho0, const EigenSystem& eig,
                           double t_avg, int n_samples);

/// Smallest |omega_l - omega_m| exceeding epsilon among pairs carrying
/// initial-state weight. Sets the time scale of the finite-time check.
/// Returns 0 when no pair is populated (the state is stationary).
double min_nonzero_gap(const EigenSystem& eig, const DensityMatrix& rho0, double epsilon);

}  // namespace thermaleq

#endif
