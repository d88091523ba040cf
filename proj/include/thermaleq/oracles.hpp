#ifndef THERMALEQ_ORACLES_HPP
#define THERMALEQ_ORACLES_HPP

#include "thermaleq/dynamics.hpp"
#include "thermaleq/hilbert.hpp"

// Slow reference implementations kept deliberately independent of the
// production routines: separate index arithmetic, matrix-exponential
// propagation instead of eigenphase rotation, and plain quadruple loops
// instead of the blocked accumulations. Used by the test suite and the
// oracle-check runner; dimensions are expected to stay small.

namespace thermaleq {
namespace oracle {

/// Partial trace over the bath by explicit four-index summation.
MatrixXcd partial_trace_loop(const MatrixXcd& rho, int n_levels, int bath_size);

/// rho(t) = U rho U^dagger with U = exp(+i H t) built by scaling-and-squaring.
MatrixXcd evolve_expm(const MatrixXcd& rho0, const MatrixXcd& hamiltonian, double t);

/// Overlap weights by the unblocked quadruple loop over degenerate pairs.
std::vector<double> f_weights_loop(const EigenSystem& eig, const DegeneracyClasses& classes,
                                   int initial_level = 0, int target_level = 0);

/// Infinite-time average by masking the eigenbasis matrix and rotating back,
/// rather than accumulating reduced entries pairwise.
DensityMatrix diagonal_ensemble_masked(const EigenSystem& eig, const DensityMatrix& rho0,
                                       const DegeneracyClasses& classes);

}  // namespace oracle
}  // namespace thermaleq

#endif
