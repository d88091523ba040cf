#ifndef THERMALEQ_BATH_HPP
#define THERMALEQ_BATH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "thermaleq/hilbert.hpp"

// Reservoir spectra, Gibbs weights and density-of-states estimates.
//
// Three bath families:
//   ladder        equally spaced levels on [0, W]
//   random-matrix eigenvalues of a seeded Gaussian ensemble, rescaled to [0, W]
//   spin-gas      all 2^k subset sums of k per-particle splittings (the
//                 exponentially dense spectrum); splittings default to W/k each

namespace thermaleq {

enum class BathModel { ladder, random_matrix, spin_gas };

enum class RandomMatrixEnsemble { gue, goe };

struct BathSpec {
  BathModel model = BathModel::ladder;
  int n_states = 16;
  double spectral_width = 1.0;
  std::uint64_t seed = 1;
  RandomMatrixEnsemble ensemble = RandomMatrixEnsemble::gue;
  std::vector<double> splittings;  // spin-gas only; empty -> k equal splittings of W/k

  void validate() const;
};

struct BathSpectrum {
  VectorXd energies;  // ascending
  BathSpec spec;

  int size() const { return static_cast<int>(energies.size()); }
};

struct ThermalWeights {
  double beta = 0.0;
  VectorXd weights;        // A_j, sums to 1
  double e_shift = 0.0;    // ground energy used for overflow-safe exponentials
  double z_shifted = 1.0;  // sum_j exp(-beta (E_j - e_shift))
  double z_unshifted = 1.0;  // z_shifted * exp(-beta e_shift); may under/overflow
};

struct DensityOfStates {
  VectorXd edges;            // n_bins + 1 ascending edges
  VectorXd omega;            // counts per unit energy
  std::vector<int> counts;   // raw counts per bin
  int total_states = 0;
  double bin_width = 1.0;
};

BathSpectrum bath_spectrum(const BathSpec& spec);

/// Gibbs weights A_j = exp(-beta (E_j - E_min)) / sum, beta >= 0.
ThermalWeights gibbs_weights(const BathSpectrum& spectrum, double beta);

/// Equal-width histogram of an energy list, counts divided by bin width.
/// A fully degenerate list lands in one bin of nominal width 1.
DensityOfStates density_of_states(const VectorXd& energies, int n_bins);

}  // namespace thermaleq

#endif
