#include "thermaleq/bath.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "thermaleq/rng.hpp"

namespace thermaleq {

void BathSpec::validate() const {
  if (n_states < 1) throw std::invalid_argument("bath: n_states must be >= 1");
  if (!(spectral_width > 0.0) || !std::isfinite(spectral_width))
    throw std::invalid_argument("bath: spectral_width must be finite and > 0");
  if (model == BathModel::spin_gas) {
    int k = 0;
    while ((1 << k) < n_states) ++k;
    if ((1 << k) != n_states)
      throw std::invalid_argument("bath: spin-gas n_states must be a power of two");
    if (!splittings.empty() && static_cast<int>(splittings.size()) != k)
      throw std::invalid_argument("bath: spin-gas needs one splitting per particle (log2 n_states)");
    for (double s : splittings)
      if (!std::isfinite(s) || s < 0.0)
        throw std::invalid_argument("bath: spin-gas splittings must be finite and >= 0");
  }
}

namespace {

VectorXd ladder_energies(int n, double width) {
  VectorXd e(n);
  if (n == 1) {
    e[0] = 0.0;  // degenerate spec: single level at 0
    return e;
  }
  for (int j = 0; j < n; ++j) e[j] = j * width / (n - 1);
  return e;
}

VectorXd random_matrix_energies(const BathSpec& spec) {
  rng::Stream stream(spec.seed, "bath/random-matrix");
  const int n = spec.n_states;
  MatrixXcd m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      auto [x, y] = stream.next_gaussian_pair();
      m(r, c) = spec.ensemble == RandomMatrixEnsemble::gue ? complexd(x, y) * M_SQRT1_2
                                                           : complexd(x, 0.0);
    }
  MatrixXcd h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  VectorXd e = es.eigenvalues();
  const double lo = e.minCoeff(), hi = e.maxCoeff();
  if (hi > lo)
    e = (e.array() - lo) * (spec.spectral_width / (hi - lo));
  else
    e.setZero();
  return e;
}

VectorXd spin_gas_energies(const BathSpec& spec) {
  int k = 0;
  while ((1 << k) < spec.n_states) ++k;
  std::vector<double> split = spec.splittings;
  if (split.empty()) split.assign(k, k > 0 ? spec.spectral_width / k : spec.spectral_width);
  VectorXd e(spec.n_states);
  for (int mask = 0; mask < spec.n_states; ++mask) {
    double sum = 0.0;
    for (int p = 0; p < k; ++p)
      if (mask & (1 << p)) sum += split[p];
    e[mask] = sum;
  }
  std::sort(e.data(), e.data() + e.size());
  return e;
}

}  // namespace

BathSpectrum bath_spectrum(const BathSpec& spec) {
  spec.validate();
  VectorXd e;
  switch (spec.model) {
    case BathModel::ladder: e = ladder_energies(spec.n_states, spec.spectral_width); break;
    case BathModel::random_matrix: e = random_matrix_energies(spec); break;
    case BathModel::spin_gas: e = spin_gas_energies(spec); break;
  }
  std::sort(e.data(), e.data() + e.size());
  return BathSpectrum{std::move(e), spec};
}

ThermalWeights gibbs_weights(const BathSpectrum& spectrum, double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw std::domain_error("gibbs_weights: beta must be finite and >= 0");
  const int n = spectrum.size();
  if (n < 1) throw std::invalid_argument("gibbs_weights: empty spectrum");

  ThermalWeights w;
  w.beta = beta;
  w.e_shift = spectrum.energies.minCoeff();
  w.weights.resize(n);
  long double z = 0.0L;
  for (int j = 0; j < n; ++j) {
    const double a = std::exp(-beta * (spectrum.energies[j] - w.e_shift));
    w.weights[j] = a;
    z += a;
  }
  w.z_shifted = static_cast<double>(z);
  w.weights /= w.z_shifted;
  w.z_unshifted = w.z_shifted * std::exp(-beta * w.e_shift);
  return w;
}

DensityOfStates density_of_states(const VectorXd& energies, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("density_of_states: n_bins must be >= 1");
  if (energies.size() < 1) throw std::invalid_argument("density_of_states: empty energy list");

  const double lo = energies.minCoeff(), hi = energies.maxCoeff();
  DensityOfStates d;
  d.total_states = static_cast<int>(energies.size());
  if (hi <= lo) {
    // fully degenerate: one bin of nominal width 1 around the value
    d.bin_width = 1.0;
    d.edges = VectorXd(2);
    d.edges << lo - 0.5, lo + 0.5;
    d.counts = {d.total_states};
    d.omega = VectorXd::Constant(1, d.total_states / d.bin_width);
    return d;
  }
  d.bin_width = (hi - lo) / n_bins;
  d.edges = VectorXd::LinSpaced(n_bins + 1, lo, hi);
  d.counts.assign(n_bins, 0);
  for (Eigen::Index j = 0; j < energies.size(); ++j) {
    int b = static_cast<int>((energies[j] - lo) / d.bin_width);
    b = std::clamp(b, 0, n_bins - 1);  // top edge inclusive
    ++d.counts[b];
  }
  d.omega.resize(n_bins);
  for (int b = 0; b < n_bins; ++b) d.omega[b] = d.counts[b] / d.bin_width;
  return d;
}

}  // namespace thermaleq
