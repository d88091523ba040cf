#include "thermaleq/oracles.hpp"

#include <complex>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace thermaleq {
namespace oracle {

MatrixXcd partial_trace_loop(const MatrixXcd& rho, int n_levels, int bath_size) {
  if (rho.rows() != rho.cols() || rho.rows() != static_cast<long>(n_levels) * bath_size)
    throw std::invalid_argument("partial_trace_loop: dimension mismatch");
  MatrixXcd out = MatrixXcd::Zero(n_levels, n_levels);
  for (int a = 0; a < n_levels; ++a)
    for (int b = 0; b < n_levels; ++b)
      for (int k = 0; k < bath_size; ++k)
        out(a, b) += rho(a * bath_size + k, b * bath_size + k);
  return out;
}

MatrixXcd evolve_expm(const MatrixXcd& rho0, const MatrixXcd& hamiltonian, double t) {
  if (rho0.rows() != hamiltonian.rows() || rho0.cols() != hamiltonian.cols())
    throw std::invalid_argument("evolve_expm: dimension mismatch");
  MatrixXcd u = (std::complex<double>(0.0, 1.0) * t * hamiltonian).exp();
  return u * rho0 * u.adjoint();
}

std::vector<double> f_weights_loop(const EigenSystem& eig, const DegeneracyClasses& classes,
                                   int initial_level, int target_level) {
  const int n = eig.bath_size;
  std::vector<double> f(static_cast<size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    std::complex<double> acc(0.0, 0.0);
    for (const auto& c : classes.classes) {
      for (int l = c.begin; l < c.end; ++l) {
        for (int m = c.begin; m < c.end; ++m) {
          // conjugate goes on the l factor; with multi-member classes the
          // orientation matters (the completeness limit forces f = 1)
          std::complex<double> start =
              std::conj(eig.transform(initial_level * n + j, l)) *
              eig.transform(initial_level * n + j, m);
          std::complex<double> overlap(0.0, 0.0);
          for (int k = 0; k < n; ++k)
            overlap += eig.transform(target_level * n + k, l) *
                       std::conj(eig.transform(target_level * n + k, m));
          acc += start * overlap;
        }
      }
    }
    f[static_cast<size_t>(j)] = acc.real();
  }
  return f;
}

DensityMatrix diagonal_ensemble_masked(const EigenSystem& eig, const DensityMatrix& rho0,
                                       const DegeneracyClasses& classes) {
  const int d = eig.dimension();
  if (rho0.tag != SpaceTag::composite || rho0.rho.rows() != d)
    throw std::invalid_argument("diagonal_ensemble_masked: composite state of matching dimension required");
  MatrixXcd rho_eig = eig.transform.adjoint() * rho0.rho * eig.transform;
  MatrixXcd masked = MatrixXcd::Zero(d, d);
  for (const auto& c : classes.classes)
    masked.block(c.begin, c.begin, c.size(), c.size()) =
        rho_eig.block(c.begin, c.begin, c.size(), c.size());
  MatrixXcd rho_inf = eig.transform * masked * eig.transform.adjoint();
  MatrixXcd reduced = partial_trace_loop(rho_inf, eig.n_levels, eig.bath_size);
  return DensityMatrix{SpaceTag::system, reduced};
}

}  // namespace oracle
}  // namespace thermaleq
