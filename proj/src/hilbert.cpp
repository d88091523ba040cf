#include "thermaleq/hilbert.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

#include "thermaleq/rng.hpp"

namespace thermaleq {

namespace {

MatrixXcd random_hermitian(rng::Stream& stream, int dim) {
  MatrixXcd m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) {
      auto [x, y] = stream.next_gaussian_pair();
      m(r, c) = complexd(x, y) * M_SQRT1_2;
    }
  }
  return 0.5 * (m + m.adjoint());
}

double operator_norm(const MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

void SystemSpec::validate() const {
  if (n_levels < 2) throw std::invalid_argument("system: n_levels must be >= 2");
  if (static_cast<int>(level_energies.size()) != n_levels)
    throw std::invalid_argument("system: level_energies must have n_levels entries");
  if (!std::isfinite(level_energies[0])) throw std::invalid_argument("system: non-finite level energy");
  for (int i = 1; i < n_levels; ++i) {
    if (!(level_energies[i] >= level_energies[i - 1]))
      throw std::invalid_argument("system: level_energies must be ascending");
    if (!std::isfinite(level_energies[i])) throw std::invalid_argument("system: non-finite level energy");
  }
}

void CouplingSpec::validate() const {
  if (!(strength >= 0.0) || !std::isfinite(strength))
    throw std::invalid_argument("coupling: strength must be finite and >= 0");
}

int product_index(int i, int j, int n_levels, int bath_size) {
  if (i < 0 || i >= n_levels)
    throw std::out_of_range("product_index: system level " + std::to_string(i) + " out of range");
  if (j < 1 || j > bath_size)
    throw std::out_of_range("product_index: bath state " + std::to_string(j) + " out of range");
  return i * bath_size + (j - 1);
}

std::pair<int, int> product_index_inverse(int idx, int n_levels, int bath_size) {
  if (idx < 0 || idx >= n_levels * bath_size)
    throw std::out_of_range("product_index_inverse: composite index out of range");
  return {idx / bath_size, idx % bath_size + 1};
}

MatrixXcd build_coupling_matrix(CouplingStructure structure, std::uint64_t seed,
                                int n_levels, int bath_size) {
  const int dim = n_levels * bath_size;
  MatrixXcd v;
  switch (structure) {
    case CouplingStructure::random_hermitian: {
      rng::Stream stream(seed, "coupling/dense");
      v = random_hermitian(stream, dim);
      break;
    }
    case CouplingStructure::system_flip_random_bath: {
      rng::Stream stream(seed, "coupling/bath-factor");
      MatrixXcd bath_op = random_hermitian(stream, bath_size);
      // sign convention: first diagonal entry nonnegative, so the trivial
      // N=1 bath factor is +1 for every seed
      if (bath_op(0, 0).real() < 0.0) bath_op = -bath_op;
      // nearest-level flip (x) bath operator, system-major blocks
      v = MatrixXcd::Zero(dim, dim);
      for (int i = 0; i + 1 < n_levels; ++i) {
        v.block(i * bath_size, (i + 1) * bath_size, bath_size, bath_size) = bath_op;
        v.block((i + 1) * bath_size, i * bath_size, bath_size, bath_size) = bath_op;
      }
      break;
    }
  }
  const double norm = operator_norm(v);
  if (norm <= 0.0) throw std::runtime_error("coupling: degenerate zero coupling draw");
  return v / norm;
}

CompositeHamiltonian build_hamiltonian(const SystemSpec& sys,
                                       const VectorXd& bath_energies,
                                       const CouplingSpec& coupling,
                                       int dimension_cap) {
  sys.validate();
  coupling.validate();
  const int bath_size = static_cast<int>(bath_energies.size());
  if (bath_size < 1) throw std::invalid_argument("bath: need at least one state");
  // cap check must precede the coupling draw; normalizing the coupling
  // matrix costs a full eigendecomposition at the composite dimension
  const long dim = static_cast<long>(sys.n_levels) * bath_size;
  if (dim > dimension_cap)
    throw std::length_error("composite dimension " + std::to_string(dim) +
                            " exceeds cap " + std::to_string(dimension_cap));
  MatrixXcd unit;
  if (coupling.strength > 0.0)
    unit = build_coupling_matrix(coupling.structure, coupling.seed, sys.n_levels, bath_size);
  else
    unit = MatrixXcd::Zero(sys.n_levels * bath_size, sys.n_levels * bath_size);
  return build_hamiltonian(sys, bath_energies, unit, coupling.strength, dimension_cap);
}

CompositeHamiltonian build_hamiltonian(const SystemSpec& sys,
                                       const VectorXd& bath_energies,
                                       const MatrixXcd& coupling_unit,
                                       double lambda,
                                       int dimension_cap) {
  sys.validate();
  const int bath_size = static_cast<int>(bath_energies.size());
  if (bath_size < 1) throw std::invalid_argument("bath: need at least one state");
  for (int j = 0; j < bath_size; ++j)
    if (!std::isfinite(bath_energies[j])) throw std::invalid_argument("bath: non-finite energy");
  const long dim = static_cast<long>(sys.n_levels) * bath_size;
  if (dim > dimension_cap)
    throw std::length_error("composite dimension " + std::to_string(dim) +
                            " exceeds cap " + std::to_string(dimension_cap));
  if (coupling_unit.rows() != dim || coupling_unit.cols() != dim)
    throw std::invalid_argument("coupling matrix has wrong dimension");

  CompositeHamiltonian h;
  h.n_levels = sys.n_levels;
  h.bath_size = bath_size;
  h.lambda = lambda;
  h.bath_energies = bath_energies;
  h.system_energies = sys.level_energies;
  h.coupling_unit = coupling_unit;
  h.matrix = MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < sys.n_levels; ++i)
    for (int j = 0; j < bath_size; ++j)
      h.matrix(i * bath_size + j, i * bath_size + j) = sys.level_energies[i] + bath_energies[j];
  if (lambda != 0.0) h.matrix += lambda * coupling_unit;
  return h;
}

DensityMatrix partial_trace_bath(const DensityMatrix& rho, int n_levels, int bath_size) {
  if (rho.tag != SpaceTag::composite)
    throw std::invalid_argument("partial_trace_bath: expected a composite-space density matrix");
  const Eigen::Index dim = static_cast<Eigen::Index>(n_levels) * bath_size;
  if (rho.rho.rows() != dim || rho.rho.cols() != dim)
    throw std::invalid_argument("partial_trace_bath: dimension mismatch");

  DensityMatrix out{SpaceTag::system, MatrixXcd::Zero(n_levels, n_levels)};
  for (int a = 0; a < n_levels; ++a)
    for (int b = 0; b < n_levels; ++b) {
      complexd acc(0.0, 0.0);
      for (int k = 0; k < bath_size; ++k)
        acc += rho.rho(a * bath_size + k, b * bath_size + k);
      out.rho(a, b) = acc;
    }
  return out;
}

DensityDiagnostics validate_density_matrix(const DensityMatrix& rho) {
  DensityDiagnostics d;
  d.trace_deviation = std::abs(rho.rho.trace() - complexd(1.0, 0.0));
  d.hermiticity_deviation = (rho.rho - rho.rho.adjoint()).cwiseAbs().maxCoeff();
  MatrixXcd herm = 0.5 * (rho.rho + rho.rho.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
  d.min_eigenvalue = es.eigenvalues().minCoeff();
  d.trace_ok = d.trace_deviation <= density_trace_tol;
  d.hermitian_ok = d.hermiticity_deviation <= density_hermiticity_tol;
  d.positive_ok = d.min_eigenvalue >= density_positivity_tol;
  return d;
}

}  // namespace thermaleq
