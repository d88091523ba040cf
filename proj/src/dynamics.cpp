#include "thermaleq/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace thermaleq {

namespace {

constexpr double hermiticity_input_tol = 1e-12;

// rho0 in the interacting eigenbasis
MatrixXcd to_eigenbasis(const DensityMatrix& rho0, const EigenSystem& eig) {
  return eig.transform.adjoint() * rho0.rho * eig.transform;
}

bool is_diagonal(const MatrixXcd& m, double tol) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (r != c && std::abs(m(r, c)) > tol) return false;
  return true;
}

}  // namespace

int DegeneracyClasses::max_size() const {
  int m = 0;
  for (const auto& c : classes) m = std::max(m, c.size());
  return m;
}

EigenSystem eigendecompose(const CompositeHamiltonian& h) {
  const double herm_dev = (h.matrix - h.matrix.adjoint()).cwiseAbs().maxCoeff();
  if (herm_dev > hermiticity_input_tol)
    throw std::domain_error("eigendecompose: input is not Hermitian (max deviation " +
                            std::to_string(herm_dev) + ")");

  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h.matrix);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigendecompose: solver did not converge");

  EigenSystem eig;
  eig.n_levels = h.n_levels;
  eig.bath_size = h.bath_size;
  eig.omega = es.eigenvalues();
  eig.transform = es.eigenvectors();

  // phase fix: largest-magnitude component of each column real positive
  for (Eigen::Index l = 0; l < eig.transform.cols(); ++l) {
    Eigen::Index imax = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < eig.transform.rows(); ++r) {
      const double a = std::abs(eig.transform(r, l));
      if (a > best) {
        best = a;
        imax = r;
      }
    }
    const complexd z = eig.transform(imax, l);
    if (std::abs(z) > 0.0) eig.transform.col(l) *= std::conj(z) / std::abs(z);
  }
  return eig;
}

DensityMatrix initial_composite_state(int initial_level, const ThermalWeights& weights,
                                      int n_levels) {
  const int bath_size = static_cast<int>(weights.weights.size());
  if (initial_level < 0 || initial_level >= n_levels)
    throw std::out_of_range("initial_composite_state: level out of range");
  const int dim = n_levels * bath_size;
  DensityMatrix rho{SpaceTag::composite, MatrixXcd::Zero(dim, dim)};
  for (int j = 0; j < bath_size; ++j)
    rho.rho(initial_level * bath_size + j, initial_level * bath_size + j) = weights.weights[j];
  return rho;
}

DensityMatrix evolve(const DensityMatrix& rho0, const EigenSystem& eig, double t) {
  if (rho0.tag != SpaceTag::composite || rho0.rho.rows() != eig.dimension())
    throw std::invalid_argument("evolve: composite density matrix of matching dimension required");
  if (!std::isfinite(t)) throw std::invalid_argument("evolve: time must be finite");

  const Eigen::Index dim = eig.dimension();
  Eigen::VectorXcd phases(dim);
  for (Eigen::Index l = 0; l < dim; ++l)
    phases[l] = std::polar(1.0, eig.omega[l] * t);  // exp(+i omega_l t)

  MatrixXcd in_eig = to_eigenbasis(rho0, eig);
  // entry (l, m) picks up exp(+i (omega_l - omega_m) t)
  in_eig = phases.asDiagonal() * in_eig * phases.conjugate().asDiagonal();
  return DensityMatrix{SpaceTag::composite,
                       eig.transform * in_eig * eig.transform.adjoint()};
}

DegeneracyClasses degeneracy_classes(const VectorXd& omega, double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("degeneracy_classes: epsilon must be >= 0");
  DegeneracyClasses out;
  out.epsilon = epsilon;
  const int n = static_cast<int>(omega.size());
  int begin = 0;
  for (int l = 1; l < n; ++l) {
    if (omega[l] - omega[l - 1] > epsilon) {
      out.classes.push_back({begin, l});
      begin = l;
    }
  }
  if (n > 0) out.classes.push_back({begin, n});
  return out;
}

double default_degeneracy_epsilon(const VectorXd& omega) {
  if (omega.size() == 0) return 0.0;
  return 1e-9 * (omega.maxCoeff() - omega.minCoeff());
}

DiagonalEnsembleResult diagonal_ensemble(const EigenSystem& eig, const DensityMatrix& rho0,
                                         const DegeneracyClasses& classes,
                                         int initial_level) {
  const int dim = eig.dimension();
  const int n = eig.n_levels;
  const int bath = eig.bath_size;
  if (rho0.tag != SpaceTag::composite || rho0.rho.rows() != dim)
    throw std::invalid_argument("diagonal_ensemble: composite density matrix of matching dimension required");
  int covered = 0;
  for (const auto& c : classes.classes) {
    if (c.begin != covered || c.end <= c.begin || c.end > dim)
      throw std::invalid_argument("diagonal_ensemble: class partition inconsistent with spectrum");
    for (int l = c.begin + 1; l < c.end; ++l)
      if (eig.omega[l] - eig.omega[l - 1] > classes.epsilon)
        throw std::invalid_argument("diagonal_ensemble: class spans a gap wider than epsilon");
    if (c.begin > 0 && eig.omega[c.begin] - eig.omega[c.begin - 1] <= classes.epsilon)
      throw std::invalid_argument("diagonal_ensemble: class boundary inside a degenerate cluster");
    covered = c.end;
  }
  if (covered != dim)
    throw std::invalid_argument("diagonal_ensemble: class partition does not cover the spectrum");

  // Product-form initial states are diagonal; then eigenbasis entries
  // are needed on intra-class pairs only, O(D) of them in the generic
  // non-degenerate case. General states fall back to the full rotation.
  const bool diagonal_input = is_diagonal(rho0.rho, 0.0);
  MatrixXcd rho_eig;
  if (!diagonal_input) rho_eig = to_eigenbasis(rho0, eig);
  const VectorXd rho_diag = rho0.rho.diagonal().real();

  auto rho_eig_entry = [&](int l, int m) -> complexd {
    if (!diagonal_input) return rho_eig(l, m);
    complexd acc(0.0, 0.0);
    for (int a = 0; a < dim; ++a) {
      if (rho_diag[a] == 0.0) continue;
      acc += rho_diag[a] * std::conj(eig.transform(a, l)) * eig.transform(a, m);
    }
    return acc;
  };

  DiagonalEnsembleResult res;
  res.class_p0_contrib.assign(classes.classes.size(), 0.0);

  // rho_S entries and the p0 split, accumulated in extended precision
  std::vector<long double> acc_re(static_cast<size_t>(n) * n, 0.0L);
  std::vector<long double> acc_im(static_cast<size_t>(n) * n, 0.0L);
  long double p0_diag_part = 0.0L, p0_off_part = 0.0L;

  for (size_t ci = 0; ci < classes.classes.size(); ++ci) {
    const auto& c = classes.classes[ci];
    long double class_p0 = 0.0L;
    for (int l = c.begin; l < c.end; ++l)
      for (int m = c.begin; m < c.end; ++m) {
        const complexd w = rho_eig_entry(l, m);
        if (w == complexd(0.0, 0.0)) continue;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            // sum_k T_{l(a k)} conj(T_{m(b k)})
            complexd overlap(0.0, 0.0);
            for (int k = 0; k < bath; ++k)
              overlap += eig.transform(a * bath + k, l) * std::conj(eig.transform(b * bath + k, m));
            const complexd term = w * overlap;
            acc_re[a * n + b] += term.real();
            acc_im[a * n + b] += term.imag();
            if (a == 0 && b == 0) {
              class_p0 += term.real();
              if (l == m)
                p0_diag_part += term.real();
              else
                p0_off_part += term.real();
            }
          }
      }
    res.class_p0_contrib[ci] = static_cast<double>(class_p0);
  }

  res.rho_s_inf.tag = SpaceTag::system;
  res.rho_s_inf.rho.resize(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      res.rho_s_inf.rho(a, b) = complexd(static_cast<double>(acc_re[a * n + b]),
                                         static_cast<double>(acc_im[a * n + b]));
  res.p0 = res.rho_s_inf.rho(0, 0).real();
  res.p0_diagonal_part = static_cast<double>(p0_diag_part);
  res.p0_offdiagonal_part = static_cast<double>(p0_off_part);
  res.f = f_weights(eig, classes, initial_level, 0);
  return res;
}

VectorXd f_weights(const EigenSystem& eig, const DegeneracyClasses& classes,
                   int initial_level, int target_level) {
  const int n = eig.n_levels;
  const int bath = eig.bath_size;
  if (initial_level < 0 || initial_level >= n || target_level < 0 || target_level >= n)
    throw std::out_of_range("f_weights: level out of range");

  std::vector<long double> acc(bath, 0.0L);
  for (const auto& c : classes.classes) {
    for (int l = c.begin; l < c.end; ++l)
      for (int m = c.begin; m < c.end; ++m) {
        // sum_k T_{l(t k)} conj(T_{m(t k)}) at the target level t
        complexd overlap(0.0, 0.0);
        for (int k = 0; k < bath; ++k)
          overlap += eig.transform(target_level * bath + k, l) *
                     std::conj(eig.transform(target_level * bath + k, m));
        if (overlap == complexd(0.0, 0.0)) continue;
        for (int j = 0; j < bath; ++j) {
          const complexd term = std::conj(eig.transform(initial_level * bath + j, l)) *
                                eig.transform(initial_level * bath + j, m) * overlap;
          acc[j] += term.real();  // conjugate (l,m)/(m,l) pairs cancel the imag part
        }
      }
  }
  VectorXd f(bath);
  for (int j = 0; j < bath; ++j) f[j] = static_cast<double>(acc[j]);
  return f;
}

FBinned f_binned(const VectorXd& f, const VectorXd& bath_energies,
                 const DensityOfStates& dos) {
  if (f.size() != bath_energies.size())
    throw std::invalid_argument("f_binned: f and bath energies must have equal length");
  if (f.size() == 0) throw std::domain_error("f_binned: empty f");

  const int n_bins = static_cast<int>(dos.omega.size());
  const double lo = dos.edges[0];
  std::vector<double> sum(n_bins, 0.0);
  std::vector<int> cnt(n_bins, 0);
  for (Eigen::Index j = 0; j < f.size(); ++j) {
    int b = static_cast<int>((bath_energies[j] - lo) / dos.bin_width);
    b = std::clamp(b, 0, n_bins - 1);
    sum[b] += f[j];
    ++cnt[b];
  }
  FBinned out;
  out.bin_width = dos.bin_width;
  out.e_min = bath_energies.minCoeff();
  for (int b = 0; b < n_bins; ++b) {
    if (cnt[b] == 0) continue;  // absent, not zero
    out.centers.push_back(0.5 * (dos.edges[b] + dos.edges[b + 1]));
    out.mean_f.push_back(sum[b] / cnt[b]);
    out.counts.push_back(cnt[b]);
    out.omega.push_back(cnt[b] / dos.bin_width);
  }
  return out;
}

DensityMatrix time_average(const DensityMatrix& rho0, const EigenSystem& eig,
                           double t_avg, int n_samples) {
  if (!(t_avg > 0.0) || !std::isfinite(t_avg))
    throw std::invalid_argument("time_average: t_avg must be finite and > 0");
  if (n_samples < 2) throw std::invalid_argument("time_average: n_samples must be >= 2");
  if (rho0.tag != SpaceTag::composite || rho0.rho.rows() != eig.dimension())
    throw std::invalid_argument("time_average: composite density matrix of matching dimension required");

  const Eigen::Index dim = eig.dimension();
  const MatrixXcd rho_eig = to_eigenbasis(rho0, eig);
  MatrixXcd mean = MatrixXcd::Zero(dim, dim);
  Eigen::VectorXcd phases(dim);
  for (int s = 0; s < n_samples; ++s) {
    const double t = (s + 0.5) * t_avg / n_samples;
    for (Eigen::Index l = 0; l < dim; ++l) phases[l] = std::polar(1.0, eig.omega[l] * t);
    mean.noalias() += phases.asDiagonal() * rho_eig * phases.conjugate().asDiagonal();
  }
  mean /= static_cast<double>(n_samples);
  DensityMatrix avg{SpaceTag::composite, eig.transform * mean * eig.transform.adjoint()};
  return partial_trace_bath(avg, eig.n_levels, eig.bath_size);
}

double min_nonzero_gap(const EigenSystem& eig, const DensityMatrix& rho0, double epsilon) {
  const MatrixXcd rho_eig = to_eigenbasis(rho0, eig);
  const double weight_floor = 1e-12 * rho_eig.cwiseAbs().maxCoeff();
  double gap = std::numeric_limits<double>::infinity();
  const Eigen::Index dim = eig.dimension();
  for (Eigen::Index l = 0; l < dim; ++l)
    for (Eigen::Index m = l + 1; m < dim; ++m) {
      const double d = eig.omega[m] - eig.omega[l];
      if (d <= epsilon || d >= gap) continue;
      if (std::abs(rho_eig(l, m)) > weight_floor) gap = d;
    }
  // a stationary state populates no gap at all; report 0 rather than inf
  // so callers sizing an averaging window fall back to their default
  return std::isfinite(gap) ? gap : 0.0;
}

}  // namespace thermaleq
