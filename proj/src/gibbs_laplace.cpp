#include "thermaleq/gibbs_laplace.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

namespace thermaleq {

namespace {

using cd = std::complex<double>;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// cos(pi r) and sin(pi r) with the argument reduced in units of pi.
// Exact on the integer lattice: r integral gives (+-1, +-0) with no
// rounding, which is what makes matched-gap partition factors vanish
// identically at the poles.
struct CosSinPi {
  double c, s;
};

CosSinPi cos_sin_pi(double r) {
  double m = std::nearbyint(r);
  double y = r - m;  // |y| <= 0.5
  double c = std::cos(M_PI * y);
  double s = std::sin(M_PI * y);
  if (std::fmod(m, 2.0) != 0.0) {
    c = -c;
    s = -s;
  }
  return {c, s};
}

// exp(-i pi r) via lattice reduction.
cd expi_minus_pi(double r) {
  auto [c, s] = cos_sin_pi(r);
  return {c, -s};
}

// exp(+i pi r) via lattice reduction.
cd expi_plus_pi(double r) {
  auto [c, s] = cos_sin_pi(r);
  return {c, s};
}

cd ipow(cd z, int p) {
  cd acc(1.0, 0.0);
  for (int i = 0; i < p; ++i) acc *= z;
  return acc;
}

double reference_partition(const PartitionModel& model, double beta_ref) {
  require(std::isfinite(beta_ref) && beta_ref > 0.0,
          "reference inverse temperature must be positive and finite");
  cd z = partition_value(model, cd(beta_ref, 0.0));
  if (!(z.real() > 0.0))
    throw std::domain_error("partition value at the reference temperature is not positive");
  return z.real();
}

double slope_fit(const std::vector<double>& u, const std::vector<double>& v) {
  double n = static_cast<double>(u.size());
  double su = 0.0, sv = 0.0, suu = 0.0, suv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    su += u[i];
    sv += v[i];
    suu += u[i] * u[i];
    suv += u[i] * v[i];
  }
  double denom = n * suu - su * su;
  if (denom <= 0.0) return 0.0;
  return (n * suv - su * sv) / denom;
}

}  // namespace

PartitionModel PartitionModel::two_level(int n_particles, double gap) {
  PartitionModel m;
  m.kind = PartitionKind::two_level_gas;
  m.n_particles = n_particles;
  m.gap = gap;
  m.validate();
  return m;
}

PartitionModel PartitionModel::classical_gas(int n_particles, double volume_factor) {
  PartitionModel m;
  m.kind = PartitionKind::classical_ideal_gas;
  m.n_particles = n_particles;
  m.volume_factor = volume_factor;
  m.validate();
  return m;
}

PartitionModel PartitionModel::oscillators(std::vector<double> frequencies) {
  PartitionModel m;
  m.kind = PartitionKind::oscillator_bath;
  m.frequencies = std::move(frequencies);
  m.validate();
  return m;
}

PartitionModel PartitionModel::explicit_levels(std::vector<double> energies) {
  PartitionModel m;
  m.kind = PartitionKind::explicit_spectrum;
  m.energies = std::move(energies);
  m.validate();
  return m;
}

void PartitionModel::validate() const {
  switch (kind) {
    case PartitionKind::two_level_gas:
      require(n_particles >= 1, "two-level-gas particle count must be >= 1");
      require(std::isfinite(gap) && gap > 0.0, "two-level-gas gap must be positive and finite");
      break;
    case PartitionKind::classical_ideal_gas:
      require(n_particles >= 1, "classical-ideal-gas particle count must be >= 1");
      require(std::isfinite(volume_factor) && volume_factor > 0.0,
              "classical-ideal-gas prefactor must be positive and finite");
      break;
    case PartitionKind::oscillator_bath:
      require(!frequencies.empty(), "oscillator-bath needs at least one frequency");
      for (double w : frequencies)
        require(std::isfinite(w) && w > 0.0, "oscillator frequencies must be positive and finite");
      break;
    case PartitionKind::explicit_spectrum:
      require(!energies.empty(), "explicit spectrum needs at least one energy");
      for (double e : energies)
        require(std::isfinite(e), "explicit spectrum energies must be finite");
      break;
  }
}

std::string PartitionModel::name() const {
  switch (kind) {
    case PartitionKind::two_level_gas:
      return "two-level-gas";
    case PartitionKind::classical_ideal_gas:
      return "classical-ideal-gas";
    case PartitionKind::oscillator_bath:
      return "oscillator-bath";
    case PartitionKind::explicit_spectrum:
      return "explicit-spectrum";
  }
  return "unknown";
}

std::complex<double> Pole::beta() const {
  return {0.0, (2.0 * n + 1.0) * M_PI / delta};
}

double gibbs_p0(double beta, double delta) {
  require(std::isfinite(beta) && beta >= 0.0, "inverse temperature must be >= 0 and finite");
  require(std::isfinite(delta) && delta > 0.0, "level spacing must be positive and finite");
  return 1.0 / (1.0 + std::exp(-beta * delta));
}

double gibbs_p0_levels(double beta, const std::vector<double>& level_energies) {
  require(std::isfinite(beta), "inverse temperature must be finite");
  require(level_energies.size() >= 2, "need at least two levels");
  double e0 = level_energies.front();
  double denom = 0.0;
  for (double e : level_energies) {
    require(std::isfinite(e) && e >= e0, "level energies must be finite and ascending");
    denom += std::exp(-beta * (e - e0));
  }
  return 1.0 / denom;
}

DeviationReport deviation_report(double p0_sim, double beta, double delta) {
  require(std::isfinite(p0_sim) && p0_sim >= 0.0 && p0_sim <= 1.0,
          "simulated probability must lie in [0, 1]");
  DeviationReport r;
  r.p0_sim = p0_sim;
  r.p0_gibbs = gibbs_p0(beta, delta);
  r.deviation = p0_sim - r.p0_gibbs;
  if (p0_sim > 0.0 && p0_sim < 1.0) {
    r.beta_eff = std::log(p0_sim / (1.0 - p0_sim)) / delta;
    r.beta_eff_finite = true;
  } else {
    r.beta_eff = p0_sim == 1.0 ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
    r.beta_eff_finite = false;
  }
  return r;
}

DeviationReport deviation_report_levels(double p0_sim, double beta,
                                        const std::vector<double>& level_energies) {
  require(std::isfinite(p0_sim) && p0_sim >= 0.0 && p0_sim <= 1.0,
          "simulated probability must lie in [0, 1]");
  DeviationReport r;
  r.p0_sim = p0_sim;
  r.p0_gibbs = gibbs_p0_levels(beta, level_energies);
  r.deviation = p0_sim - r.p0_gibbs;

  // p0(beta) is monotone nondecreasing; its range is (0, 1/g] with g the
  // ground degeneracy. Outside that range no finite beta reproduces p0.
  double g = 0.0;
  double e0 = level_energies.front();
  for (double e : level_energies)
    if (e - e0 <= 0.0) g += 1.0;
  double upper = 1.0 / g;
  if (p0_sim <= 0.0 || p0_sim >= upper) {
    r.beta_eff = p0_sim >= upper ? std::numeric_limits<double>::infinity()
                                 : -std::numeric_limits<double>::infinity();
    r.beta_eff_finite = false;
    return r;
  }
  double lo = -1.0, hi = 1.0;
  auto p_at = [&](double b) { return gibbs_p0_levels(b, level_energies); };
  int guard = 0;
  while (p_at(lo) > p0_sim && guard++ < 64) lo *= 2.0;
  guard = 0;
  while (p_at(hi) < p0_sim && guard++ < 64) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (p_at(mid) < p0_sim)
      lo = mid;
    else
      hi = mid;
  }
  r.beta_eff = 0.5 * (lo + hi);
  r.beta_eff_finite = true;
  return r;
}

double p0_quadrature(const FBinned& bins, const ThermalWeights& weights) {
  if (bins.centers.empty()) throw std::domain_error("binned overlap profile is empty");
  require(bins.centers.size() == bins.mean_f.size() && bins.centers.size() == bins.counts.size(),
          "binned overlap profile arrays disagree in length");
  long double acc = 0.0L;
  for (size_t c = 0; c < bins.centers.size(); ++c) {
    long double a = std::exp(-(long double)weights.beta * (bins.centers[c] - weights.e_shift));
    acc += a * (long double)bins.mean_f[c] * (long double)bins.counts[c];
  }
  return static_cast<double>(acc / (long double)weights.z_shifted);
}

std::complex<double> partition_value(const PartitionModel& model, std::complex<double> beta) {
  model.validate();
  require(std::isfinite(beta.real()) && std::isfinite(beta.imag()),
          "inverse temperature must be finite");
  switch (model.kind) {
    case PartitionKind::two_level_gas:
      return ipow(1.0 + std::exp(-beta * model.gap), model.n_particles);
    case PartitionKind::classical_ideal_gas: {
      if (std::abs(beta) < 1e-12)
        throw PoleCollisionError("classical-ideal-gas partition value is singular at beta = 0");
      double p = 1.5 * model.n_particles;
      return model.volume_factor * std::pow(beta, cd(-p, 0.0));
    }
    case PartitionKind::oscillator_bath: {
      cd acc(1.0, 0.0);
      for (double w : model.frequencies) {
        cd factor = 1.0 - std::exp(-beta * w);
        if (std::abs(factor) / w < 1e-8) {
          std::ostringstream msg;
          msg << "evaluation point collides with an oscillator-bath partition pole"
                 " (frequency "
              << w << ")";
          throw PoleCollisionError(msg.str());
        }
        acc /= factor;
      }
      return acc;
    }
    case PartitionKind::explicit_spectrum: {
      cd acc(0.0, 0.0);
      for (double e : model.energies) acc += std::exp(-beta * e);
      return acc;
    }
  }
  throw std::logic_error("unreachable partition model kind");
}

std::complex<double> partition_value_at_pole(const PartitionModel& model, const Pole& pole) {
  model.validate();
  require(std::isfinite(pole.delta) && pole.delta > 0.0,
          "pole level spacing must be positive and finite");
  double odd = 2.0 * pole.n + 1.0;
  switch (model.kind) {
    case PartitionKind::two_level_gas:
      // exact zero when gap is an odd multiple of delta
      return ipow(1.0 + expi_minus_pi(odd * (model.gap / pole.delta)), model.n_particles);
    case PartitionKind::classical_ideal_gas: {
      double y = odd * M_PI / pole.delta;  // beta = i y, y != 0 on this lattice
      double p = 1.5 * model.n_particles;
      double sgn = y > 0.0 ? 1.0 : -1.0;
      // beta^{-p} = |y|^{-p} exp(-i p sgn pi/2), principal branch
      cd phase = expi_plus_pi(-p * sgn * 0.5);
      return model.volume_factor * std::pow(std::abs(y), -p) * phase;
    }
    case PartitionKind::oscillator_bath: {
      cd acc(1.0, 0.0);
      for (double w : model.frequencies) {
        cd factor = 1.0 - expi_minus_pi(odd * (w / pole.delta));
        if (std::abs(factor) / w < 1e-8) {
          std::ostringstream msg;
          msg << "pole n=" << pole.n << " collides with an oscillator-bath partition pole"
                 " (frequency "
              << w << ")";
          throw PoleCollisionError(msg.str());
        }
        acc /= factor;
      }
      return acc;
    }
    case PartitionKind::explicit_spectrum: {
      cd acc(0.0, 0.0);
      for (double e : model.energies) acc += expi_minus_pi(odd * (e / pole.delta));
      return acc;
    }
  }
  throw std::logic_error("unreachable partition model kind");
}

std::complex<double> rhs_function(std::complex<double> beta, double delta,
                                  const PartitionModel& model, double beta_ref) {
  require(std::isfinite(delta) && delta > 0.0, "level spacing must be positive and finite");
  cd denom = 1.0 + std::exp(-beta * delta);
  // distance to the nearest denominator pole, first order
  double dist = std::abs(denom) / (delta * std::abs(std::exp(-beta * delta)));
  if (dist < 1e-10) {
    std::ostringstream msg;
    msg << "evaluation point lies within " << dist << " of a denominator pole";
    throw PoleCollisionError(msg.str());
  }
  double z_ref = reference_partition(model, beta_ref);
  return partition_value(model, beta) / z_ref / denom;
}

std::vector<Pole> poles(double delta, int n_lo, int n_hi) {
  require(std::isfinite(delta) && delta > 0.0, "level spacing must be positive and finite");
  require(n_lo <= n_hi, "empty pole index range");
  std::vector<Pole> out;
  out.reserve(static_cast<size_t>(n_hi - n_lo + 1));
  for (int n = n_lo; n <= n_hi; ++n) out.push_back(Pole{n, delta});
  return out;
}

ResiduePair residue(int n, double x, double delta, const PartitionModel& model, double beta_ref) {
  require(std::isfinite(delta) && delta > 0.0, "level spacing must be positive and finite");
  require(std::isfinite(x) && x >= 0.0, "transform variable must be >= 0 and finite");
  model.validate();
  double z_ref = reference_partition(model, beta_ref);

  Pole pole{n, delta};
  cd zbar = partition_value_at_pole(model, pole) / z_ref;
  double odd = 2.0 * n + 1.0;
  cd formula = expi_plus_pi(odd * (x / delta)) * zbar / delta;

  // Shrinking-circle limit of the circle mean of (beta - beta_n) e^{beta x}
  // rhs(beta). With equally spaced samples the analytic part cancels to
  // O(eps^M), so a couple of halvings settle the limit.
  cd beta_n = pole.beta();
  constexpr int m_samples = 16;
  constexpr int max_halvings = 48;
  double eps = M_PI / (2.0 * delta);
  cd prev(0.0, 0.0);
  bool have_prev = false;
  double zero_floor = 0.0;
  std::string last_issue;
  for (int k = 0; k < max_halvings; ++k, eps *= 0.5) {
    cd sum(0.0, 0.0);
    double mag_sum = 0.0;
    bool collided = false;
    for (int s = 0; s < m_samples; ++s) {
      double theta = 2.0 * M_PI * (s + 0.5) / m_samples;
      cd z = beta_n + eps * cd(std::cos(theta), std::sin(theta));
      try {
        cd f = std::exp(z * x) * rhs_function(z, delta, model, beta_ref);
        sum += (z - beta_n) * f;
        mag_sum += std::abs(f);
      } catch (const PoleCollisionError& e) {
        collided = true;
        last_issue = e.what();
        break;
      }
    }
    if (collided) {
      have_prev = false;
      continue;  // shrink past the interfering model pole
    }
    cd est = sum / static_cast<double>(m_samples);
    if (zero_floor == 0.0) zero_floor = 1e-12 * eps * (mag_sum / m_samples) + 1e-300;
    if (have_prev) {
      double diff = std::abs(est - prev);
      double scale = std::max(std::abs(est), std::abs(prev));
      if (scale <= zero_floor)
        return ResiduePair{formula, est, 0.0, k};
      if (diff <= 1e-8 * scale)
        return ResiduePair{formula, est, diff / scale, k};
    }
    prev = est;
    have_prev = true;
  }
  std::ostringstream msg;
  msg << "numeric residue did not settle at pole n=" << n << ", x=" << x << ", delta=" << delta
      << " after " << max_halvings << " radius halvings";
  if (!last_issue.empty()) msg << " (last obstruction: " << last_issue << ")";
  throw ResidueConvergenceError(msg.str());
}

LaplaceReport residue_partial_sums(const std::vector<double>& x_grid, double delta,
                                   const PartitionModel& model, int k_max, double beta_ref) {
  require(std::isfinite(delta) && delta > 0.0, "level spacing must be positive and finite");
  require(k_max >= 2, "need at least two pole pairs");
  require(!x_grid.empty(), "empty x grid");
  for (double x : x_grid)
    require(std::isfinite(x) && x >= 0.0, "x grid values must be >= 0 and finite");
  model.validate();

  LaplaceReport rep;
  rep.delta = delta;
  rep.model_name = model.name();
  rep.beta_ref = beta_ref;
  rep.z_ref = reference_partition(model, beta_ref);
  rep.k_max = k_max;
  rep.x_grid = x_grid;

  rep.poles.reserve(static_cast<size_t>(2 * k_max));
  for (int n = -k_max; n < k_max; ++n) {
    LaplacePoleInfo info;
    info.n = n;
    Pole pole{n, delta};
    info.beta = pole.beta();
    info.denominator_abs = std::abs(1.0 + std::exp(-info.beta * delta));
    try {
      info.zbar = partition_value_at_pole(model, pole) / rep.z_ref;
      info.residue_factor = info.zbar / delta;
    } catch (const PoleCollisionError& e) {
      info.excluded = true;
      info.exclusion_reason = e.what();
      info.zbar = 0.0;
      info.residue_factor = 0.0;
    }
    rep.poles.push_back(std::move(info));
  }
  auto pole_at = [&](int n) -> const LaplacePoleInfo& {
    return rep.poles[static_cast<size_t>(n + k_max)];
  };

  rep.pair_term_abs.resize(static_cast<size_t>(k_max));
  for (int k = 0; k < k_max; ++k) {
    rep.pair_term_abs[static_cast<size_t>(k)] =
        std::max(std::abs(pole_at(k).residue_factor), std::abs(pole_at(-k - 1).residue_factor));
  }

  rep.partial_sums.assign(x_grid.size(), std::vector<cd>(static_cast<size_t>(k_max)));
  rep.tail_last_abs.assign(x_grid.size(), 0.0);
  rep.tail_sum_spread.assign(x_grid.size(), 0.0);
  rep.verdicts.assign(x_grid.size(), "");

  double term_scale = 0.0;
  for (double a : rep.pair_term_abs) term_scale = std::max(term_scale, a);

  std::vector<double> fit_u, fit_v;
  for (int k = 0; k < k_max; ++k) {
    double a = rep.pair_term_abs[static_cast<size_t>(k)];
    if (a > 0.0 && !(pole_at(k).excluded && pole_at(-k - 1).excluded)) {
      fit_u.push_back(std::log((2.0 * k + 1.0) * M_PI / delta));
      fit_v.push_back(std::log(a));
    }
  }
  rep.fit_valid = fit_u.size() >= 3;
  rep.fitted_decay_exponent = rep.fit_valid ? slope_fit(fit_u, fit_v) : 0.0;

  int window_start = (3 * k_max) / 4;
  if (window_start >= k_max - 1) window_start = std::max(0, k_max - 2);

  for (size_t xi = 0; xi < x_grid.size(); ++xi) {
    double x = x_grid[xi];
    cd running(0.0, 0.0);
    double last_term_abs = 0.0;
    for (int k = 0; k < k_max; ++k) {
      double r = (2.0 * k + 1.0) * (x / delta);
      cd term = pole_at(k).residue_factor * expi_plus_pi(r) +
                pole_at(-k - 1).residue_factor * expi_plus_pi(-r);
      running += term;
      rep.partial_sums[xi][static_cast<size_t>(k)] = running;
      last_term_abs = std::abs(term);
    }
    rep.tail_last_abs[xi] = last_term_abs;

    const auto& sums = rep.partial_sums[xi];
    double spread = 0.0;
    for (int a = window_start; a < k_max; ++a)
      for (int b = a + 1; b < k_max; ++b)
        spread = std::max(spread,
                          std::abs(sums[static_cast<size_t>(a)] - sums[static_cast<size_t>(b)]));
    rep.tail_sum_spread[xi] = spread;

    double s_final = std::abs(sums.back());
    std::string verdict;
    if (term_scale == 0.0) {
      verdict = "converged";
    } else if (spread <= 1e-10 * std::max(1.0, s_final)) {
      verdict = "converged";
    } else if (rep.fit_valid && rep.fitted_decay_exponent <= -1.05) {
      verdict = "converged";
    } else {
      // mean |S_K| over the two halves: linear growth triples the ratio,
      // bounded oscillation keeps it near one
      int split = std::max(1, k_max / 2);
      double early = 0.0, late = 0.0;
      for (int k = 0; k < split; ++k) early += std::abs(sums[static_cast<size_t>(k)]);
      for (int k = split; k < k_max; ++k) late += std::abs(sums[static_cast<size_t>(k)]);
      early /= split;
      late /= std::max(1, k_max - split);
      verdict = late > 2.0 * std::max(early, 1e-300) ? "diverging" : "oscillatory";
    }
    rep.verdicts[xi] = verdict;
  }
  return rep;
}

}  // namespace thermaleq
