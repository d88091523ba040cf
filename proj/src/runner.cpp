#include "thermaleq/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "thermaleq/dynamics.hpp"
#include "thermaleq/oracles.hpp"
#include "thermaleq/rng.hpp"

namespace thermaleq {

namespace {

using nlohmann::json;

constexpr double quiet_nan = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void config_error(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

void expect_keys(const json& j, const std::string& context,
                 std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) config_error("unknown key \"" + it.key() + "\" in " + context);
  }
}

std::vector<double> as_double_list(const json& j, const std::string& context) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number()) config_error(context + " must contain numbers");
      out.push_back(v.get<double>());
    }
  } else {
    config_error(context + " must be a number or an array of numbers");
  }
  return out;
}

std::vector<int> as_int_list(const json& j, const std::string& context) {
  std::vector<int> out;
  if (j.is_number_integer()) {
    out.push_back(j.get<int>());
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number_integer()) config_error(context + " must contain integers");
      out.push_back(v.get<int>());
    }
  } else {
    config_error(context + " must be an integer or an array of integers");
  }
  return out;
}

std::vector<std::uint64_t> as_seed_list(const json& j, const std::string& context) {
  std::vector<std::uint64_t> out;
  auto one = [&](const json& v) {
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0 &&
                                   !v.is_number_unsigned()))
      config_error(context + " must contain nonnegative integers");
    out.push_back(v.get<std::uint64_t>());
  };
  if (j.is_number_integer())
    one(j);
  else if (j.is_array())
    for (const auto& v : j) one(v);
  else
    config_error(context + " must be an integer or an array of integers");
  return out;
}

const char* bath_model_name(BathModel m) {
  switch (m) {
    case BathModel::ladder:
      return "ladder";
    case BathModel::random_matrix:
      return "random-matrix";
    case BathModel::spin_gas:
      return "spin-gas";
  }
  return "unknown";
}

BathModel bath_model_from(const std::string& s) {
  if (s == "ladder") return BathModel::ladder;
  if (s == "random-matrix") return BathModel::random_matrix;
  if (s == "spin-gas") return BathModel::spin_gas;
  config_error("unknown bath model \"" + s + "\" (expected ladder, random-matrix or spin-gas)");
}

const char* ensemble_name(RandomMatrixEnsemble e) {
  return e == RandomMatrixEnsemble::gue ? "gue" : "goe";
}

RandomMatrixEnsemble ensemble_from(const std::string& s) {
  if (s == "gue") return RandomMatrixEnsemble::gue;
  if (s == "goe") return RandomMatrixEnsemble::goe;
  config_error("unknown random-matrix ensemble \"" + s + "\" (expected gue or goe)");
}

const char* coupling_name(CouplingStructure c) {
  return c == CouplingStructure::random_hermitian ? "random-hermitian"
                                                  : "system-flip-random-bath";
}

CouplingStructure coupling_from(const std::string& s) {
  if (s == "random-hermitian") return CouplingStructure::random_hermitian;
  if (s == "system-flip-random-bath") return CouplingStructure::system_flip_random_bath;
  config_error("unknown coupling structure \"" + s +
               "\" (expected random-hermitian or system-flip-random-bath)");
}

json json_num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json json_vector(const VectorXd& v) {
  json a = json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(json_num(v(i)));
  return a;
}

json json_matrix_pairs(const MatrixXcd& m) {
  // row-major [re, im] pairs
  json a = json::array();
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c)
      a.push_back(json::array({json_num(m(r, c).real()), json_num(m(r, c).imag())}));
  return a;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Immutable per-(N, lambda, seed) state shared by every beta of a triple.
struct TripleContext {
  BathSpectrum spectrum;
  CompositeHamiltonian hamiltonian;
  EigenSystem eig;
  double epsilon = 0.0;
  DegeneracyClasses classes;
  std::vector<VectorXd> f_by_level;  // indexed by target level
};

TripleContext build_triple_context(const ExperimentConfig& config, int n_states, double lambda,
                                   std::uint64_t master_seed) {
  TripleContext ctx;
  BathSpec bs = config.bath;
  bs.n_states = n_states;
  bs.seed = rng::derive_key(master_seed, "bath");
  bs.validate();
  ctx.spectrum = bath_spectrum(bs);

  CouplingSpec cs;
  cs.strength = lambda;
  cs.structure = config.coupling_structure;
  cs.seed = rng::derive_key(master_seed, "coupling");
  ctx.hamiltonian =
      build_hamiltonian(config.system, ctx.spectrum.energies, cs, config.max_dimension);
  ctx.eig = eigendecompose(ctx.hamiltonian);
  ctx.epsilon = config.epsilon_degeneracy < 0.0 ? default_degeneracy_epsilon(ctx.eig.omega)
                                                : config.epsilon_degeneracy;
  ctx.classes = degeneracy_classes(ctx.eig.omega, ctx.epsilon);
  ctx.f_by_level.reserve(static_cast<size_t>(config.system.n_levels));
  for (int n = 0; n < config.system.n_levels; ++n)
    ctx.f_by_level.push_back(f_weights(ctx.eig, ctx.classes, config.initial_level, n));
  return ctx;
}

struct PointDetail {
  DiagonalEnsembleResult ensemble;
  ThermalWeights weights;
  std::optional<DensityMatrix> rho_timeavg;
};

PointRecord record_for_beta(const ExperimentConfig& config, const TripleContext& ctx,
                            int n_states, double beta, double lambda, std::uint64_t seed,
                            PointDetail* detail) {
  PointRecord rec;
  rec.n_states = n_states;
  rec.beta = beta;
  rec.lambda = lambda;
  rec.seed = seed;
  auto t0 = std::chrono::steady_clock::now();
  try {
    ThermalWeights w = gibbs_weights(ctx.spectrum, beta);
    DensityMatrix rho0 =
        initial_composite_state(config.initial_level, w, config.system.n_levels);
    DiagonalEnsembleResult de =
        diagonal_ensemble(ctx.eig, rho0, ctx.classes, config.initial_level);

    rec.p0_diag = de.p0;
    long double af = 0.0L;
    for (long j = 0; j < w.weights.size(); ++j)
      af += static_cast<long double>(w.weights(j)) * static_cast<long double>(de.f(j));
    rec.consistency_err = std::fabs(de.p0 - static_cast<double>(af));

    double worst = 0.0;
    for (long j = 0; j < ctx.spectrum.energies.size(); ++j) {
      long double s = 0.0L;
      for (const auto& f : ctx.f_by_level) s += static_cast<long double>(f(j));
      worst = std::max(worst, std::fabs(static_cast<double>(s - 1.0L)));
    }
    rec.sum_rule_err = worst;

    // de.p0 can land an ulp outside [0,1] when the ensemble is a pure level
    // (lambda = 0); nudge it back so the comparison does not reject its own
    // rounding noise. Anything further out is a real defect and still throws.
    double p0_cmp = de.p0;
    if (p0_cmp > 1.0 && p0_cmp < 1.0 + 1e-12) p0_cmp = 1.0;
    if (p0_cmp < 0.0 && p0_cmp > -1e-12) p0_cmp = 0.0;

    DeviationReport dr;
    double gap = config.system.gap();
    if (config.system.n_levels == 2 && gap > 0.0)
      dr = deviation_report(p0_cmp, beta, gap);
    else
      dr = deviation_report_levels(p0_cmp, beta, config.system.level_energies);
    rec.p0_gibbs = dr.p0_gibbs;
    rec.deviation = dr.deviation;
    rec.beta_eff = dr.beta_eff;
    rec.beta_eff_finite = dr.beta_eff_finite;

    rec.n_classes = static_cast<int>(ctx.classes.classes.size());
    rec.max_class_size = ctx.classes.max_size();
    rec.p0_offdiag_part = de.p0_offdiagonal_part;

    DensityDiagnostics diag = validate_density_matrix(de.rho_s_inf);
    rec.trace_dev = diag.trace_deviation;
    rec.herm_dev = diag.hermiticity_deviation;
    rec.min_eig = diag.min_eigenvalue;

    if (config.time_average.enabled) {
      double t_avg = config.time_average.t_avg;
      if (!(t_avg > 0.0)) {
        double gap_min = min_nonzero_gap(ctx.eig, rho0, 0.0);
        t_avg = gap_min > 0.0 ? 1e4 / gap_min : 1.0;
      }
      DensityMatrix averaged = time_average(rho0, ctx.eig, t_avg, config.time_average.n_samples);
      rec.has_time_average = true;
      rec.p0_timeavg = averaged.rho(0, 0).real();
      rec.timeavg_dev = std::fabs(rec.p0_timeavg - rec.p0_diag);
      rec.t_avg_used = t_avg;
      if (detail) detail->rho_timeavg = averaged;
    }
    if (detail) {
      detail->ensemble = de;
      detail->weights = w;
    }
  } catch (const std::exception& e) {
    rec.status = e.what();
    rec.p0_diag = rec.p0_gibbs = rec.deviation = rec.beta_eff = quiet_nan;
    rec.consistency_err = rec.sum_rule_err = quiet_nan;
    rec.p0_offdiag_part = rec.trace_dev = rec.herm_dev = rec.min_eig = quiet_nan;
    rec.beta_eff_finite = false;
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

PointRecord failed_record(int n_states, double beta, double lambda, std::uint64_t seed,
                          const std::string& message) {
  PointRecord rec;
  rec.n_states = n_states;
  rec.beta = beta;
  rec.lambda = lambda;
  rec.seed = seed;
  rec.status = message;
  rec.p0_diag = rec.p0_gibbs = rec.deviation = rec.beta_eff = quiet_nan;
  rec.consistency_err = rec.sum_rule_err = quiet_nan;
  rec.p0_offdiag_part = rec.trace_dev = rec.herm_dev = rec.min_eig = quiet_nan;
  rec.beta_eff_finite = false;
  return rec;
}

std::string point_record_csv_header() {
  return "n_states,beta,lambda,seed,status,p0_diag,p0_gibbs,deviation,beta_eff,"
         "consistency_err,sum_rule_err,n_classes,max_class_size,p0_offdiag_part,"
         "trace_dev,herm_dev,min_eig,p0_timeavg,timeavg_dev";
}

std::string point_record_csv_row(const PointRecord& r) {
  std::ostringstream os;
  os << r.n_states << ',' << format_double(r.beta) << ',' << format_double(r.lambda) << ','
     << r.seed << ',' << csv_field(r.status) << ',';
  if (r.status == "ok") {
    os << format_double(r.p0_diag) << ',' << format_double(r.p0_gibbs) << ','
       << format_double(r.deviation) << ',' << format_double(r.beta_eff) << ','
       << format_double(r.consistency_err) << ',' << format_double(r.sum_rule_err) << ','
       << r.n_classes << ',' << r.max_class_size << ',' << format_double(r.p0_offdiag_part)
       << ',' << format_double(r.trace_dev) << ',' << format_double(r.herm_dev) << ','
       << format_double(r.min_eig) << ',';
    if (r.has_time_average)
      os << format_double(r.p0_timeavg) << ',' << format_double(r.timeavg_dev);
    else
      os << ',';
  } else {
    os << ",,,,,,,,,,,,,";
  }
  return os.str();
}

json point_record_json(const PointRecord& r) {
  json j;
  j["n_states"] = r.n_states;
  j["beta"] = json_num(r.beta);
  j["lambda"] = json_num(r.lambda);
  j["seed"] = r.seed;
  j["status"] = r.status;
  j["p0_diag"] = json_num(r.p0_diag);
  j["p0_gibbs"] = json_num(r.p0_gibbs);
  j["deviation"] = json_num(r.deviation);
  j["beta_eff"] = json_num(r.beta_eff);
  j["beta_eff_finite"] = r.beta_eff_finite;
  j["consistency_err"] = json_num(r.consistency_err);
  j["sum_rule_err"] = json_num(r.sum_rule_err);
  j["n_classes"] = r.n_classes;
  j["max_class_size"] = r.max_class_size;
  j["p0_offdiag_part"] = json_num(r.p0_offdiag_part);
  j["trace_dev"] = json_num(r.trace_dev);
  j["herm_dev"] = json_num(r.herm_dev);
  j["min_eig"] = json_num(r.min_eig);
  if (r.has_time_average) {
    j["p0_timeavg"] = json_num(r.p0_timeavg);
    j["timeavg_dev"] = json_num(r.timeavg_dev);
    j["t_avg_used"] = json_num(r.t_avg_used);
  }
  return j;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& raw) {
  bool needs_quote = raw.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quote) return raw;
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (!j.is_object()) config_error("top level must be a JSON object");
  expect_keys(j, "top level",
              {"system", "bath", "coupling", "beta", "lambda", "seeds", "epsilon_degeneracy",
               "time_average", "initial_level", "dos_bins", "output", "threads",
               "max_dimension", "max_memory_mb"});

  if (j.contains("system")) {
    const json& s = j.at("system");
    expect_keys(s, "system", {"n_levels", "level_energies"});
    if (s.contains("n_levels")) c.system.n_levels = s.at("n_levels").get<int>();
    if (s.contains("level_energies"))
      c.system.level_energies = as_double_list(s.at("level_energies"), "system.level_energies");
  }

  if (j.contains("bath")) {
    const json& b = j.at("bath");
    expect_keys(b, "bath", {"model", "n_states", "spectral_width", "ensemble", "splittings"});
    if (b.contains("model")) c.bath.model = bath_model_from(b.at("model").get<std::string>());
    if (b.contains("n_states")) c.n_states_list = as_int_list(b.at("n_states"), "bath.n_states");
    if (b.contains("spectral_width"))
      c.bath.spectral_width = b.at("spectral_width").get<double>();
    if (b.contains("ensemble"))
      c.bath.ensemble = ensemble_from(b.at("ensemble").get<std::string>());
    if (b.contains("splittings"))
      c.bath.splittings = as_double_list(b.at("splittings"), "bath.splittings");
  }
  if (c.n_states_list.empty()) c.n_states_list.push_back(c.bath.n_states);

  if (j.contains("coupling")) {
    const json& cc = j.at("coupling");
    expect_keys(cc, "coupling", {"structure"});
    if (cc.contains("structure"))
      c.coupling_structure = coupling_from(cc.at("structure").get<std::string>());
  }

  c.beta_list = j.contains("beta") ? as_double_list(j.at("beta"), "beta")
                                   : std::vector<double>{1.0};
  c.lambda_list = j.contains("lambda") ? as_double_list(j.at("lambda"), "lambda")
                                       : std::vector<double>{0.1};
  c.seed_list = j.contains("seeds") ? as_seed_list(j.at("seeds"), "seeds")
                                    : std::vector<std::uint64_t>{1};

  if (j.contains("epsilon_degeneracy") && !j.at("epsilon_degeneracy").is_null())
    c.epsilon_degeneracy = j.at("epsilon_degeneracy").get<double>();

  if (j.contains("time_average")) {
    const json& t = j.at("time_average");
    expect_keys(t, "time_average", {"enabled", "t_avg", "n_samples"});
    if (t.contains("enabled")) c.time_average.enabled = t.at("enabled").get<bool>();
    if (t.contains("t_avg") && !t.at("t_avg").is_null())
      c.time_average.t_avg = t.at("t_avg").get<double>();
    if (t.contains("n_samples")) c.time_average.n_samples = t.at("n_samples").get<int>();
  }

  if (j.contains("initial_level")) c.initial_level = j.at("initial_level").get<int>();
  if (j.contains("dos_bins")) c.dos_bins = j.at("dos_bins").get<int>();

  if (j.contains("output")) {
    const json& o = j.at("output");
    expect_keys(o, "output", {"directory", "dump_density_matrices"});
    if (o.contains("directory")) c.output.directory = o.at("directory").get<std::string>();
    if (o.contains("dump_density_matrices"))
      c.output.dump_density_matrices = o.at("dump_density_matrices").get<bool>();
  }

  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("max_dimension")) c.max_dimension = j.at("max_dimension").get<int>();
  if (j.contains("max_memory_mb")) c.max_memory_mb = j.at("max_memory_mb").get<int>();

  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["system"]["n_levels"] = system.n_levels;
  j["system"]["level_energies"] = system.level_energies;
  j["bath"]["model"] = bath_model_name(bath.model);
  j["bath"]["n_states"] = n_states_list;
  j["bath"]["spectral_width"] = bath.spectral_width;
  j["bath"]["ensemble"] = ensemble_name(bath.ensemble);
  if (!bath.splittings.empty()) j["bath"]["splittings"] = bath.splittings;
  j["coupling"]["structure"] = coupling_name(coupling_structure);
  j["beta"] = beta_list;
  j["lambda"] = lambda_list;
  j["seeds"] = seed_list;
  if (epsilon_degeneracy < 0.0)
    j["epsilon_degeneracy"] = nullptr;
  else
    j["epsilon_degeneracy"] = epsilon_degeneracy;
  j["time_average"]["enabled"] = time_average.enabled;
  j["time_average"]["t_avg"] = time_average.t_avg;
  j["time_average"]["n_samples"] = time_average.n_samples;
  j["initial_level"] = initial_level;
  j["dos_bins"] = dos_bins;
  j["output"]["directory"] = output.directory;
  j["output"]["dump_density_matrices"] = output.dump_density_matrices;
  j["threads"] = threads;
  j["max_dimension"] = max_dimension;
  j["max_memory_mb"] = max_memory_mb;
  return j;
}

void ExperimentConfig::validate() const {
  system.validate();
  if (n_states_list.empty()) config_error("bath.n_states list is empty");
  if (beta_list.empty()) config_error("beta list is empty");
  if (lambda_list.empty()) config_error("lambda list is empty");
  if (seed_list.empty()) config_error("seeds list is empty");
  for (double b : beta_list)
    if (!std::isfinite(b) || b < 0.0) config_error("beta values must be >= 0 and finite");
  for (double l : lambda_list)
    if (!std::isfinite(l) || l < 0.0) config_error("lambda values must be >= 0 and finite");
  if (max_dimension < 2 || max_dimension > default_dimension_cap)
    config_error("max_dimension must lie in [2, " + std::to_string(default_dimension_cap) + "]");
  int n_max = 0;
  for (int n : n_states_list) {
    if (n < 1) config_error("bath.n_states values must be >= 1");
    n_max = std::max(n_max, n);
    BathSpec bs = bath;
    bs.n_states = n;
    bs.validate();
    long d = static_cast<long>(system.n_levels) * n;
    if (d > max_dimension)
      config_error("composite dimension " + std::to_string(d) + " exceeds max_dimension " +
                   std::to_string(max_dimension));
  }
  double d_max = static_cast<double>(system.n_levels) * n_max;
  double est_mb = 4.0 * d_max * d_max * 16.0 / 1e6;
  if (est_mb > static_cast<double>(max_memory_mb))
    config_error("estimated working set " + std::to_string(static_cast<long>(est_mb)) +
                 " MB exceeds max_memory_mb " + std::to_string(max_memory_mb));
  if (initial_level < 0 || initial_level >= system.n_levels)
    config_error("initial_level out of range");
  if (dos_bins < 0) config_error("dos_bins must be >= 0");
  if (epsilon_degeneracy >= 0.0 && !std::isfinite(epsilon_degeneracy))
    config_error("epsilon_degeneracy must be finite");
  if (time_average.n_samples < 1) config_error("time_average.n_samples must be >= 1");
  if (threads < 0 || threads > 1024) config_error("threads must lie in [0, 1024]");
  if (max_memory_mb < 1) config_error("max_memory_mb must be >= 1");
}

int ExperimentConfig::resolve_threads() const {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("THERMALEQ_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<int>(v);
  }
  return 1;
}

SweepOutcome execute_sweep(const ExperimentConfig& config) {
  config.validate();
  const size_t nn = config.n_states_list.size();
  const size_t nb = config.beta_list.size();
  const size_t nl = config.lambda_list.size();
  const size_t ns = config.seed_list.size();

  SweepOutcome out;
  out.records.resize(nn * nb * nl * ns);
  auto flat = [&](size_t ni, size_t bi, size_t li, size_t si) {
    return ((ni * nb + bi) * nl + li) * ns + si;
  };

  struct Triple {
    size_t ni, li, si;
  };
  std::vector<Triple> triples;
  triples.reserve(nn * nl * ns);
  for (size_t ni = 0; ni < nn; ++ni)
    for (size_t li = 0; li < nl; ++li)
      for (size_t si = 0; si < ns; ++si) triples.push_back({ni, li, si});

  auto run_triple = [&](const Triple& t) {
    int n_states = config.n_states_list[t.ni];
    double lambda = config.lambda_list[t.li];
    std::uint64_t seed = config.seed_list[t.si];
    try {
      TripleContext ctx = build_triple_context(config, n_states, lambda, seed);
      for (size_t bi = 0; bi < nb; ++bi)
        out.records[flat(t.ni, bi, t.li, t.si)] = record_for_beta(
            config, ctx, n_states, config.beta_list[bi], lambda, seed, nullptr);
    } catch (const std::exception& e) {
      for (size_t bi = 0; bi < nb; ++bi)
        out.records[flat(t.ni, bi, t.li, t.si)] =
            failed_record(n_states, config.beta_list[bi], lambda, seed, e.what());
    }
  };

  int n_workers = std::min<int>(config.resolve_threads(), static_cast<int>(triples.size()));
  if (n_workers <= 1) {
    for (const Triple& t : triples) run_triple(t);
  } else {
    std::atomic<size_t> cursor{0};
    auto worker = [&] {
      while (true) {
        size_t i = cursor.fetch_add(1);
        if (i >= triples.size()) break;
        run_triple(triples[i]);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_workers - 1));
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }

  for (const PointRecord& r : out.records)
    if (r.status != "ok") {
      out.all_ok = false;
      break;
    }
  return out;
}

namespace {

json sweep_summary(const ExperimentConfig& config, const SweepOutcome& outcome) {
  const size_t nn = config.n_states_list.size();
  const size_t nb = config.beta_list.size();
  const size_t nl = config.lambda_list.size();
  const size_t ns = config.seed_list.size();
  auto flat = [&](size_t ni, size_t bi, size_t li, size_t si) {
    return ((ni * nb + bi) * nl + li) * ns + si;
  };

  json j;
  j["version"] = artifact_version;
  j["config"] = config.to_json();
  j["all_ok"] = outcome.all_ok;
  j["n_records"] = outcome.records.size();

  double max_abs_dev = 0.0;
  bool any_ok = false;
  for (const PointRecord& r : outcome.records)
    if (r.status == "ok") {
      any_ok = true;
      max_abs_dev = std::max(max_abs_dev, std::fabs(r.deviation));
    }
  j["max_abs_deviation"] = any_ok ? json_num(max_abs_dev) : json(nullptr);

  // D(beta) curves, seed-averaged, one per (N, lambda)
  json curves = json::array();
  for (size_t ni = 0; ni < nn; ++ni)
    for (size_t li = 0; li < nl; ++li) {
      json curve;
      curve["n_states"] = config.n_states_list[ni];
      curve["lambda"] = config.lambda_list[li];
      curve["beta"] = config.beta_list;
      json mean_dev = json::array(), mean_abs = json::array();
      for (size_t bi = 0; bi < nb; ++bi) {
        double acc = 0.0, acc_abs = 0.0;
        int n_ok = 0;
        for (size_t si = 0; si < ns; ++si) {
          const PointRecord& r = outcome.records[flat(ni, bi, li, si)];
          if (r.status == "ok") {
            acc += r.deviation;
            acc_abs += std::fabs(r.deviation);
            ++n_ok;
          }
        }
        mean_dev.push_back(n_ok ? json_num(acc / n_ok) : json(nullptr));
        mean_abs.push_back(n_ok ? json_num(acc_abs / n_ok) : json(nullptr));
      }
      curve["mean_deviation"] = mean_dev;
      curve["mean_abs_deviation"] = mean_abs;
      curves.push_back(curve);
    }
  j["curves"] = curves;

  // N-scaling table, seed-averaged, one per (beta, lambda)
  json scaling = json::array();
  for (size_t bi = 0; bi < nb; ++bi)
    for (size_t li = 0; li < nl; ++li) {
      json row;
      row["beta"] = config.beta_list[bi];
      row["lambda"] = config.lambda_list[li];
      row["n_states"] = config.n_states_list;
      json mean_abs = json::array();
      for (size_t ni = 0; ni < nn; ++ni) {
        double acc = 0.0;
        int n_ok = 0;
        for (size_t si = 0; si < ns; ++si) {
          const PointRecord& r = outcome.records[flat(ni, bi, li, si)];
          if (r.status == "ok") {
            acc += std::fabs(r.deviation);
            ++n_ok;
          }
        }
        mean_abs.push_back(n_ok ? json_num(acc / n_ok) : json(nullptr));
      }
      row["mean_abs_deviation"] = mean_abs;
      scaling.push_back(row);
    }
  j["n_scaling"] = scaling;
  return j;
}

}  // namespace

int run_sweep(const ExperimentConfig& config) {
  SweepOutcome outcome = execute_sweep(config);

  std::filesystem::path dir(config.output.directory);
  std::filesystem::create_directories(dir);

  std::ostringstream results;
  results << point_record_csv_header() << "\n";
  for (const PointRecord& r : outcome.records) results << point_record_csv_row(r) << "\n";
  write_text_file(dir / "results.csv", results.str());

  write_text_file(dir / "summary.json", sweep_summary(config, outcome).dump(2) + "\n");

  // timings are observational, deliberately kept out of the deterministic files
  std::ostringstream timings;
  timings << "n_states,beta,lambda,seed,wall_seconds\n";
  for (const PointRecord& r : outcome.records)
    timings << r.n_states << ',' << format_double(r.beta) << ',' << format_double(r.lambda)
            << ',' << r.seed << ',' << format_double(r.wall_seconds) << "\n";
  write_text_file(dir / "timings.csv", timings.str());

  return outcome.all_ok ? 0 : 1;
}

int run_single(const ExperimentConfig& config) {
  config.validate();
  if (config.n_states_list.size() != 1 || config.beta_list.size() != 1 ||
      config.lambda_list.size() != 1 || config.seed_list.size() != 1)
    config_error("simulate expects scalar n_states, beta, lambda and seeds "
                 "(use sweep for lists)");

  int n_states = config.n_states_list[0];
  double beta = config.beta_list[0];
  double lambda = config.lambda_list[0];
  std::uint64_t seed = config.seed_list[0];

  std::filesystem::path dir(config.output.directory);
  std::filesystem::create_directories(dir);

  TripleContext ctx = build_triple_context(config, n_states, lambda, seed);
  PointDetail detail;
  PointRecord rec = record_for_beta(config, ctx, n_states, beta, lambda, seed, &detail);

  json j;
  j["version"] = artifact_version;
  j["config"] = config.to_json();
  j["record"] = point_record_json(rec);

  if (rec.status == "ok") {
    j["f"] = json_vector(detail.ensemble.f);
    int bins = config.dos_bins > 0
                   ? config.dos_bins
                   : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_states))));
    DensityOfStates dos = density_of_states(ctx.spectrum.energies, bins);
    FBinned binned = f_binned(detail.ensemble.f, ctx.spectrum.energies, dos);
    json fb;
    fb["centers"] = binned.centers;
    fb["mean_f"] = binned.mean_f;
    fb["counts"] = binned.counts;
    fb["omega"] = binned.omega;
    fb["bin_width"] = binned.bin_width;
    fb["e_min"] = binned.e_min;
    j["f_binned"] = fb;
    j["p0_quadrature"] = json_num(p0_quadrature(binned, detail.weights));
    j["z_shifted"] = json_num(detail.weights.z_shifted);
    j["z_unshifted"] = json_num(detail.weights.z_unshifted);
    j["e_shift"] = json_num(detail.weights.e_shift);
    j["epsilon_degeneracy_used"] = ctx.epsilon;

    if (config.output.dump_density_matrices) {
      write_text_file(dir / "rho_s_inf.json",
                      json_matrix_pairs(detail.ensemble.rho_s_inf.rho).dump() + "\n");
      j["rho_s_inf_file"] = "rho_s_inf.json";
      if (detail.rho_timeavg) {
        write_text_file(dir / "rho_s_timeavg.json",
                        json_matrix_pairs(detail.rho_timeavg->rho).dump() + "\n");
        j["rho_s_timeavg_file"] = "rho_s_timeavg.json";
      }
    }
  }

  std::ostringstream bath_csv;
  bath_csv << "index,energy\n";
  for (long i = 0; i < ctx.spectrum.energies.size(); ++i)
    bath_csv << (i + 1) << ',' << format_double(ctx.spectrum.energies(i)) << "\n";
  write_text_file(dir / "bath.csv", bath_csv.str());
  j["bath_spectrum_file"] = "bath.csv";

  write_text_file(dir / "result.json", j.dump(2) + "\n");
  return rec.status == "ok" ? 0 : 1;
}

int run_laplace(const LaplaceRunParams& params) {
  LaplaceReport rep = residue_partial_sums(params.x_grid, params.delta, params.model,
                                           params.k_max, params.beta_ref);

  std::filesystem::path dir(params.out_dir);
  std::filesystem::create_directories(dir);

  json j;
  j["version"] = artifact_version;
  j["params"]["delta"] = rep.delta;
  j["params"]["model"] = rep.model_name;
  j["params"]["k_max"] = rep.k_max;
  j["params"]["x_grid"] = rep.x_grid;
  j["params"]["beta_ref"] = rep.beta_ref;
  switch (params.model.kind) {
    case PartitionKind::two_level_gas:
      j["params"]["n_particles"] = params.model.n_particles;
      j["params"]["gap"] = params.model.gap;
      break;
    case PartitionKind::classical_ideal_gas:
      j["params"]["n_particles"] = params.model.n_particles;
      j["params"]["volume_factor"] = params.model.volume_factor;
      break;
    case PartitionKind::oscillator_bath:
      j["params"]["frequencies"] = params.model.frequencies;
      break;
    case PartitionKind::explicit_spectrum:
      j["params"]["energies"] = params.model.energies;
      break;
  }
  j["z_ref"] = json_num(rep.z_ref);

  json pole_list = json::array();
  for (const LaplacePoleInfo& p : rep.poles) {
    json pj;
    pj["n"] = p.n;
    pj["beta"] = json::array({json_num(p.beta.real()), json_num(p.beta.imag())});
    pj["denominator_abs"] = json_num(p.denominator_abs);
    pj["zbar"] = json::array({json_num(p.zbar.real()), json_num(p.zbar.imag())});
    pj["residue_factor"] =
        json::array({json_num(p.residue_factor.real()), json_num(p.residue_factor.imag())});
    pj["excluded"] = p.excluded;
    if (p.excluded) pj["exclusion_reason"] = p.exclusion_reason;
    pole_list.push_back(pj);
  }
  j["poles"] = pole_list;
  j["pair_term_abs"] = rep.pair_term_abs;

  json sums = json::array();
  for (size_t xi = 0; xi < rep.x_grid.size(); ++xi) {
    json row;
    row["x"] = rep.x_grid[xi];
    json s = json::array();
    for (const auto& v : rep.partial_sums[xi])
      s.push_back(json::array({json_num(v.real()), json_num(v.imag())}));
    row["partial_sums"] = s;
    row["verdict"] = rep.verdicts[xi];
    row["tail_last_abs"] = json_num(rep.tail_last_abs[xi]);
    row["tail_sum_spread"] = json_num(rep.tail_sum_spread[xi]);
    sums.push_back(row);
  }
  j["partial_sums"] = sums;
  j["fitted_decay_exponent"] = json_num(rep.fitted_decay_exponent);
  j["fit_valid"] = rep.fit_valid;
  write_text_file(dir / "laplace.json", j.dump(2) + "\n");

  // one row per (pole, x); partial_sum columns are populated on the
  // positive-n member after its pair has been added
  std::ostringstream csv;
  csv << "x,pair,n,beta_im,term_re,term_im,term_abs,excluded,exclusion_reason,"
         "partial_sum_re,partial_sum_im\n";
  for (size_t xi = 0; xi < rep.x_grid.size(); ++xi) {
    double x = rep.x_grid[xi];
    for (int k = 0; k < rep.k_max; ++k) {
      for (int n : {k, -k - 1}) {
        const LaplacePoleInfo& p = rep.poles[static_cast<size_t>(n + rep.k_max)];
        double r = (2.0 * n + 1.0) * (x / rep.delta);
        std::complex<double> phase = std::polar(1.0, M_PI * r);
        std::complex<double> term = p.residue_factor * phase;
        csv << format_double(x) << ',' << k << ',' << n << ','
            << format_double(p.beta.imag()) << ',' << format_double(term.real()) << ','
            << format_double(term.imag()) << ',' << format_double(std::abs(term)) << ','
            << (p.excluded ? "1" : "0") << ',' << csv_field(p.exclusion_reason) << ',';
        if (n == k) {
          const auto& s = rep.partial_sums[xi][static_cast<size_t>(k)];
          csv << format_double(s.real()) << ',' << format_double(s.imag());
        } else {
          csv << ',';
        }
        csv << "\n";
      }
    }
  }
  write_text_file(dir / "laplace.csv", csv.str());
  return 0;
}

ExperimentConfig default_oracle_config() {
  ExperimentConfig c;
  c.system = SystemSpec{};
  c.bath.model = BathModel::random_matrix;
  c.bath.ensemble = RandomMatrixEnsemble::gue;
  c.bath.spectral_width = 1.0;
  c.n_states_list = {16};
  c.beta_list = {1.0};
  c.lambda_list = {0.1};
  c.seed_list = {1};
  c.time_average.enabled = true;
  c.time_average.n_samples = 2048;
  c.threads = 1;
  return c;
}

int run_oracle_check(const ExperimentConfig& config) {
  config.validate();
  for (int n : config.n_states_list)
    if (static_cast<long>(config.system.n_levels) * n > 64)
      config_error("oracle-check requires composite dimension <= 64");

  struct OracleRow {
    std::string name;
    double measured;
    double threshold;
    bool pass;
  };
  std::vector<OracleRow> rows;
  auto add = [&](const std::string& name, double measured, double threshold) {
    rows.push_back({name, measured, threshold, measured <= threshold});
  };

  int n_states = config.n_states_list[0];
  double beta = config.beta_list[0];
  double lambda = config.lambda_list[0];
  std::uint64_t seed = config.seed_list[0];
  const int n_levels = config.system.n_levels;
  const int dim = n_levels * n_states;

  TripleContext ctx = build_triple_context(config, n_states, lambda, seed);
  ThermalWeights w = gibbs_weights(ctx.spectrum, beta);
  DensityMatrix rho0 = initial_composite_state(config.initial_level, w, n_levels);
  DiagonalEnsembleResult de = diagonal_ensemble(ctx.eig, rho0, ctx.classes, config.initial_level);

  {  // partial trace against the index-loop contraction on random states
    rng::Stream stream(seed, "oracle/partial-trace");
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      MatrixXcd g(dim, dim);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
          auto [x, y] = stream.next_gaussian_pair();
          g(r, c) = complexd(x, y);
        }
      MatrixXcd rho = g * g.adjoint();
      rho /= rho.trace().real();
      DensityMatrix dm{SpaceTag::composite, rho};
      MatrixXcd fast = partial_trace_bath(dm, n_levels, n_states).rho;
      MatrixXcd slow = oracle::partial_trace_loop(rho, n_levels, n_states);
      worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff());
    }
    add("partial-trace-loop", worst, 1e-14);
  }

  {  // eigenphase evolution against matrix-exponential propagation
    rng::Stream stream(seed, "oracle/times");
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      double t = 20.0 * stream.next_unit();
      MatrixXcd fast = evolve(rho0, ctx.eig, t).rho;
      MatrixXcd slow = oracle::evolve_expm(rho0.rho, ctx.hamiltonian.matrix, t);
      worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff());
    }
    add("propagator-expm", worst, 1e-8);
  }

  {  // blocked f accumulation against the plain quadruple loop
    double worst = 0.0;
    for (int target = 0; target < n_levels; ++target) {
      VectorXd fast = f_weights(ctx.eig, ctx.classes, config.initial_level, target);
      std::vector<double> slow =
          oracle::f_weights_loop(ctx.eig, ctx.classes, config.initial_level, target);
      for (int jj = 0; jj < n_states; ++jj)
        worst = std::max(worst, std::fabs(fast(jj) - slow[static_cast<size_t>(jj)]));
    }
    add("f-quadruple-loop", worst, 1e-12);
  }

  {  // stationary p0 equals the thermally weighted overlap sum
    long double af = 0.0L;
    for (long jj = 0; jj < w.weights.size(); ++jj)
      af += static_cast<long double>(w.weights(jj)) * static_cast<long double>(de.f(jj));
    add("stationary-consistency", std::fabs(de.p0 - static_cast<double>(af)), 1e-10);
  }

  {  // unitarity sum rule over target levels
    double worst = 0.0;
    for (int jj = 0; jj < n_states; ++jj) {
      long double s = 0.0L;
      for (const auto& f : ctx.f_by_level) s += static_cast<long double>(f(jj));
      worst = std::max(worst, std::fabs(static_cast<double>(s - 1.0L)));
    }
    add("unitarity-sum-rule", worst, 1e-10);
  }

  {  // overlaps never depend on temperature, bit for bit
    ThermalWeights w2 = gibbs_weights(ctx.spectrum, 2.0 * beta + 0.7);
    DensityMatrix rho2 = initial_composite_state(config.initial_level, w2, n_levels);
    DiagonalEnsembleResult de2 =
        diagonal_ensemble(ctx.eig, rho2, ctx.classes, config.initial_level);
    double worst = 0.0;
    for (long jj = 0; jj < de.f.size(); ++jj)
      worst = std::max(worst, std::fabs(de.f(jj) - de2.f(jj)));
    add("f-beta-invariance", worst, 0.0);
  }

  {  // pairwise accumulation against the masked-matrix route
    DensityMatrix masked = oracle::diagonal_ensemble_masked(ctx.eig, rho0, ctx.classes);
    add("masked-ensemble-route", (masked.rho - de.rho_s_inf.rho).cwiseAbs().maxCoeff(), 1e-12);
  }

  {  // finite-time average approaches the diagonal ensemble; median of 5 seeds
    std::vector<double> errs;
    for (std::uint64_t k = 0; k < 5; ++k) {
      std::uint64_t s = seed + k;
      TripleContext c5 = build_triple_context(config, n_states, lambda, s);
      ThermalWeights w5 = gibbs_weights(c5.spectrum, beta);
      DensityMatrix r5 = initial_composite_state(config.initial_level, w5, n_levels);
      DiagonalEnsembleResult d5 =
          diagonal_ensemble(c5.eig, r5, c5.classes, config.initial_level);
      double gap_min = min_nonzero_gap(c5.eig, r5, 0.0);
      double t_avg = config.time_average.t_avg > 0.0
                         ? config.time_average.t_avg
                         : (gap_min > 0.0 ? 1e4 / gap_min : 1.0);
      DensityMatrix avg = time_average(r5, c5.eig, t_avg, config.time_average.n_samples);
      errs.push_back(std::fabs(avg.rho(0, 0).real() - d5.p0));
    }
    std::sort(errs.begin(), errs.end());
    add("timeavg-vs-diagonal", errs[errs.size() / 2], 1e-3);
  }

  {  // residue formula against the shrinking-circle numeric limit
    PartitionModel model = PartitionModel::classical_gas(2, 1.0);
    double worst = 0.0;
    for (int n : {-2, 0, 2})
      for (double x : {0.5, 1.5}) {
        ResiduePair rp = residue(n, x, 1.0, model);
        worst = std::max(worst,
                         std::abs(rp.formula - rp.numeric) / std::max(std::abs(rp.formula), 1e-300));
      }
    add("residue-numeric", worst, 1e-6);
  }

  bool all_pass = true;
  json report;
  report["version"] = artifact_version;
  report["config"] = config.to_json();
  json oracle_rows = json::array();
  for (const OracleRow& row : rows) {
    all_pass = all_pass && row.pass;
    std::printf("%s  %-24s measured=%.3e  threshold=%.3e\n", row.pass ? "PASS" : "FAIL",
                row.name.c_str(), row.measured, row.threshold);
    json rj;
    rj["name"] = row.name;
    rj["measured"] = json_num(row.measured);
    rj["threshold"] = row.threshold;
    rj["pass"] = row.pass;
    oracle_rows.push_back(rj);
  }
  report["oracles"] = oracle_rows;
  report["all_pass"] = all_pass;

  std::filesystem::path dir(config.output.directory);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "oracle.json", report.dump(2) + "\n");

  std::printf("%s\n", all_pass ? "all oracles passed" : "oracle failures detected");
  return all_pass ? 0 : 1;
}

json config_schema() {
  ExperimentConfig defaults;
  defaults.n_states_list = {16};
  defaults.beta_list = {1.0};
  defaults.lambda_list = {0.1};
  defaults.seed_list = {1};

  json j;
  j["version"] = artifact_version;
  j["defaults"] = defaults.to_json();
  json f;
  f["system.n_levels"] = "number of system levels (>= 2)";
  f["system.level_energies"] = "ascending level energies; length n_levels";
  f["bath.model"] = "ladder | random-matrix | spin-gas";
  f["bath.n_states"] = "bath dimension N; scalar or list (sweep axis)";
  f["bath.spectral_width"] = "bath spectral width W";
  f["bath.ensemble"] = "gue | goe (random-matrix model only)";
  f["bath.splittings"] = "spin-gas level splittings; length log2(N); equal W/k when omitted";
  f["coupling.structure"] = "random-hermitian | system-flip-random-bath";
  f["beta"] = "inverse temperature(s) of the initial bath state; scalar or list";
  f["lambda"] = "coupling strength(s); scalar or list";
  f["seeds"] = "master seed(s); bath and coupling streams derive from each";
  f["epsilon_degeneracy"] = "degeneracy tolerance; null selects 1e-9 of the spectral spread";
  f["time_average.enabled"] = "also compute the finite-time average";
  f["time_average.t_avg"] = "averaging window; <= 0 selects 1e4 over the smallest populated gap";
  f["time_average.n_samples"] = "midpoint samples across the window";
  f["initial_level"] = "system level prepared at t = 0";
  f["dos_bins"] = "bins for the f profile; 0 selects ceil(sqrt(N))";
  f["output.directory"] = "output directory for result files";
  f["output.dump_density_matrices"] = "write density matrices as row-major [re, im] pairs";
  f["threads"] = "worker threads; 0 defers to THERMALEQ_THREADS, then 1";
  f["max_dimension"] = "hard cap on the composite dimension";
  f["max_memory_mb"] = "refuse configs whose working set exceeds this";
  j["fields"] = f;
  return j;
}

}  // namespace thermaleq
