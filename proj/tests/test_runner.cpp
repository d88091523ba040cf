#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermaleq/runner.hpp"
#include "test_support.hpp"

using namespace thermaleq;
using nlohmann::json;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.bath.model = BathModel::random_matrix;
  c.bath.spectral_width = 1.0;
  c.n_states_list = {8};
  c.beta_list = {1.0};
  c.lambda_list = {0.1};
  c.seed_list = {1};
  c.threads = 1;
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// doctest's exact-message matcher is too brittle for long prefixed messages;
// capture the what() string for substring checks instead.
template <typename Fn>
std::string thrown_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("config json round trip preserves every field") {
  json j;
  j["system"] = {{"n_levels", 2}, {"level_energies", {0.0, 0.7}}};
  j["bath"] = {{"model", "random-matrix"},
               {"n_states", {4, 8}},
               {"spectral_width", 2.5},
               {"ensemble", "goe"}};
  j["coupling"] = {{"structure", "system-flip-random-bath"}};
  j["beta"] = {0.5, 1.5};
  j["lambda"] = {0.0, 0.2};
  j["seeds"] = {3, 4};
  j["epsilon_degeneracy"] = 1e-8;
  j["time_average"] = {{"enabled", true}, {"t_avg", 50.0}, {"n_samples", 128}};
  j["initial_level"] = 1;
  j["dos_bins"] = 5;
  j["output"] = {{"directory", "/tmp/x"}, {"dump_density_matrices", true}};
  j["threads"] = 2;
  j["max_dimension"] = 64;
  j["max_memory_mb"] = 512;

  ExperimentConfig c = ExperimentConfig::from_json(j);
  CHECK(c.system.level_energies == std::vector<double>{0.0, 0.7});
  CHECK(c.bath.model == BathModel::random_matrix);
  CHECK(c.bath.ensemble == RandomMatrixEnsemble::goe);
  CHECK(c.bath.spectral_width == 2.5);
  CHECK(c.n_states_list == std::vector<int>{4, 8});
  CHECK(c.coupling_structure == CouplingStructure::system_flip_random_bath);
  CHECK(c.beta_list == std::vector<double>{0.5, 1.5});
  CHECK(c.lambda_list == std::vector<double>{0.0, 0.2});
  CHECK(c.seed_list == std::vector<std::uint64_t>{3, 4});
  CHECK(c.epsilon_degeneracy == 1e-8);
  CHECK(c.time_average.enabled);
  CHECK(c.time_average.t_avg == 50.0);
  CHECK(c.time_average.n_samples == 128);
  CHECK(c.initial_level == 1);
  CHECK(c.dos_bins == 5);
  CHECK(c.output.directory == "/tmp/x");
  CHECK(c.output.dump_density_matrices);
  CHECK(c.threads == 2);
  CHECK(c.max_dimension == 64);
  CHECK(c.max_memory_mb == 512);

  json echoed = c.to_json();
  ExperimentConfig c2 = ExperimentConfig::from_json(echoed);
  CHECK(c2.to_json() == echoed);
}

TEST_CASE("scalar config values are accepted as one-element lists") {
  json j;
  j["bath"] = {{"model", "ladder"}, {"n_states", 6}};
  j["beta"] = 0.5;
  j["lambda"] = 0.25;
  j["seeds"] = 9;
  ExperimentConfig c = ExperimentConfig::from_json(j);
  CHECK(c.n_states_list == std::vector<int>{6});
  CHECK(c.beta_list == std::vector<double>{0.5});
  CHECK(c.lambda_list == std::vector<double>{0.25});
  CHECK(c.seed_list == std::vector<std::uint64_t>{9});
}

TEST_CASE("omitted config sections fall back to documented defaults") {
  ExperimentConfig c = ExperimentConfig::from_json(json::object());
  CHECK(c.system.n_levels == 2);
  CHECK(c.bath.model == BathModel::ladder);
  CHECK(c.n_states_list == std::vector<int>{16});
  CHECK(c.beta_list == std::vector<double>{1.0});
  CHECK(c.lambda_list == std::vector<double>{0.1});
  CHECK(c.seed_list == std::vector<std::uint64_t>{1});
  CHECK(c.epsilon_degeneracy < 0.0);
  CHECK_FALSE(c.time_average.enabled);
  CHECK(c.threads == 0);
  CHECK(c.max_dimension == default_dimension_cap);
}

TEST_CASE("unknown config keys are rejected with their context") {
  std::string m = thrown_message([] {
    ExperimentConfig::from_json(json{{"betta", json::array({1.0})}});
  });
  CHECK(m.find("unknown key \"betta\"") != std::string::npos);
  CHECK(m.find("top level") != std::string::npos);

  m = thrown_message([] {
    ExperimentConfig::from_json(json{{"bath", json{{"modle", "ladder"}}}});
  });
  CHECK(m.find("unknown key \"modle\"") != std::string::npos);
  CHECK(m.find("bath") != std::string::npos);

  m = thrown_message([] {
    ExperimentConfig::from_json(json{{"bath", json{{"model", "lattice"}}}});
  });
  CHECK(m.find("lattice") != std::string::npos);
}

TEST_CASE("config validation rejects out-of-range requests") {
  ExperimentConfig base = small_config();

  ExperimentConfig c = base;
  c.beta_list.clear();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = base;
  c.beta_list = {-0.5};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = base;
  c.lambda_list = {std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = base;
  c.seed_list.clear();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = base;
  c.initial_level = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = base;
  c.n_states_list = {64};
  c.max_dimension = 16;
  std::string m = thrown_message([&] { c.validate(); });
  CHECK(m.find("config:") != std::string::npos);

  c = base;
  c.n_states_list = {512};
  c.max_memory_mb = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = base;
  c.threads = 1025;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = base;
  c.time_average.n_samples = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  base.validate();
}

TEST_CASE("thread resolution prefers the config, then the environment") {
  ExperimentConfig c = small_config();
  c.threads = 3;
  setenv("THERMALEQ_THREADS", "7", 1);
  CHECK(c.resolve_threads() == 3);

  c.threads = 0;
  CHECK(c.resolve_threads() == 7);

  setenv("THERMALEQ_THREADS", "not-a-number", 1);
  CHECK(c.resolve_threads() == 1);

  setenv("THERMALEQ_THREADS", "0", 1);
  CHECK(c.resolve_threads() == 1);

  setenv("THERMALEQ_THREADS", "99999", 1);
  CHECK(c.resolve_threads() == 1);

  unsetenv("THERMALEQ_THREADS");
  CHECK(c.resolve_threads() == 1);
}

TEST_CASE("sweep records cover the grid in index order") {
  ExperimentConfig c = small_config();
  c.n_states_list = {4, 8};
  c.beta_list = {0.5, 1.0};
  c.lambda_list = {0.1};
  c.seed_list = {1, 2};

  SweepOutcome out = execute_sweep(c);
  REQUIRE(out.records.size() == 8);
  CHECK(out.all_ok);

  size_t k = 0;
  for (int n : {4, 8})
    for (double beta : {0.5, 1.0})
      for (std::uint64_t seed : {1ull, 2ull}) {
        const PointRecord& r = out.records[k++];
        CHECK(r.n_states == n);
        CHECK(r.beta == beta);
        CHECK(r.lambda == 0.1);
        CHECK(r.seed == seed);
        CHECK(r.status == "ok");
        CHECK(r.p0_diag > 0.0);
        CHECK(r.p0_diag <= 1.0 + 1e-12);
        CHECK(r.consistency_err <= 1e-10);
        CHECK(r.sum_rule_err <= 1e-10);
        CHECK(r.trace_dev <= 1e-10);
        CHECK(r.min_eig >= -1e-10);
      }
}

TEST_CASE("uncoupled sweep stays in the initial level and reports the gap to Gibbs") {
  ExperimentConfig c = small_config();
  c.lambda_list = {0.0};
  SweepOutcome out = execute_sweep(c);
  REQUIRE(out.records.size() == 1);
  const PointRecord& r = out.records[0];
  CHECK(r.status == "ok");
  CHECK(std::fabs(r.p0_diag - 1.0) <= 1e-12);
  double gibbs = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(std::fabs(r.deviation - (1.0 - gibbs)) <= 1e-9);
  CHECK(r.deviation > 0.0);
  // p0 = 1 up to rounding, so beta_eff is either infinite or enormous
  CHECK((!r.beta_eff_finite || r.beta_eff > 20.0));
}

TEST_CASE("infinite-temperature bath pins the equilibrium prediction at one half") {
  ExperimentConfig c = small_config();
  c.beta_list = {0.0};
  c.seed_list = {1, 2, 3};
  SweepOutcome out = execute_sweep(c);
  REQUIRE(out.records.size() == 3);
  for (const PointRecord& r : out.records) {
    CHECK(r.status == "ok");
    CHECK(r.p0_gibbs == 0.5);
    CHECK(r.deviation == r.p0_diag - 0.5);  // signed gap to the equilibrium value
  }
}

TEST_CASE("repeated seeds produce identical records") {
  ExperimentConfig c = small_config();
  c.seed_list = {7, 7};
  SweepOutcome out = execute_sweep(c);
  REQUIRE(out.records.size() == 2);
  const PointRecord& a = out.records[0];
  const PointRecord& b = out.records[1];
  CHECK(a.p0_diag == b.p0_diag);
  CHECK(a.p0_gibbs == b.p0_gibbs);
  CHECK(a.deviation == b.deviation);
  CHECK(a.beta_eff == b.beta_eff);
  CHECK(a.consistency_err == b.consistency_err);
  CHECK(a.sum_rule_err == b.sum_rule_err);
  CHECK(a.n_classes == b.n_classes);
  CHECK(a.p0_offdiag_part == b.p0_offdiag_part);
}

TEST_CASE("single-spin bath reproduces the averaged Rabi formula") {
  ExperimentConfig c = small_config();
  c.bath.model = BathModel::ladder;
  c.n_states_list = {1};
  c.coupling_structure = CouplingStructure::system_flip_random_bath;
  c.lambda_list = {0.3};
  SweepOutcome out = execute_sweep(c);
  REQUIRE(out.records.size() == 1);
  const PointRecord& r = out.records[0];
  CHECK(r.status == "ok");
  double expected = 1.0 - 2.0 * 0.3 * 0.3 / (4.0 * 0.3 * 0.3 + 1.0);
  CHECK(std::fabs(r.p0_diag - expected) <= 1e-10);
}

TEST_CASE("a failing point is recorded in-row and the sweep continues") {
  // n_samples = 1 passes config validation but the averaging routine needs
  // at least two samples, so the failure surfaces per point.
  ExperimentConfig c = small_config();
  c.beta_list = {0.5, 1.0};
  c.time_average.enabled = true;
  c.time_average.t_avg = 10.0;
  c.time_average.n_samples = 1;
  c.validate();

  SweepOutcome out = execute_sweep(c);
  REQUIRE(out.records.size() == 2);
  CHECK_FALSE(out.all_ok);
  for (const PointRecord& r : out.records) {
    CHECK(r.status != "ok");
    CHECK_FALSE(r.status.empty());
    CHECK(std::isnan(r.p0_diag));
    CHECK(std::isnan(r.deviation));
    CHECK_FALSE(r.beta_eff_finite);
  }

  testsupport::ScratchDir dir("runner-fail");
  c.output.directory = dir.str();
  CHECK(run_sweep(c) == 1);
  std::istringstream csv(read_file(dir.str() + "/results.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line ==
        "n_states,beta,lambda,seed,status,p0_diag,p0_gibbs,deviation,beta_eff,"
        "consistency_err,sum_rule_err,n_classes,max_class_size,p0_offdiag_part,"
        "trace_dev,herm_dev,min_eig,p0_timeavg,timeavg_dev");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> fields = split_csv_line(line);
    REQUIRE(fields.size() == 19);
    CHECK(fields[4] != "ok");
    CHECK(fields[5].empty());
    CHECK(fields[8].empty());
    ++rows;
  }
  CHECK(rows == 2);
}

TEST_CASE("sweep output files are byte-stable across thread counts") {
  ExperimentConfig c = small_config();
  c.n_states_list = {4, 8};
  c.beta_list = {0.5, 1.0, 2.0};
  c.lambda_list = {0.0, 0.1};
  c.seed_list = {1, 2};

  testsupport::ScratchDir dir_a("runner-threads1");
  testsupport::ScratchDir dir_b("runner-threads4");

  c.threads = 1;
  c.output.directory = dir_a.str();
  CHECK(run_sweep(c) == 0);

  c.threads = 4;
  c.output.directory = dir_b.str();
  CHECK(run_sweep(c) == 0);

  // summary.json embeds the resolved config (threads, directory), so the
  // determinism contract is on the records file.
  CHECK(read_file(dir_a.str() + "/results.csv") == read_file(dir_b.str() + "/results.csv"));
}

TEST_CASE("single run emits a stable result bundle") {
  ExperimentConfig c = small_config();
  c.time_average.enabled = true;
  c.time_average.t_avg = 40.0;
  c.time_average.n_samples = 256;
  c.output.dump_density_matrices = true;

  testsupport::ScratchDir dir("runner-single");
  c.output.directory = dir.str();
  REQUIRE(run_single(c) == 0);

  std::string result_1 = read_file(dir.str() + "/result.json");
  std::string bath_1 = read_file(dir.str() + "/bath.csv");
  std::string rho_1 = read_file(dir.str() + "/rho_s_inf.json");
  std::string avg_1 = read_file(dir.str() + "/rho_s_timeavg.json");

  REQUIRE(run_single(c) == 0);
  CHECK(read_file(dir.str() + "/result.json") == result_1);
  CHECK(read_file(dir.str() + "/bath.csv") == bath_1);
  CHECK(read_file(dir.str() + "/rho_s_inf.json") == rho_1);
  CHECK(read_file(dir.str() + "/rho_s_timeavg.json") == avg_1);

  json j = json::parse(result_1);
  CHECK(j["version"] == artifact_version);
  CHECK(j["record"]["status"] == "ok");
  CHECK(j["config"]["bath"]["model"] == "random-matrix");
  CHECK(j["f"].size() == 8);
  CHECK(j.contains("p0_quadrature"));
  CHECK(j["bath_spectrum_file"] == "bath.csv");

  std::istringstream bath_csv(bath_1);
  std::string line;
  std::getline(bath_csv, line);
  CHECK(line == "index,energy");
  std::getline(bath_csv, line);
  CHECK(line.rfind("1,", 0) == 0);

  json rho = json::parse(rho_1);
  CHECK(rho.size() == 4);  // 2x2 row-major [re, im] pairs
  double tr = rho[0][0].get<double>() + rho[3][0].get<double>();
  CHECK(std::fabs(tr - 1.0) <= 1e-10);

  ExperimentConfig lists = c;
  lists.beta_list = {0.5, 1.0};
  CHECK_THROWS_AS(run_single(lists), std::invalid_argument);
}

TEST_CASE("oracle battery passes on the default configuration") {
  ExperimentConfig c = default_oracle_config();
  testsupport::ScratchDir dir("runner-oracle");
  c.output.directory = dir.str();
  REQUIRE(run_oracle_check(c) == 0);

  json report = json::parse(read_file(dir.str() + "/oracle.json"));
  CHECK(report["all_pass"] == true);
  REQUIRE(report["oracles"].is_array());
  CHECK(report["oracles"].size() == 9);
  bool saw_timeavg = false;
  for (const json& row : report["oracles"]) {
    CHECK(row["pass"] == true);
    if (row["name"] == "timeavg-vs-diagonal") saw_timeavg = true;
  }
  CHECK(saw_timeavg);
}

TEST_CASE("oracle battery flags over-merged degeneracy classes") {
  ExperimentConfig c = default_oracle_config();
  c.epsilon_degeneracy = 1e3 * c.bath.spectral_width;
  testsupport::ScratchDir dir("runner-oracle-bad");
  c.output.directory = dir.str();
  CHECK(run_oracle_check(c) == 1);

  json report = json::parse(read_file(dir.str() + "/oracle.json"));
  CHECK(report["all_pass"] == false);
  bool timeavg_failed = false;
  for (const json& row : report["oracles"])
    if (row["name"] == "timeavg-vs-diagonal") timeavg_failed = !row["pass"].get<bool>();
  CHECK(timeavg_failed);
}

TEST_CASE("oracle battery passes with the coupling switched off") {
  ExperimentConfig c = default_oracle_config();
  c.lambda_list = {0.0};
  testsupport::ScratchDir dir("runner-oracle-uncoupled");
  c.output.directory = dir.str();
  CHECK(run_oracle_check(c) == 0);
}

TEST_CASE("matched partition model yields all-zero residue sums in the report") {
  LaplaceRunParams p;
  p.delta = 0.9;
  p.model = PartitionModel::two_level(2, 0.9);
  p.k_max = 6;
  p.x_grid = {0.37, 1.0};
  testsupport::ScratchDir dir("runner-laplace");
  p.out_dir = dir.str();
  REQUIRE(run_laplace(p) == 0);

  std::string csv_1 = read_file(dir.str() + "/laplace.csv");
  std::string json_1 = read_file(dir.str() + "/laplace.json");

  std::istringstream csv(csv_1);
  std::string line;
  std::getline(csv, line);
  CHECK(line ==
        "x,pair,n,beta_im,term_re,term_im,term_abs,excluded,exclusion_reason,"
        "partial_sum_re,partial_sum_im");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> fields = split_csv_line(line);
    REQUIRE(fields.size() == 11);
    CHECK(std::strtod(fields[6].c_str(), nullptr) == 0.0);
    if (!fields[9].empty()) CHECK(std::strtod(fields[9].c_str(), nullptr) == 0.0);
    ++rows;
  }
  CHECK(rows == 2 * 2 * 6);  // two x values, six pole pairs, two members each

  json j = json::parse(json_1);
  CHECK(j["params"]["model"] == "two-level-gas");
  CHECK(j["fit_valid"] == false);
  for (const json& row : j["partial_sums"]) CHECK(row["verdict"] == "converged");

  REQUIRE(run_laplace(p) == 0);
  CHECK(read_file(dir.str() + "/laplace.csv") == csv_1);
  CHECK(read_file(dir.str() + "/laplace.json") == json_1);
}

TEST_CASE("csv fields are quoted per RFC 4180") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("") == "");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("line\nbreak") == "\"line\nbreak\"");
  CHECK(csv_field("cr\rlf") == "\"cr\rlf\"");
}

TEST_CASE("doubles are formatted for exact round trips") {
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");

  rng::Stream stream(11, "test/format-double");
  for (int i = 0; i < 50; ++i) {
    auto [x, y] = stream.next_gaussian_pair();
    double v = x * std::exp(y);
    double back = std::strtod(format_double(v).c_str(), nullptr);
    CHECK(back == v);
  }
}

TEST_CASE("config schema documents every field and the defaults") {
  json schema = config_schema();
  CHECK(schema["version"] == artifact_version);
  CHECK(schema["defaults"]["beta"] == json::array({1.0}));
  CHECK(schema["defaults"]["lambda"] == json::array({0.1}));
  const json& fields = schema["fields"];
  for (const char* key : {"system.n_levels", "bath.model", "bath.n_states", "beta",
                          "lambda", "seeds", "epsilon_degeneracy", "time_average.n_samples",
                          "output.directory", "threads", "max_dimension"})
    CHECK(fields.contains(key));
  std::string threads_doc = fields["threads"].get<std::string>();
  CHECK(threads_doc.find("THERMALEQ_THREADS") != std::string::npos);
}

}  // TEST_SUITE
