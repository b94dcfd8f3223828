#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "risjcas/errors.hpp"
#include "risjcas/experiment.hpp"

using namespace risjcas;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("risjcas_exp_" + name);
  fs::remove_all(p);
  return p;
}

int config_error_line(const std::string& yaml) {
  try {
    validate(parse_config(yaml));
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::string config_error(const std::string& yaml) {
  try {
    validate(parse_config(yaml));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig small_sweep() {
  ExperimentConfig c;
  c.ris_side = 2;
  c.outer_iters = 5;
  c.restarts = 1;
  c.noise_comm_dbm = -50.0;
  return c;
}

}  // namespace

TEST_CASE("unit conversions") {
  CHECK(std::abs(dbm_to_watts(30.0) - 1.0) < 1e-15);
  CHECK(std::abs(dbm_to_watts(-50.0) - 1e-8) < 1e-22);
  CHECK(std::abs(db_to_linear(-20.0) - 0.01) < 1e-16);
  CHECK(parse_spacing("lambda/2") == 0.5);
  CHECK(parse_spacing("lambda/4") == 0.25);
  CHECK(parse_spacing("lambda/8") == 0.125);
  CHECK(parse_spacing("lambda") == 1.0);
  CHECK(parse_spacing("0.3") == 0.3);
  CHECK(std::abs(parse_angle("30") - kPi / 6) < 1e-15);
  CHECK(std::abs(parse_angle("2pi/3") - 2 * kPi / 3) < 1e-15);
  CHECK(std::abs(parse_angle("3pi/5") - 3 * kPi / 5) < 1e-15);
  CHECK(std::abs(parse_angle("pi/2") - kPi / 2) < 1e-15);
  CHECK(std::abs(parse_angle("-pi/4") + kPi / 4) < 1e-15);
}

TEST_CASE("config parsing and validation") {
  const ExperimentConfig def;
  CHECK_NOTHROW(validate(def));
  CHECK(parse_config(to_yaml(def)) == def);
  CHECK(parse_config("") == def);

  ExperimentConfig c = def;
  c.mode = "bi";
  c.aod = "3pi/5";
  c.quant_bits = {1, 8};
  c.quant_si = {true};
  c.gamma_bs_im = -0.25;
  c.alpha_grid = {0.0, 0.25, 1.0};
  c.coupling_cache_dir = "cache dir";
  CHECK(parse_config(to_yaml(c)) == c);

  const char* text =
      "# comment\n"
      "mode: bi\n"
      "arrays:\n"
      "  ris_side: 4   # sixteen elements\n"
      "  spacing: lambda/4\n"
      "bistatic:\n"
      "  aod: 3pi/5\n";
  ExperimentConfig p = parse_config(text);
  CHECK(p.mode == "bi");
  CHECK(p.ris_side == 4);
  CHECK(validate(p).spacing_wavelengths == 0.25);
  CHECK(std::abs(validate(p).aod - 3 * kPi / 5) < 1e-15);

  CHECK(config_error_line("mode: mono\narrays:\n  spacing: -1\n") == 3);
  CHECK(config_error("mode: mono\narrays:\n  spacing: -1\n").find("arrays.spacing") != std::string::npos);
  CHECK(config_error_line("arrays:\n  spacing: 0\n") == 2);
  CHECK(config_error("optimizer:\n  alpha_grid: [0, 1.5]\n").find("alpha") != std::string::npos);
  CHECK(config_error_line("optimizer:\n  alpha_grid: [0, 1.5]\n") == 2);
  CHECK(config_error_line("arrays:\n  nt: 4\n  colour: red\n") == 3);
  CHECK(config_error("arrays:\n  nt: 4\n  colour: red\n").find("unknown") != std::string::npos);
  CHECK(config_error_line("mode: sideways\n") == 1);
  CHECK(config_error_line("arrays:\n  nt: four\n") == 2);
  CHECK(config_error_line("quantization:\n  bits: []\n") == 2);
  CHECK(config_error_line("mode: [unclosed\n") > 0);
  CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
  CHECK(load_config(fs::path(RISJCAS_SOURCE_DIR) / "configs" / "default.yaml") == def);
}

TEST_CASE("manifest hash") {
  const ExperimentConfig def;
  const std::string h = manifest_hash(def);
  CHECK(h.size() == 40);
  CHECK(manifest_hash(def) == h);
  ExperimentConfig c = def;
  c.seed_count = 3;
  CHECK(manifest_hash(c) != h);
  c = def;
  c.step_size = 0.25;
  CHECK(manifest_hash(c) != h);
  c = def;
  c.aod = "3pi/5";
  CHECK(manifest_hash(c) != h);
}

TEST_CASE("sweep output") {
  const ExperimentConfig def;
  const fs::path a = scratch("sweep_a"), b = scratch("sweep_b");
  SweepOutput out = run_sweep(def, a);
  CHECK(out.rows == 22);
  auto rows = csv_rows(out.pareto_csv);
  REQUIRE(rows.size() == 23);
  CHECK(rows[0] == std::vector<std::string>{"alpha", "fi_trace", "mi", "model", "mode", "M", "spacing", "seed"});
  run_sweep(def, b);
  CHECK(slurp(a / "pareto.csv") == slurp(b / "pareto.csv"));
  CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));
  CHECK(fs::exists(a / "manifest.json"));

  // CSV values re-parse to the written doubles
  for (std::size_t i = 1; i < rows.size(); ++i)
    for (int col : {0, 1, 2}) {
      const double v = std::strtod(rows[i][col].c_str(), nullptr);
      CHECK(format_number(v) == rows[i][col]);
    }
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-310, 0.0})
    CHECK(std::strtod(format_number(v).c_str(), nullptr) == v);

  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["config_hash"] == manifest_hash(def));
  CHECK(manifest["version"] == kVersion);
  CHECK(parse_config(manifest["config_yaml"].get<std::string>()) == def);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("bistatic angle of departure changes the FI") {
  ExperimentConfig c = small_sweep();
  c.mode = "bi";
  c.seed_count = 2;
  const fs::path a = scratch("aod_a"), b = scratch("aod_b");
  run_sweep(c, a);
  c.aod = "3pi/5";
  run_sweep(c, b);
  const auto manifest = nlohmann::json::parse(slurp(b / "manifest.json"));
  CHECK(manifest["config_yaml"].get<std::string>().find("aod: \"3pi/5\"") != std::string::npos);
  CHECK(std::abs(manifest["linear"]["aod_rad"].get<double>() - 3 * kPi / 5) < 1e-12);
  auto ra = csv_rows(a / "pareto.csv"), rb = csv_rows(b / "pareto.csv");
  REQUIRE(ra.size() == rb.size());
  int differing = 0;
  for (std::size_t i = 1; i < ra.size(); ++i) {
    CHECK(ra[i][7] == rb[i][7]);
    if (ra[i][1] != rb[i][1]) ++differing;
  }
  CHECK(differing == static_cast<int>(ra.size()) - 1);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("quantization study output") {
  ExperimentConfig c = small_sweep();
  c.quant_si = {false};
  c.quant_samples = 64;
  const fs::path dir = scratch("quant");
  QuantOutput q = run_quantization_study(c, dir);
  auto rows = csv_rows(q.csv);
  REQUIRE(rows.size() == 1 + 4 * c.quant_noise_dbm.size());
  CHECK(rows[0] == std::vector<std::string>{"noise_var", "bits", "si_flag", "seed_count", "fi_trace_mean",
                                            "fi_trace_std"});
  for (std::size_t n = 0; n < c.quant_noise_dbm.size(); ++n) {
    double prev = 0.0;
    for (int k = 0; k < 4; ++k) {
      const auto& r = rows[1 + 4 * n + k];
      CHECK(r[0] == rows[1 + 4 * n][0]);
      CHECK(r[2] == "0");
      const double mean = std::stod(r[4]);
      CHECK(mean >= prev);
      prev = mean;
    }
  }
  CHECK(csv_rows(q.reference_csv).size() == 1 + c.quant_noise_dbm.size());
  fs::remove_all(dir);
}

TEST_CASE("problem construction") {
  ExperimentConfig c = small_sweep();
  Problem p = build_problem(c, 3);
  CHECK(p.channels.m() == 4);
  CHECK(p.model == ReflectionModel::physically_consistent);
  CHECK(p.s.size() == 4);
  CHECK(std::abs(p.power - 1.0) < 1e-15);
  CHECK(p.channels.h_si.norm() > 0.0);
  c.mode = "bi";
  CHECK(build_problem(c, 3).channels.h_si.norm() == 0.0);
  c.model = "conv";
  CHECK(build_problem(c, 3).model == ReflectionModel::conventional);
  CHECK(seed_list(c) == std::vector<std::uint64_t>{1, 2});
}
