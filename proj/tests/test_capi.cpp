#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "risjcas/risjcas.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("risjcas_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RISJCAS_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string run_cli_output(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / "risjcas_cli_output.txt";
  const std::string cmd = std::string(RISJCAS_CLI) + " " + args + " > " + out.string() + " 2>&1";
  if (std::system(cmd.c_str()) != 0) {
  }
  std::ifstream is(out);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

const char* kSmall =
    "arrays:\n"
    "  ris_side: 2\n"
    "noise:\n"
    "  comm_dbm: -50\n"
    "optimizer:\n"
    "  outer_iters: 4\n"
    "  restarts: 1\n"
    "  alpha_grid: [0, 0.5, 1]\n"
    "seeds:\n"
    "  count: 1\n";

}  // namespace

TEST_CASE("config handles") {
  CHECK(std::string(rj_version()) == "0.3.0");
  rj_config* c = nullptr;
  REQUIRE(rj_config_default(&c) == RJ_OK);
  CHECK(rj_config_validate(c) == RJ_OK);
  char hash[41];
  REQUIRE(rj_config_hash(c, hash) == RJ_OK);
  CHECK(std::string(hash).size() == 40);

  size_t needed = 0;
  CHECK(rj_config_to_yaml(c, nullptr, 0, &needed) == RJ_OK);
  REQUIRE(needed > 1);
  std::vector<char> buf(needed);
  CHECK(rj_config_to_yaml(c, buf.data(), needed - 1, &needed) == RJ_ERR_ARGUMENT);
  REQUIRE(rj_config_to_yaml(c, buf.data(), buf.size(), &needed) == RJ_OK);
  rj_config* back = nullptr;
  REQUIRE(rj_config_parse(buf.data(), &back) == RJ_OK);
  char hash2[41];
  rj_config_hash(back, hash2);
  CHECK(std::string(hash) == std::string(hash2));

  CHECK(rj_config_set_seeds(c, 5) == RJ_OK);
  rj_config_hash(c, hash2);
  CHECK(std::string(hash) != std::string(hash2));
  CHECK(rj_config_set_model(c, "conv") == RJ_OK);
  CHECK(rj_config_set_model(c, "other") == RJ_ERR_ARGUMENT);
  CHECK(rj_config_set_mode(c, "bi") == RJ_OK);
  CHECK(rj_config_set_mode(c, "tri") == RJ_ERR_ARGUMENT);
  const int bits[] = {1, 8};
  CHECK(rj_config_set_bits(c, bits, 2) == RJ_OK);
  CHECK(rj_config_set_bits(c, bits, 0) == RJ_ERR_CONFIG);
  CHECK(std::string(rj_config_output_dir(c)) == "out");
  CHECK(rj_config_set_threads(c, 2) == RJ_OK);

  rj_config* bad = nullptr;
  CHECK(rj_config_parse("mode: mono\narrays:\n  spacing: -1\n", &bad) == RJ_ERR_CONFIG);
  CHECK(bad == nullptr);
  CHECK(rj_last_error_line() == 3);
  CHECK(std::string(rj_last_error()).find("arrays.spacing") != std::string::npos);
  CHECK(rj_config_load("/nonexistent.yaml", &bad) == RJ_ERR_CONFIG);
  CHECK(rj_config_default(nullptr) == RJ_ERR_ARGUMENT);

  rj_config_free(back);
  rj_config_free(c);
  rj_config_free(nullptr);
}

TEST_CASE("problem handles") {
  rj_config* c = nullptr;
  REQUIRE(rj_config_parse(kSmall, &c) == RJ_OK);
  rj_problem* p = nullptr;
  REQUIRE(rj_problem_create(c, 1, &p) == RJ_OK);
  const int m = rj_problem_ris_elements(p);
  CHECK(m == 4);
  std::vector<double> phases(m, M_PI / 2), out(m);
  double start = 0.0, best = 0.0;
  REQUIRE(rj_problem_objective(p, phases.data(), &start) == RJ_OK);
  REQUIRE(rj_problem_optimize(p, out.data(), &best) == RJ_OK);
  CHECK(best >= start - 1e-9);
  double again = 0.0;
  REQUIRE(rj_problem_objective(p, out.data(), &again) == RJ_OK);
  CHECK(std::abs(again - best) <= 1e-9 * std::abs(best));
  CHECK(rj_problem_objective(p, nullptr, &again) == RJ_ERR_ARGUMENT);
  rj_problem_free(p);
  rj_config_free(c);
}

TEST_CASE("numeric entry points") {
  double d = 0.0;
  REQUIRE(rj_quantizer_step(3, 1.0, &d) == RJ_OK);
  CHECK(d == 0.5860);
  REQUIRE(rj_quantizer_step(1, 4.0, &d) == RJ_OK);
  CHECK(std::abs(d - 2.0 * std::sqrt(8.0 / M_PI)) < 1e-15);
  CHECK(rj_quantizer_step(0, 1.0, &d) == RJ_ERR_DOMAIN);
  CHECK(rj_quantizer_step(3, -1.0, &d) == RJ_ERR_DOMAIN);
  REQUIRE(rj_mse_optimal_step(8, &d) == RJ_OK);
  CHECK(std::abs(d - 0.0308) < 2e-4);

  std::vector<double> re(16), im(16);
  REQUIRE(rj_scattering_matrix(2, 0.25, 64, re.data(), im.data()) == RJ_OK);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(std::abs(re[i * 4 + j] - re[j * 4 + i]) < 1e-12);
      CHECK(std::abs(im[i * 4 + j] - im[j * 4 + i]) < 1e-12);
    }
  CHECK(rj_scattering_matrix(2, -1.0, 64, re.data(), im.data()) != RJ_OK);
}

TEST_CASE("runs through the C API") {
  rj_config* c = nullptr;
  REQUIRE(rj_config_parse(kSmall, &c) == RJ_OK);
  const fs::path dir = scratch("sweep");
  int rows = 0;
  REQUIRE(rj_run_sweep(c, dir.c_str(), &rows) == RJ_OK);
  CHECK(rows == 3);
  CHECK(fs::exists(dir / "pareto.csv"));
  const fs::path q = scratch("quant");
  REQUIRE(rj_run_quant_study(c, q.c_str()) == RJ_OK);
  CHECK(fs::exists(q / "quantization.csv"));
  rj_config_free(c);
  fs::remove_all(dir);
  fs::remove_all(q);
}

TEST_CASE("command line") {
  const fs::path dir = scratch("cli");
  const fs::path cfg = dir / "small.yaml";
  write(cfg, kSmall);

  CHECK(run_cli("validate") == 0);
  CHECK(run_cli_output("validate").rfind("ok", 0) == 0);
  CHECK(run_cli("validate --config " + cfg.string()) == 0);

  write(dir / "bad.yaml", "mode: mono\narrays:\n  spacing: -1\n");
  CHECK(run_cli("validate --config " + (dir / "bad.yaml").string()) == 2);
  const std::string msg = run_cli_output("validate --config " + (dir / "bad.yaml").string());
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("arrays.spacing") != std::string::npos);
  write(dir / "alpha.yaml", "optimizer:\n  alpha_grid: [0.5, -0.1]\n");
  CHECK(run_cli("validate --config " + (dir / "alpha.yaml").string()) == 2);

  CHECK(run_cli("sweep --config " + cfg.string() + " --out " + (dir / "a").string()) == 0);
  CHECK(fs::exists(dir / "a" / "pareto.csv"));
  CHECK(run_cli("sweep --config " + cfg.string() + " --out " + (dir / "b").string() +
                " --seeds 2 --threads 2 --model conv --mode bi") == 0);
  CHECK(run_cli("quant-study --config " + cfg.string() + " --out " + (dir / "q").string() + " --bits 1,8") == 0);
  CHECK(run_cli("quant-study --config " + cfg.string() + " --out " + (dir / "e").string() + " --bits \"\"") == 2);
  CHECK(run_cli("sweep --model other") == 2);
  CHECK(run_cli("frobnicate") == 2);
  fs::remove_all(dir);
}
