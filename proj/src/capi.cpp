#include "risjcas/risjcas.h"

#include <cstring>
#include <exception>
#include <string>

#include "risjcas/errors.hpp"
#include "risjcas/experiment.hpp"

struct rj_config {
  risjcas::ExperimentConfig config;
};

struct rj_problem {
  risjcas::ExperimentConfig config;
  risjcas::Problem problem;
  std::uint64_t seed = 0;
};

namespace {

thread_local std::string g_error;
thread_local int g_error_line = 0;

rj_status record(rj_status status, const std::string& msg, int line = 0) {
  g_error = msg;
  g_error_line = line;
  return status;
}

template <typename Fn>
rj_status guarded(Fn&& fn) {
  g_error.clear();
  g_error_line = 0;
  try {
    fn();
    return RJ_OK;
  } catch (const risjcas::ConfigError& e) {
    return record(RJ_ERR_CONFIG, e.what(), e.line());
  } catch (const risjcas::EmptyInput& e) {
    return record(RJ_ERR_CONFIG, e.what());
  } catch (const risjcas::UnsupportedBits& e) {
    return record(RJ_ERR_DOMAIN, e.what());
  } catch (const risjcas::NumericalAbort& e) {
    return record(RJ_ERR_NUMERICAL, e.what());
  } catch (const risjcas::SingularReflection& e) {
    return record(RJ_ERR_NUMERICAL, e.what());
  } catch (const risjcas::IoError& e) {
    return record(RJ_ERR_IO, e.what());
  } catch (const risjcas::Error& e) {
    return record(RJ_ERR_DOMAIN, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return record(RJ_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return record(RJ_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(RJ_ERR_INTERNAL, "unknown failure");
  }
}

#define RJ_REQUIRE(cond, msg) \
  if (!(cond)) return record(RJ_ERR_ARGUMENT, msg)

risjcas::OptimizerConfig problem_optimizer(const rj_problem* p) {
  risjcas::OptimizerConfig o = risjcas::optimizer_config(p->config);
  o.restart_seed = p->seed;
  return o;
}

}  // namespace

extern "C" {

const char* rj_version(void) { return risjcas::kVersion; }
const char* rj_last_error(void) { return g_error.c_str(); }
int rj_last_error_line(void) { return g_error_line; }

rj_status rj_config_default(rj_config** out) {
  RJ_REQUIRE(out, "output handle is null");
  return guarded([&] { *out = new rj_config{}; });
}

rj_status rj_config_load(const char* path, rj_config** out) {
  RJ_REQUIRE(path && out, "path or output handle is null");
  *out = nullptr;
  return guarded([&] { *out = new rj_config{risjcas::load_config(path)}; });
}

rj_status rj_config_parse(const char* yaml_text, rj_config** out) {
  RJ_REQUIRE(yaml_text && out, "text or output handle is null");
  *out = nullptr;
  return guarded([&] { *out = new rj_config{risjcas::parse_config(yaml_text)}; });
}

void rj_config_free(rj_config* config) { delete config; }

rj_status rj_config_set_seeds(rj_config* config, int count) {
  RJ_REQUIRE(config, "config is null");
  if (count < 1) return record(RJ_ERR_CONFIG, "seeds.count: must be >= 1");
  config->config.seed_count = count;
  return RJ_OK;
}

rj_status rj_config_set_threads(rj_config* config, int threads) {
  RJ_REQUIRE(config, "config is null");
  if (threads < 1) return record(RJ_ERR_CONFIG, "threads: must be >= 1");
  config->config.threads = threads;
  return RJ_OK;
}

rj_status rj_config_set_model(rj_config* config, const char* model) {
  RJ_REQUIRE(config && model, "config or model is null");
  const std::string m(model);
  if (m != "pc" && m != "conv") return record(RJ_ERR_ARGUMENT, "model: must be 'pc' or 'conv'");
  config->config.model = m;
  return RJ_OK;
}

rj_status rj_config_set_mode(rj_config* config, const char* mode) {
  RJ_REQUIRE(config && mode, "config or mode is null");
  const std::string m(mode);
  if (m != "mono" && m != "bi") return record(RJ_ERR_ARGUMENT, "mode: must be 'mono' or 'bi'");
  config->config.mode = m;
  return RJ_OK;
}

rj_status rj_config_set_bits(rj_config* config, const int* bits, size_t count) {
  RJ_REQUIRE(config && (bits || count == 0), "config or bits is null");
  if (count == 0) return record(RJ_ERR_CONFIG, "quantization.bits: must not be empty");
  config->config.quant_bits.assign(bits, bits + count);
  return RJ_OK;
}

const char* rj_config_output_dir(const rj_config* config) {
  return config ? config->config.output_dir.c_str() : "";
}

rj_status rj_config_to_yaml(const rj_config* config, char* buffer, size_t capacity,
                            size_t* needed) {
  RJ_REQUIRE(config, "config is null");
  std::string text;
  const rj_status st = guarded([&] { text = risjcas::to_yaml(config->config); });
  if (st != RJ_OK) return st;
  if (needed) *needed = text.size() + 1;
  if (!buffer) return capacity == 0 ? RJ_OK : record(RJ_ERR_ARGUMENT, "buffer is null");
  if (capacity < text.size() + 1) return record(RJ_ERR_ARGUMENT, "buffer too small");
  std::memcpy(buffer, text.c_str(), text.size() + 1);
  return RJ_OK;
}

rj_status rj_config_validate(const rj_config* config) {
  RJ_REQUIRE(config, "config is null");
  return guarded([&] { risjcas::validate(config->config); });
}

rj_status rj_config_hash(const rj_config* config, char out[41]) {
  RJ_REQUIRE(config && out, "config or output is null");
  return guarded([&] {
    const std::string h = risjcas::manifest_hash(config->config);
    std::memcpy(out, h.c_str(), 41);
  });
}

rj_status rj_run_sweep(const rj_config* config, const char* out_dir, int* rows_written) {
  RJ_REQUIRE(config && out_dir, "config or output directory is null");
  return guarded([&] {
    const risjcas::SweepOutput o = risjcas::run_sweep(config->config, out_dir);
    if (rows_written) *rows_written = o.rows;
  });
}

rj_status rj_run_quant_study(const rj_config* config, const char* out_dir) {
  RJ_REQUIRE(config && out_dir, "config or output directory is null");
  return guarded([&] { risjcas::run_quantization_study(config->config, out_dir); });
}

rj_status rj_problem_create(const rj_config* config, uint64_t seed, rj_problem** out) {
  RJ_REQUIRE(config && out, "config or output handle is null");
  *out = nullptr;
  return guarded([&] {
    auto* p = new rj_problem{config->config, {}, seed};
    try {
      p->problem = risjcas::build_problem(config->config, seed);
    } catch (...) {
      delete p;
      throw;
    }
    *out = p;
  });
}

void rj_problem_free(rj_problem* problem) { delete problem; }

int rj_problem_ris_elements(const rj_problem* problem) {
  return problem ? problem->problem.channels.m() : 0;
}

rj_status rj_problem_objective(const rj_problem* problem, const double* phases,
                               double* objective) {
  RJ_REQUIRE(problem && phases && objective, "null argument");
  return guarded([&] {
    const int m = problem->problem.channels.m();
    risjcas::CVector v(m);
    for (int i = 0; i < m; ++i) v(i) = std::polar(1.0, phases[i]);
    const risjcas::DesignEvaluation e = risjcas::evaluate_design(
        problem->problem, risjcas::project_unit_modulus(v), problem_optimizer(problem));
    *objective = e.mean_objective;
  });
}

rj_status rj_problem_optimize(const rj_problem* problem, double* phases_out,
                              double* objective) {
  RJ_REQUIRE(problem, "problem is null");
  return guarded([&] {
    const risjcas::OptimizationResult r =
        risjcas::optimize_multistart(problem->problem, problem_optimizer(problem));
    if (phases_out)
      for (int i = 0; i < r.upsilon_final.size(); ++i)
        phases_out[i] = std::arg(r.upsilon_final(i));
    if (objective) *objective = r.trajectory.back();
  });
}

rj_status rj_quantizer_step(int bits, double signal_variance, double* delta) {
  RJ_REQUIRE(delta, "output is null");
  return guarded([&] { *delta = risjcas::build_midriser(bits, signal_variance).delta; });
}

rj_status rj_mse_optimal_step(int bits, double* delta) {
  RJ_REQUIRE(delta, "output is null");
  return guarded([&] { *delta = risjcas::mse_optimal_uniform_step(bits); });
}

rj_status rj_scattering_matrix(int side, double spacing_wavelengths, int quadrature_order,
                               double* re, double* im) {
  RJ_REQUIRE(re && im, "output is null");
  return guarded([&] {
    const risjcas::UpaSpec spec{side, spacing_wavelengths, 1.0};
    const risjcas::ScatteringMatrix s = risjcas::scattering_from_coupling(
        risjcas::build_coupling_matrix(spec, quadrature_order));
    const auto n = s.s.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      re[i] = s.s.data()[i].real();
      im[i] = s.s.data()[i].imag();
    }
  });
}

}  // extern "C"
