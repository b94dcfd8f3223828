#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "risjcas/optimizer.hpp"
#include "risjcas/quantization.hpp"

namespace risjcas {

inline constexpr const char* kVersion = "0.3.0";

struct LinkConfig {
  double distance = 25.0;  // metres
  double exponent = 2.2;
  int paths = 15;

  bool operator==(const LinkConfig&) const = default;
};

// Raw configuration as written in the file. Angles and spacings keep their
// textual form so the config echoes back unchanged; the linear block holds the
// converted values.
struct ExperimentConfig {
  std::string mode = "mono";  // mono | bi
  std::string model = "pc";   // pc | conv

  int nt = 4;
  int nr = 4;
  int ris_side = 8;
  std::string spacing = "lambda/2";  // preset or number of wavelengths
  double frequency_hz = 3.0e9;

  double power_dbm = 30.0;
  double pathloss_ref_db = -20.0;
  double noise_comm_dbm = 50.0;
  double noise_sensing_dbm = 30.0;

  LinkConfig bs_ris{25.0, 2.2, 15};
  LinkConfig ris_rx{25.0, 2.2, 15};
  LinkConfig ris_user{10.0, 2.2, 15};
  LinkConfig bs_user{40.0, 3.5, 15};

  // Angles: a number is degrees, "<a>pi/<b>" is radians.
  std::string target_angle = "0";
  std::string ris_target_angle = "0";
  std::string azimuth = "0";
  std::string aod = "2pi/3";
  std::string aoa = "0";
  std::string ris_rx_angle = "30";
  double gamma_bs_re = 1e-4, gamma_bs_im = 0.0;
  double gamma_ris_re = 1.0, gamma_ris_im = 0.0;

  std::string si_pitch = "lambda/2";
  std::string si_separation = "lambda/2";

  std::vector<double> alpha_grid = default_alpha_grid();
  double step_size = 0.5;
  int outer_iters = 30;
  int inner_cov_iters = 200;
  bool backtracking = true;
  double objective_tol = 1e-6;
  int restarts = 4;

  int seed_count = 2;
  std::uint64_t seed_base = 1;
  int threads = 1;

  std::vector<double> quant_noise_dbm = {-80, -70, -60, -50, -40, -30, -20};
  std::vector<int> quant_bits = {1, 3, 4, 8};
  std::vector<bool> quant_si = {false, true};
  double quant_alpha = 1.0;  // covariance of this weight is quantized
  int quant_samples = 256;

  int quadrature_order = kDefaultQuadratureOrder;
  std::string coupling_cache_dir;  // empty: no cache
  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

// Values after unit conversion.
struct LinearConfig {
  RadarMode mode = RadarMode::monostatic;
  ReflectionModel model = ReflectionModel::physically_consistent;
  double wavelength = 0.1;
  double spacing_m = 0.05;
  double spacing_wavelengths = 0.5;
  double power_w = 1.0;
  double pathloss_ref = 0.01;
  double noise_comm_w = 1.0;
  double noise_sensing_w = 1.0;
  double target_angle = 0.0, ris_target_angle = 0.0, azimuth = 0.0;
  double aod = 0.0, aoa = 0.0, ris_rx_angle = 0.0;
  double si_pitch_m = 0.05, si_separation_m = 0.05;
  std::vector<double> quant_noise_w;
};

double dbm_to_watts(double dbm);
double db_to_linear(double db);
// "lambda/2", "lambda/4", "lambda/8", "lambda" or a positive number, in
// wavelengths.
double parse_spacing(const std::string& text);
// Degrees for plain numbers, radians for "<a>pi/<b>" forms.
double parse_angle(const std::string& text);

// Parses YAML text. Unknown keys and bad values raise ConfigError with the
// 1-based line of the offending node.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical YAML rendering; parse_config(to_yaml(c)) == c.
std::string to_yaml(const ExperimentConfig& config);

// Checks every field; throws ConfigError naming the field.
LinearConfig validate(const ExperimentConfig& config);

// git-style blob hash of the canonical config plus the library version.
std::string manifest_hash(const ExperimentConfig& config);

ChannelSetSpec channel_spec(const ExperimentConfig& config, const LinearConfig& lin);
ArraySet array_set(const ExperimentConfig& config, const LinearConfig& lin);
SensingScene sensing_scene(const ExperimentConfig& config, const LinearConfig& lin);
OptimizerConfig optimizer_config(const ExperimentConfig& config);
ScatteringMatrix scattering_for(const ExperimentConfig& config, const LinearConfig& lin);

// Channel realisation `seed` with the configured model.
Problem build_problem(const ExperimentConfig& config, std::uint64_t seed);
Problem build_problem(const ExperimentConfig& config, const LinearConfig& lin,
                      const ScatteringMatrix& s, std::uint64_t seed);

std::vector<std::uint64_t> seed_list(const ExperimentConfig& config);

struct SweepOutput {
  std::filesystem::path pareto_csv;
  std::filesystem::path trace_csv;
  std::filesystem::path manifest;
  int rows = 0;
};

// Optimises every seed and writes pareto.csv, trace.csv and manifest.json
// into `out_dir`. A NumericalAbort writes diagnostic.txt before rethrowing.
SweepOutput run_sweep(const ExperimentConfig& config,
                      const std::filesystem::path& out_dir);

struct QuantOutput {
  std::filesystem::path csv;
  std::filesystem::path reference_csv;
  std::filesystem::path manifest;
  QuantStudyTable table;
};

// Optimises without quantization, then evaluates the quantized FI for every
// noise point, resolution and SI flag. Writes quantization.csv,
// quantization_reference.csv and manifest.json.
QuantOutput run_quantization_study(const ExperimentConfig& config,
                                   const std::filesystem::path& out_dir);

// Full-precision CSV number: 17 significant digits, scientific.
std::string format_number(double v);

}  // namespace risjcas
