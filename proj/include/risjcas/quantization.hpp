#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "risjcas/coupling.hpp"
#include "risjcas/metrics.hpp"

namespace risjcas {

// Uniform symmetric mid-riser quantizer with 2^bits levels
// L_i = delta (i + 1/2), i = -2^(bits-1) .. 2^(bits-1) - 1. Cell i spans
// [L_i - delta/2, L_i + delta/2] except the outermost cells, which extend to
// -inf / +inf.
struct QuantizerSpec {
  int bits = 1;
  double delta = 1.0;
  std::vector<double> levels;
  std::vector<double> lower;
  std::vector<double> upper;

  int level_count() const { return static_cast<int>(levels.size()); }
};

inline constexpr int kMaxQuantizerBits = 16;

// Step size for a unit-variance Gaussian input. Tabulated for 1, 3, 4 and 8
// bits; other resolutions use the MSE-optimal uniform step.
double optimal_step(int bits);

// MSE-optimal uniform mid-riser step for a unit Gaussian, found by golden
// section on the exact distortion. Independent of the tabulated constants.
double mse_optimal_uniform_step(int bits);

// Mean squared error of the mid-riser quantizer with step `delta` on N(0,1).
double uniform_quantizer_mse(int bits, double delta);

// delta = optimal_step(bits) * sqrt(signal_variance).
// Throws UnsupportedBits outside 1..16, DomainError for variance <= 0.
QuantizerSpec build_midriser(int bits, double signal_variance);

// Index of the cell containing v (saturating).
int quantizer_cell(double v, const QuantizerSpec& spec);
double quantize(double v, const QuantizerSpec& spec);
// Real and imaginary parts quantized independently.
CVector quantize(const CVector& y, const QuantizerSpec& spec);

inline constexpr double kProbabilityFloor = 1e-300;

struct QuantizedFiResult {
  // Hermitian PSD FIM over the estimation vector (6 mono, 8 bistatic).
  CMatrix fi_matrix;
  double trace = 0.0;
  // Same quantity without quantization on the same batch.
  CMatrix unquantized_matrix;
  double unquantized_trace = 0.0;
  int floored_cells = 0;
};

// Transmit samples (Nt x n) whose sample covariance equals R exactly:
// R^{1/2} times a whitened complex Gaussian block.
CMatrix transmit_batch(const TransmitCovariance& r, int n_samples,
                       std::uint64_t seed);

// FIM of the quantized sensing signal, averaged over the batch columns. The
// noiseless mean is the sensing model plus H_SI x when include_si is set;
// noise is circular with variance noise_var_sensing (half per component).
QuantizedFiResult quantized_fim(const SensingScene& scene,
                                const SensingMatrices& mats,
                                const ChannelSet& channels,
                                const EffectiveReflection& theta,
                                const CMatrix& x_samples, bool include_si,
                                int bits);

// Variant with one fixed quantizer for every component.
QuantizedFiResult quantized_fim(const SensingScene& scene,
                                const SensingMatrices& mats,
                                const ChannelSet& channels,
                                const EffectiveReflection& theta,
                                const CMatrix& x_samples, bool include_si,
                                const QuantizerSpec& spec);

// One optimised design (per seed) to evaluate under quantization.
struct QuantStudyDesign {
  SensingScene scene;
  SensingMatrices mats;
  ChannelSet channels;
  EffectiveReflection theta;
  TransmitCovariance r;
  std::uint64_t batch_seed = 0;
};

struct QuantStudyRow {
  double noise_var = 0.0;
  int bits = 0;
  bool si = false;
  int seed_count = 0;
  double fi_trace_mean = 0.0;
  double fi_trace_std = 0.0;
};

struct QuantReferenceRow {
  double noise_var = 0.0;
  int seed_count = 0;
  double fi_trace_mean = 0.0;
  double fi_trace_std = 0.0;
};

struct QuantStudyTable {
  std::vector<QuantStudyRow> rows;            // noise-major, then bits, then si
  std::vector<QuantReferenceRow> unquantized;  // one per noise value
  int floored_cells = 0;
};

QuantStudyTable si_quantization_study(std::span<const QuantStudyDesign> designs,
                                      std::span<const double> noise_grid,
                                      std::span<const int> bits_list,
                                      const std::vector<bool>& si_modes,
                                      int n_samples = 256, int threads = 1);

double standard_normal_cdf(double x);

}  // namespace risjcas
