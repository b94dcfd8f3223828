#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "risjcas/array_geometry.hpp"
#include "risjcas/coupling.hpp"
#include "risjcas/types.hpp"

namespace risjcas {

// All propagation matrices of one realisation.
//   h_br: M x Nt   BS -> RIS
//   h_rb: Nr x M   RIS -> receive array
//   h_ru: M        RIS -> user (the link enters as h_ru^H)
//   h_bu: Nt       BS -> user (enters as h_bu^H)
//   h_si: Nr x Nt  transmit -> receive leakage
struct ChannelSet {
  CMatrix h_br;
  CMatrix h_rb;
  CVector h_ru;
  CVector h_bu;
  CMatrix h_si;

  int nt() const { return static_cast<int>(h_br.cols()); }
  int nr() const { return static_cast<int>(h_rb.rows()); }
  int m() const { return static_cast<int>(h_br.rows()); }
  // Throws ShapeError on inconsistent dimensions or non-finite entries.
  void validate() const;
};

struct MultipathSpec {
  int n_paths = 15;
  double pathloss_ref_db = -20.0;  // C0 at 1 m
  double distance = 25.0;          // metres
  double pathloss_exponent = 2.2;
  std::uint64_t rng_seed = 0;

  // rho = C0 * distance^-exponent, linear.
  double linear_gain() const;
  void validate() const;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

double distance(const Point3& a, const Point3& b);

struct GeometryLayout {
  std::vector<Point3> tx;
  std::vector<Point3> rx;
  std::vector<Point3> ris;
  Point3 user;
  Point3 target;
};

// Transmit and receive ULAs on parallel lines: elements centred on x = 0 at
// `pitch`, receive line offset by `separation` along y.
GeometryLayout colocated_layout(int nt, int nr, double pitch, double separation);

// Array response as a function of (elevation, azimuth).
using SteeringFn = std::function<CVector(double theta, double psi)>;

SteeringFn ula_steering_fn(const UlaSpec& spec);
SteeringFn upa_steering_fn(const UpaSpec& spec);
// Single-antenna terminal: always [1].
SteeringFn scalar_steering_fn();

// H = sqrt(rho/L) sum_l beta_l rx(angle_l) tx(angle'_l)^T, rx_size x tx_size.
// Path 0 is a unit-gain line-of-sight path at broadside; the other paths have
// CN(0,1) gains and angles uniform on (-pi/2, pi/2). Deterministic in the seed.
CMatrix generate_multipath_channel(int tx_size, int rx_size,
                                   const SteeringFn& tx_steering,
                                   const SteeringFn& rx_steering,
                                   const MultipathSpec& spec);

// h(p,q) = (lambda / (4 pi d))^2 exp(-j 2 pi d / lambda) for receive element p
// and transmit element q. Throws GeometryError on coincident elements.
CMatrix self_interference_channel(const GeometryLayout& layout,
                                  double wavelength);

// h^H = h_ru^H Theta H_br + h_bu^H.
CRowVector total_comm_channel(const CVector& h_ru,
                              const EffectiveReflection& theta,
                              const CMatrix& h_br, const CVector& h_bu);

struct ChannelSetSpec {
  UlaSpec tx;
  UlaSpec rx;
  UpaSpec ris;
  MultipathSpec bs_ris;
  MultipathSpec ris_rx;
  MultipathSpec ris_user;
  MultipathSpec bs_user;
  // Force H_rb to the first Nr rows of H_br^T.
  bool reciprocal_ris_links = false;
  GeometryLayout layout;
};

// Generates every link; per-link seeds are derived from `seed`.
ChannelSet generate_channel_set(const ChannelSetSpec& spec, std::uint64_t seed);

// Self-describing binary container: magic, version, seed, spec echo text, then
// named matrices with shape and a complex64/complex128 payload.
void dump_channels(const std::filesystem::path& path, const ChannelSet& channels,
                   std::uint64_t seed, const std::string& spec_echo,
                   bool single_precision = false);

struct LoadedChannels {
  ChannelSet channels;
  std::uint64_t seed = 0;
  std::string spec_echo;
};

LoadedChannels load_channels(const std::filesystem::path& path);

}  // namespace risjcas
