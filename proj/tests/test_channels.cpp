#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "risjcas/channels.hpp"
#include "risjcas/errors.hpp"

using namespace risjcas;

namespace {

int numerical_rank(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > 1e-10 * s(0)) ++r;
  return r;
}

ChannelSetSpec small_spec() {
  ChannelSetSpec s;
  s.tx = {4, 0.05, 0.1};
  s.rx = {4, 0.05, 0.1};
  s.ris = {4, 0.025, 0.1};
  s.layout = colocated_layout(4, 4, 0.05, 0.05);
  return s;
}

}  // namespace

TEST_CASE("multipath channel rank and determinism") {
  UlaSpec tx{4, 0.05, 0.1};
  UpaSpec ris{8, 0.05, 0.1};
  MultipathSpec one;
  one.n_paths = 1;
  one.rng_seed = 3;
  CHECK(numerical_rank(generate_multipath_channel(4, 64, ula_steering_fn(tx), upa_steering_fn(ris), one)) == 1);

  MultipathSpec spec;
  spec.rng_seed = 42;
  CMatrix a = generate_multipath_channel(4, 64, ula_steering_fn(tx), upa_steering_fn(ris), spec);
  CMatrix b = generate_multipath_channel(4, 64, ula_steering_fn(tx), upa_steering_fn(ris), spec);
  CHECK((a - b).norm() == 0.0);
  spec.rng_seed = 43;
  CMatrix c = generate_multipath_channel(4, 64, ula_steering_fn(tx), upa_steering_fn(ris), spec);
  CHECK((a - c).norm() > 0.0);

  int low_rank = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    spec.rng_seed = seed;
    CMatrix h = generate_multipath_channel(4, 64, ula_steering_fn(tx), upa_steering_fn(ris), spec);
    if (numerical_rank(h) < 2) ++low_rank;
  }
  CHECK(low_rank == 0);
}

TEST_CASE("path-loss scaling of channel energy") {
  UlaSpec tx{4, 0.05, 0.1};
  UlaSpec rx{4, 0.05, 0.1};
  double e0 = 0.0, e1 = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    MultipathSpec s;
    s.rng_seed = seed;
    e0 += generate_multipath_channel(4, 4, ula_steering_fn(tx), ula_steering_fn(rx), s).squaredNorm();
    s.pathloss_ref_db += 7.0;
    e1 += generate_multipath_channel(4, 4, ula_steering_fn(tx), ula_steering_fn(rx), s).squaredNorm();
  }
  CHECK(std::abs(e1 / e0 / std::pow(10.0, 0.7) - 1.0) < 0.05);
}

TEST_CASE("self-interference channel") {
  const double lambda = 0.1;
  GeometryLayout g;
  g.tx = {{0.0, 0.0, 0.0}};
  g.rx = {{lambda / (4.0 * kPi), 0.0, 0.0}};
  CMatrix h = self_interference_channel(g, lambda);
  CHECK(std::abs(std::abs(h(0, 0)) - 1.0) < 1e-14);
  g.rx = {{10.0 * lambda / (4.0 * kPi), 0.0, 0.0}};
  CHECK(std::abs(std::abs(self_interference_channel(g, lambda)(0, 0)) - 1e-2) < 1e-16);

  const double wl = kSpeedOfLight / 3e9;
  GeometryLayout co = colocated_layout(4, 4, wl / 2, wl / 2);
  CMatrix full = self_interference_channel(co, wl);
  REQUIRE(full.rows() == 4);
  REQUIRE(full.cols() == 4);
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      const double dx = (p - q) * wl / 2, dy = wl / 2;
      const double d = std::sqrt(dx * dx + dy * dy);
      const double amp = std::pow(wl / (4.0 * kPi * d), 2);
      const cd ref = amp * cd(std::cos(2.0 * kPi * d / wl), -std::sin(2.0 * kPi * d / wl));
      CHECK(std::abs(full(p, q) - ref) < 1e-15);
    }

  GeometryLayout bad;
  bad.tx = {{1.0, 2.0, 0.0}};
  bad.rx = {{1.0, 2.0, 0.0}};
  CHECK_THROWS_AS(self_interference_channel(bad, lambda), GeometryError);
}

TEST_CASE("total communication channel") {
  std::mt19937_64 rng(5);
  const CVector h_ru = oracle::random_cvec(6, rng);
  const CMatrix h_br = oracle::random_cmat(6, 3, rng);
  const CVector h_bu = oracle::random_cvec(3, rng);

  EffectiveReflection zero{CMatrix::Zero(6, 6), ReflectionModel::conventional};
  CHECK((total_comm_channel(h_ru, zero, h_br, h_bu) - h_bu.adjoint()).norm() == 0.0);

  CVector a(1), z(1);
  a << cd(0.5, -1.0);
  z << 0.0;
  CMatrix b(1, 1);
  b << cd(2.0, 0.25);
  EffectiveReflection t1{CMatrix::Constant(1, 1, cd(0.0, 1.0)), ReflectionModel::conventional};
  CHECK(std::abs(total_comm_channel(a, t1, b, z)(0) - std::conj(a(0)) * cd(0.0, 1.0) * b(0, 0)) < 1e-15);

  EffectiveReflection t{oracle::random_cmat(6, 6, rng), ReflectionModel::physically_consistent};
  CRowVector h = total_comm_channel(h_ru, t, h_br, h_bu);
  for (int n = 0; n < 3; ++n) {
    cd acc = std::conj(h_bu(n));
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) acc += std::conj(h_ru(i)) * t.theta(i, j) * h_br(j, n);
    CHECK(std::abs(h(n) - acc) < 1e-12);
  }

  CHECK_THROWS_AS(total_comm_channel(h_ru, t, h_br, CVector::Zero(2)), ShapeError);
}

TEST_CASE("channel set generation and dump round trip") {
  ChannelSetSpec spec = small_spec();
  ChannelSet a = generate_channel_set(spec, 9);
  ChannelSet b = generate_channel_set(spec, 9);
  CHECK((a.h_br - b.h_br).norm() == 0.0);
  CHECK((a.h_ru - b.h_ru).norm() == 0.0);
  CHECK(a.m() == 16);
  CHECK(a.h_rb.rows() == 4);
  CHECK(a.h_rb.cols() == 16);

  spec.reciprocal_ris_links = true;
  ChannelSet r = generate_channel_set(spec, 9);
  CHECK((r.h_rb - r.h_br.transpose().topRows(4)).norm() == 0.0);

  const auto path = std::filesystem::temp_directory_path() / "risjcas_channels_test.bin";
  dump_channels(path, a, 9, "small spec");
  LoadedChannels back = load_channels(path);
  CHECK(back.seed == 9);
  CHECK(back.spec_echo == "small spec");
  CHECK((back.channels.h_br - a.h_br).norm() == 0.0);
  CHECK((back.channels.h_rb - a.h_rb).norm() == 0.0);
  CHECK((back.channels.h_ru - a.h_ru).norm() == 0.0);
  CHECK((back.channels.h_bu - a.h_bu).norm() == 0.0);
  CHECK((back.channels.h_si - a.h_si).norm() == 0.0);

  dump_channels(path, a, 9, "single", true);
  LoadedChannels single = load_channels(path);
  CHECK(oracle::rel_err(single.channels.h_br, a.h_br) < 1e-6);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_channels(path), IoError);
}
