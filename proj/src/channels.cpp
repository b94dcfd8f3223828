#include "risjcas/channels.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "risjcas/errors.hpp"

namespace risjcas {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr char kDumpMagic[4] = {'R', 'J', 'C', 'H'};
constexpr std::uint32_t kDumpVersion = 1;
constexpr std::uint8_t kComplex64 = 1;
constexpr std::uint8_t kComplex128 = 2;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated channel dump");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod(os, static_cast<std::uint64_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  if (n > (1ULL << 32)) throw IoError("corrupt string length in channel dump");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw IoError("truncated channel dump");
  return s;
}

void write_matrix(std::ostream& os, const std::string& name, const CMatrix& m,
                  bool single) {
  write_string(os, name);
  write_pod(os, static_cast<std::int64_t>(m.rows()));
  write_pod(os, static_cast<std::int64_t>(m.cols()));
  write_pod(os, single ? kComplex64 : kComplex128);
  if (single) {
    const Eigen::MatrixXcf f = m.cast<std::complex<float>>();
    os.write(reinterpret_cast<const char*>(f.data()),
             static_cast<std::streamsize>(sizeof(std::complex<float>) * f.size()));
  } else {
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(cd) * m.size()));
  }
}

std::pair<std::string, CMatrix> read_matrix(std::istream& is) {
  std::string name = read_string(is);
  const auto rows = read_pod<std::int64_t>(is);
  const auto cols = read_pod<std::int64_t>(is);
  const auto dtype = read_pod<std::uint8_t>(is);
  if (rows < 0 || cols < 0 || rows * cols > (1LL << 28))
    throw IoError("corrupt matrix shape in channel dump");
  CMatrix m(rows, cols);
  if (dtype == kComplex64) {
    Eigen::MatrixXcf f(rows, cols);
    is.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(sizeof(std::complex<float>) * f.size()));
    m = f.cast<cd>();
  } else if (dtype == kComplex128) {
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(cd) * m.size()));
  } else {
    throw IoError("unknown payload type in channel dump");
  }
  if (!is) throw IoError("truncated channel dump");
  return {std::move(name), std::move(m)};
}

}  // namespace

void ChannelSet::validate() const {
  const Eigen::Index m = h_br.rows();
  const Eigen::Index nt = h_br.cols();
  const Eigen::Index nr = h_rb.rows();
  if (h_rb.cols() != m) throw ShapeError("h_rb must be Nr x M");
  if (h_ru.size() != m) throw ShapeError("h_ru must have M entries");
  if (h_bu.size() != nt) throw ShapeError("h_bu must have Nt entries");
  if (h_si.rows() != nr || h_si.cols() != nt)
    throw ShapeError("h_si must be Nr x Nt");
  if (!h_br.allFinite() || !h_rb.allFinite() || !h_ru.allFinite() ||
      !h_bu.allFinite() || !h_si.allFinite())
    throw ShapeError("channel set contains non-finite entries");
}

double MultipathSpec::linear_gain() const {
  return std::pow(10.0, pathloss_ref_db / 10.0) *
         std::pow(distance, -pathloss_exponent);
}

void MultipathSpec::validate() const {
  if (n_paths < 1) throw DomainError("multipath channel needs at least one path");
  if (!(distance > 0.0)) throw DomainError("link distance must be positive");
}

double distance(const Point3& a, const Point3& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

GeometryLayout colocated_layout(int nt, int nr, double pitch,
                                double separation) {
  GeometryLayout g;
  for (int q = 0; q < nt; ++q) g.tx.push_back({(q - 0.5 * (nt - 1)) * pitch, 0.0, 0.0});
  for (int p = 0; p < nr; ++p)
    g.rx.push_back({(p - 0.5 * (nr - 1)) * pitch, separation, 0.0});
  return g;
}

SteeringFn ula_steering_fn(const UlaSpec& spec) {
  return [spec](double theta, double) { return ula_steering(spec, theta); };
}

SteeringFn upa_steering_fn(const UpaSpec& spec) {
  return [spec](double theta, double psi) { return upa_steering(spec, theta, psi); };
}

SteeringFn scalar_steering_fn() {
  return [](double, double) { return CVector::Ones(1).eval(); };
}

CMatrix generate_multipath_channel(int tx_size, int rx_size,
                                   const SteeringFn& tx_steering,
                                   const SteeringFn& rx_steering,
                                   const MultipathSpec& spec) {
  if (tx_size < 1 || rx_size < 1) throw ShapeError("channel sizes must be >= 1");
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> angle(-0.5 * kPi, 0.5 * kPi);
  std::normal_distribution<double> normal(0.0, 1.0);

  CMatrix h = CMatrix::Zero(rx_size, tx_size);
  for (int l = 0; l < spec.n_paths; ++l) {
    cd beta = 1.0;
    double t_tx = 0.0, p_tx = 0.0, t_rx = 0.0, p_rx = 0.0;
    if (l > 0) {
      const double re = normal(rng);
      const double im = normal(rng);
      beta = cd(re, im) / std::sqrt(2.0);
      t_tx = angle(rng);
      p_tx = angle(rng);
      t_rx = angle(rng);
      p_rx = angle(rng);
    }
    const CVector a_tx = tx_steering(t_tx, p_tx);
    const CVector a_rx = rx_steering(t_rx, p_rx);
    if (a_tx.size() != tx_size || a_rx.size() != rx_size)
      throw ShapeError("steering function size does not match channel size");
    h += beta * a_rx * a_tx.transpose();
  }
  return std::sqrt(spec.linear_gain() / spec.n_paths) * h;
}

CMatrix self_interference_channel(const GeometryLayout& layout,
                                  double wavelength) {
  const double k = 2.0 * kPi / wavelength;
  CMatrix h(layout.rx.size(), layout.tx.size());
  for (std::size_t p = 0; p < layout.rx.size(); ++p) {
    for (std::size_t q = 0; q < layout.tx.size(); ++q) {
      const double d = distance(layout.rx[p], layout.tx[q]);
      if (!(d > 0.0))
        throw GeometryError("receive element " + std::to_string(p) +
                            " coincides with transmit element " +
                            std::to_string(q));
      const double amp = wavelength / (4.0 * kPi * d);
      h(p, q) = amp * amp * std::polar(1.0, -k * d);
    }
  }
  return h;
}

CRowVector total_comm_channel(const CVector& h_ru,
                              const EffectiveReflection& theta,
                              const CMatrix& h_br, const CVector& h_bu) {
  if (theta.theta.rows() != h_ru.size() || theta.theta.cols() != h_br.rows() ||
      h_br.cols() != h_bu.size())
    throw ShapeError("communication channel shapes do not compose");
  return h_ru.adjoint() * theta.theta * h_br + h_bu.adjoint();
}

ChannelSet generate_channel_set(const ChannelSetSpec& spec, std::uint64_t seed) {
  spec.tx.validate();
  spec.rx.validate();
  spec.ris.validate();
  const int nt = spec.tx.n_elements;
  const int nr = spec.rx.n_elements;
  const int m = spec.ris.elements();

  const auto link = [seed](MultipathSpec s, std::uint64_t salt) {
    s.rng_seed = splitmix64(seed ^ splitmix64(salt));
    return s;
  };

  ChannelSet out;
  out.h_br = generate_multipath_channel(nt, m, ula_steering_fn(spec.tx),
                                        upa_steering_fn(spec.ris),
                                        link(spec.bs_ris, 1));
  if (spec.reciprocal_ris_links) {
    if (nr > nt)
      throw ShapeError("reciprocal RIS links need Nr <= Nt");
    out.h_rb = out.h_br.transpose().topRows(nr);
  } else {
    out.h_rb = generate_multipath_channel(m, nr, upa_steering_fn(spec.ris),
                                          ula_steering_fn(spec.rx),
                                          link(spec.ris_rx, 2));
  }
  // Single-antenna user: the generated 1 x N row is h^H.
  out.h_ru = generate_multipath_channel(m, 1, upa_steering_fn(spec.ris),
                                        scalar_steering_fn(),
                                        link(spec.ris_user, 3))
                 .adjoint();
  out.h_bu = generate_multipath_channel(nt, 1, ula_steering_fn(spec.tx),
                                        scalar_steering_fn(),
                                        link(spec.bs_user, 4))
                 .adjoint();
  if (spec.layout.tx.empty() && spec.layout.rx.empty()) {
    out.h_si = CMatrix::Zero(nr, nt);
  } else {
    if (static_cast<int>(spec.layout.tx.size()) != nt ||
        static_cast<int>(spec.layout.rx.size()) != nr)
      throw ShapeError("layout element counts do not match the arrays");
    out.h_si = self_interference_channel(spec.layout, spec.tx.wavelength);
  }
  out.validate();
  return out;
}

void dump_channels(const std::filesystem::path& path, const ChannelSet& channels,
                   std::uint64_t seed, const std::string& spec_echo,
                   bool single_precision) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write channel dump " + path.string());
  os.write(kDumpMagic, 4);
  write_pod(os, kDumpVersion);
  write_pod(os, seed);
  write_string(os, spec_echo);
  write_pod(os, static_cast<std::uint32_t>(5));
  write_matrix(os, "h_br", channels.h_br, single_precision);
  write_matrix(os, "h_rb", channels.h_rb, single_precision);
  write_matrix(os, "h_ru", channels.h_ru, single_precision);
  write_matrix(os, "h_bu", channels.h_bu, single_precision);
  write_matrix(os, "h_si", channels.h_si, single_precision);
  if (!os) throw IoError("failed writing channel dump " + path.string());
}

LoadedChannels load_channels(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open channel dump " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kDumpMagic))
    throw IoError("not a channel dump: " + path.string());
  if (read_pod<std::uint32_t>(is) != kDumpVersion)
    throw IoError("unsupported channel dump version");
  LoadedChannels out;
  out.seed = read_pod<std::uint64_t>(is);
  out.spec_echo = read_string(is);
  const auto count = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, m] = read_matrix(is);
    if (name == "h_br") out.channels.h_br = std::move(m);
    else if (name == "h_rb") out.channels.h_rb = std::move(m);
    else if (name == "h_ru") out.channels.h_ru = m.col(0);
    else if (name == "h_bu") out.channels.h_bu = m.col(0);
    else if (name == "h_si") out.channels.h_si = std::move(m);
  }
  out.channels.validate();
  return out;
}

}  // namespace risjcas
