#include "risjcas/experiment.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include "json.hpp"
#include <regex>
#include <set>
#include <sstream>

#include "risjcas/errors.hpp"
#include "risjcas/parallel.hpp"

namespace risjcas {

namespace {

using LineOf = std::function<int(const std::string&)>;

[[noreturn]] void fail(const LineOf& line_of, const std::string& field,
                       const std::string& msg) {
  throw ConfigError(field + ": " + msg, line_of ? line_of(field) : 0);
}

int line(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

class Reader {
 public:
  explicit Reader(std::map<std::string, int>& lines) : lines_(lines) {}

  // Visits a mapping, rejecting keys outside `known`.
  void map(const YAML::Node& node, const std::string& prefix,
           const std::set<std::string>& known,
           const std::function<void(const std::string&, const YAML::Node&)>& fn) {
    if (!node.IsMap()) throw ConfigError(label(prefix) + "expected a mapping", line(node));
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      const std::string field = prefix.empty() ? key : prefix + "." + key;
      if (!known.count(key)) throw ConfigError(field + ": unknown key", line(kv.first));
      lines_[field] = line(kv.second);
      fn(field, kv.second);
    }
  }

  template <typename T>
  static T as(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) throw ConfigError(field + ": expected a scalar", line(n));
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(field + ": invalid value '" + n.Scalar() + "'", line(n));
    }
  }

  template <typename T>
  static std::vector<T> list(const YAML::Node& n, const std::string& field) {
    if (!n.IsSequence()) throw ConfigError(field + ": expected a list", line(n));
    std::vector<T> out;
    for (const auto& e : n) out.push_back(as<T>(e, field));
    return out;
  }

  static std::string text(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) throw ConfigError(field + ": expected a scalar", line(n));
    return n.Scalar();
  }

 private:
  static std::string label(const std::string& p) { return p.empty() ? "" : p + ": "; }
  std::map<std::string, int>& lines_;
};

void read_link(Reader& rd, const YAML::Node& n, const std::string& prefix,
               LinkConfig& l) {
  rd.map(n, prefix, {"distance", "exponent", "paths"},
         [&](const std::string& f, const YAML::Node& v) {
           if (f.ends_with(".distance")) l.distance = Reader::as<double>(v, f);
           else if (f.ends_with(".exponent")) l.exponent = Reader::as<double>(v, f);
           else l.paths = Reader::as<int>(v, f);
         });
}

void read_gain(const YAML::Node& v, const std::string& f, double& re, double& im) {
  const std::vector<double> g = Reader::list<double>(v, f);
  if (g.size() != 2) throw ConfigError(f + ": expected [re, im]", line(v));
  re = g[0];
  im = g[1];
}

LinearConfig validate_impl(const ExperimentConfig& c, const LineOf& at) {
  LinearConfig lin;
  if (c.mode == "mono") lin.mode = RadarMode::monostatic;
  else if (c.mode == "bi") lin.mode = RadarMode::bistatic;
  else fail(at, "mode", "must be 'mono' or 'bi'");
  if (c.model == "pc") lin.model = ReflectionModel::physically_consistent;
  else if (c.model == "conv") lin.model = ReflectionModel::conventional;
  else fail(at, "model", "must be 'pc' or 'conv'");

  if (c.nt < 1) fail(at, "arrays.nt", "must be >= 1");
  if (c.nr < 1) fail(at, "arrays.nr", "must be >= 1");
  if (lin.mode == RadarMode::monostatic && c.nr > c.nt)
    fail(at, "arrays.nr", "monostatic reciprocal links need nr <= nt");
  if (c.ris_side < 1) fail(at, "arrays.ris_side", "must be >= 1");
  if (!(c.frequency_hz > 0.0) || !std::isfinite(c.frequency_hz))
    fail(at, "frequency_hz", "must be positive");
  lin.wavelength = kSpeedOfLight / c.frequency_hz;

  const auto spacing = [&](const std::string& field, const std::string& text) {
    double v = 0.0;
    try {
      v = parse_spacing(text);
    } catch (const Error& e) {
      fail(at, field, e.what());
    }
    if (!(v > 0.0)) fail(at, field, "must be positive");
    return v;
  };
  lin.spacing_wavelengths = spacing("arrays.spacing", c.spacing);
  lin.spacing_m = lin.spacing_wavelengths * lin.wavelength;
  lin.si_pitch_m = spacing("self_interference.pitch", c.si_pitch) * lin.wavelength;
  lin.si_separation_m =
      spacing("self_interference.separation", c.si_separation) * lin.wavelength;

  const auto finite = [&](const std::string& field, double v) {
    if (!std::isfinite(v)) fail(at, field, "must be finite");
    return v;
  };
  lin.power_w = dbm_to_watts(finite("power_dbm", c.power_dbm));
  lin.pathloss_ref = db_to_linear(finite("pathloss_ref_db", c.pathloss_ref_db));
  lin.noise_comm_w = dbm_to_watts(finite("noise.comm_dbm", c.noise_comm_dbm));
  lin.noise_sensing_w = dbm_to_watts(finite("noise.sensing_dbm", c.noise_sensing_dbm));

  const std::pair<const char*, const LinkConfig*> links[] = {
      {"links.bs_ris", &c.bs_ris},
      {"links.ris_rx", &c.ris_rx},
      {"links.ris_user", &c.ris_user},
      {"links.bs_user", &c.bs_user}};
  for (const auto& [name, l] : links) {
    const std::string n(name);
    if (!(l->distance > 0.0) || !std::isfinite(l->distance))
      fail(at, n + ".distance", "must be positive");
    if (!(l->exponent >= 0.0) || !std::isfinite(l->exponent))
      fail(at, n + ".exponent", "must be non-negative");
    if (l->paths < 1) fail(at, n + ".paths", "must be >= 1");
  }

  const auto angle = [&](const std::string& field, const std::string& text) {
    try {
      return parse_angle(text);
    } catch (const Error& e) {
      fail(at, field, e.what());
    }
  };
  lin.target_angle = angle("target.angle", c.target_angle);
  lin.ris_target_angle = angle("target.ris_angle", c.ris_target_angle);
  lin.azimuth = angle("target.azimuth", c.azimuth);
  lin.aod = angle("bistatic.aod", c.aod);
  lin.aoa = angle("bistatic.aoa", c.aoa);
  lin.ris_rx_angle = angle("bistatic.ris_rx_angle", c.ris_rx_angle);
  const double ris_angle =
      lin.mode == RadarMode::monostatic ? lin.ris_target_angle : lin.ris_target_angle;
  if (std::abs(std::cos(ris_angle)) < kAngleEpsilon)
    fail(at, "target.ris_angle", "end-fire RIS angle has no derivative");
  finite("target.gamma_bs", c.gamma_bs_re + c.gamma_bs_im);
  finite("target.gamma_ris", c.gamma_ris_re + c.gamma_ris_im);

  if (c.alpha_grid.empty()) fail(at, "optimizer.alpha_grid", "must not be empty");
  for (double a : c.alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) fail(at, "optimizer.alpha_grid", "weights must lie in [0, 1]");
  if (!(c.step_size > 0.0)) fail(at, "optimizer.step_size", "must be positive");
  if (c.outer_iters < 0) fail(at, "optimizer.outer_iters", "must be >= 0");
  if (c.inner_cov_iters < 1) fail(at, "optimizer.inner_cov_iters", "must be >= 1");
  if (!(c.objective_tol >= 0.0)) fail(at, "optimizer.objective_tol", "must be >= 0");
  if (c.restarts < 1) fail(at, "optimizer.restarts", "must be >= 1");

  if (c.seed_count < 1) fail(at, "seeds.count", "must be >= 1");
  if (c.threads < 1) fail(at, "threads", "must be >= 1");

  if (c.quant_noise_dbm.empty()) fail(at, "quantization.noise_dbm", "must not be empty");
  for (double v : c.quant_noise_dbm)
    lin.quant_noise_w.push_back(dbm_to_watts(finite("quantization.noise_dbm", v)));
  if (c.quant_bits.empty()) fail(at, "quantization.bits", "must not be empty");
  for (int b : c.quant_bits)
    if (b < 1 || b > kMaxQuantizerBits) fail(at, "quantization.bits", "resolutions must be 1..16");
  if (c.quant_si.empty()) fail(at, "quantization.si", "must not be empty");
  if (c.quant_samples < c.nt) fail(at, "quantization.samples", "must be >= nt");
  if (!(c.quant_alpha >= 0.0 && c.quant_alpha <= 1.0))
    fail(at, "quantization.alpha", "must lie in [0, 1]");
  bool found = false;
  for (double a : c.alpha_grid) found = found || std::abs(a - c.quant_alpha) < 1e-12;
  if (!found) fail(at, "quantization.alpha", "must be one of the alpha grid weights");

  if (c.quadrature_order < 2) fail(at, "coupling.quadrature_order", "must be >= 2");
  if (c.output_dir.empty()) fail(at, "output_dir", "must not be empty");
  return lin;
}

std::string sha1_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw IoError("SHA-1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  os << text;
  if (!os) throw IoError("failed writing " + p.string());
}

std::string model_name(ReflectionModel m) {
  return m == ReflectionModel::physically_consistent ? "pc" : "conv";
}

nlohmann::json linear_json(const LinearConfig& l) {
  nlohmann::json j;
  j["mode"] = l.mode == RadarMode::monostatic ? "mono" : "bi";
  j["model"] = model_name(l.model);
  j["wavelength_m"] = l.wavelength;
  j["spacing_m"] = l.spacing_m;
  j["spacing_wavelengths"] = l.spacing_wavelengths;
  j["power_w"] = l.power_w;
  j["pathloss_ref"] = l.pathloss_ref;
  j["noise_comm_w"] = l.noise_comm_w;
  j["noise_sensing_w"] = l.noise_sensing_w;
  j["target_angle_rad"] = l.target_angle;
  j["ris_target_angle_rad"] = l.ris_target_angle;
  j["azimuth_rad"] = l.azimuth;
  j["aod_rad"] = l.aod;
  j["aoa_rad"] = l.aoa;
  j["ris_rx_angle_rad"] = l.ris_rx_angle;
  j["si_pitch_m"] = l.si_pitch_m;
  j["si_separation_m"] = l.si_separation_m;
  j["quant_noise_w"] = l.quant_noise_w;
  return j;
}

void write_manifest(const std::filesystem::path& p, const std::string& command,
                    const ExperimentConfig& c, const LinearConfig& lin,
                    const std::vector<std::uint64_t>& seeds) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config_hash"] = manifest_hash(c);
  j["config_yaml"] = to_yaml(c);
  j["linear"] = linear_json(lin);
  j["seeds"] = seeds;
  write_text(p, j.dump(2) + "\n");
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <typename Fn>
void with_diagnostic(const std::filesystem::path& out_dir, Fn&& fn) {
  try {
    fn();
  } catch (const NumericalAbort& e) {
    write_text(out_dir / "diagnostic.txt", std::string("numerical abort: ") + e.what() + "\n");
    throw;
  }
}

}  // namespace

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double parse_spacing(const std::string& text) {
  static const std::regex preset(R"(^\s*lambda\s*(/\s*([0-9]*\.?[0-9]+))?\s*$)");
  std::smatch m;
  if (std::regex_match(text, m, preset)) {
    if (!m[2].matched) return 1.0;
    const double div = std::stod(m[2].str());
    if (!(div > 0.0)) throw DomainError("spacing divisor must be positive");
    return 1.0 / div;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw DomainError("spacing '" + text + "' is neither a preset nor a number");
  }
  if (used != text.size()) throw DomainError("spacing '" + text + "' has trailing characters");
  return v;
}

double parse_angle(const std::string& text) {
  static const std::regex pi_form(
      R"(^\s*(-?)\s*([0-9]*\.?[0-9]*)\s*pi\s*(/\s*([0-9]*\.?[0-9]+))?\s*$)");
  std::smatch m;
  if (std::regex_match(text, m, pi_form)) {
    double v = m[2].length() ? std::stod(m[2].str()) : 1.0;
    if (m[4].matched) {
      const double div = std::stod(m[4].str());
      if (div == 0.0) throw DomainError("angle divisor is zero");
      v /= div;
    }
    return (m[1].length() ? -1.0 : 1.0) * v * kPi;
  }
  std::size_t used = 0;
  double deg = 0.0;
  try {
    deg = std::stod(text, &used);
  } catch (const std::exception&) {
    throw DomainError("angle '" + text + "' is not a number or a pi expression");
  }
  if (used != text.size() || !std::isfinite(deg))
    throw DomainError("angle '" + text + "' is not a number or a pi expression");
  return deg * kPi / 180.0;
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("syntax error: ") + e.msg, e.mark.line + 1);
  }
  ExperimentConfig c;
  std::map<std::string, int> lines;
  if (root.IsNull()) {
    validate(c);
    return c;
  }
  Reader rd(lines);
  using N = const YAML::Node&;
  using S = const std::string&;
  rd.map(root, "",
         {"mode", "model", "frequency_hz", "power_dbm", "pathloss_ref_db", "threads",
          "output_dir", "arrays", "noise", "links", "target", "bistatic",
          "self_interference", "optimizer", "seeds", "quantization", "coupling"},
         [&](S f, N v) {
           if (f == "mode") c.mode = Reader::text(v, f);
           else if (f == "model") c.model = Reader::text(v, f);
           else if (f == "frequency_hz") c.frequency_hz = Reader::as<double>(v, f);
           else if (f == "power_dbm") c.power_dbm = Reader::as<double>(v, f);
           else if (f == "pathloss_ref_db") c.pathloss_ref_db = Reader::as<double>(v, f);
           else if (f == "threads") c.threads = Reader::as<int>(v, f);
           else if (f == "output_dir") c.output_dir = Reader::text(v, f);
           else if (f == "arrays")
             rd.map(v, f, {"nt", "nr", "ris_side", "spacing"}, [&](S g, N w) {
               if (g == "arrays.nt") c.nt = Reader::as<int>(w, g);
               else if (g == "arrays.nr") c.nr = Reader::as<int>(w, g);
               else if (g == "arrays.ris_side") c.ris_side = Reader::as<int>(w, g);
               else c.spacing = Reader::text(w, g);
             });
           else if (f == "noise")
             rd.map(v, f, {"comm_dbm", "sensing_dbm"}, [&](S g, N w) {
               if (g == "noise.comm_dbm") c.noise_comm_dbm = Reader::as<double>(w, g);
               else c.noise_sensing_dbm = Reader::as<double>(w, g);
             });
           else if (f == "links")
             rd.map(v, f, {"bs_ris", "ris_rx", "ris_user", "bs_user"}, [&](S g, N w) {
               if (g == "links.bs_ris") read_link(rd, w, g, c.bs_ris);
               else if (g == "links.ris_rx") read_link(rd, w, g, c.ris_rx);
               else if (g == "links.ris_user") read_link(rd, w, g, c.ris_user);
               else read_link(rd, w, g, c.bs_user);
             });
           else if (f == "target")
             rd.map(v, f, {"angle", "ris_angle", "azimuth", "gamma_bs", "gamma_ris"},
                    [&](S g, N w) {
                      if (g == "target.angle") c.target_angle = Reader::text(w, g);
                      else if (g == "target.ris_angle") c.ris_target_angle = Reader::text(w, g);
                      else if (g == "target.azimuth") c.azimuth = Reader::text(w, g);
                      else if (g == "target.gamma_bs") read_gain(w, g, c.gamma_bs_re, c.gamma_bs_im);
                      else read_gain(w, g, c.gamma_ris_re, c.gamma_ris_im);
                    });
           else if (f == "bistatic")
             rd.map(v, f, {"aod", "aoa", "ris_rx_angle"}, [&](S g, N w) {
               if (g == "bistatic.aod") c.aod = Reader::text(w, g);
               else if (g == "bistatic.aoa") c.aoa = Reader::text(w, g);
               else c.ris_rx_angle = Reader::text(w, g);
             });
           else if (f == "self_interference")
             rd.map(v, f, {"pitch", "separation"}, [&](S g, N w) {
               if (g == "self_interference.pitch") c.si_pitch = Reader::text(w, g);
               else c.si_separation = Reader::text(w, g);
             });
           else if (f == "optimizer")
             rd.map(v, f,
                    {"alpha_grid", "step_size", "outer_iters", "inner_cov_iters",
                     "backtracking", "objective_tol", "restarts"},
                    [&](S g, N w) {
                      if (g == "optimizer.alpha_grid") c.alpha_grid = Reader::list<double>(w, g);
                      else if (g == "optimizer.step_size") c.step_size = Reader::as<double>(w, g);
                      else if (g == "optimizer.outer_iters") c.outer_iters = Reader::as<int>(w, g);
                      else if (g == "optimizer.inner_cov_iters") c.inner_cov_iters = Reader::as<int>(w, g);
                      else if (g == "optimizer.backtracking") c.backtracking = Reader::as<bool>(w, g);
                      else if (g == "optimizer.objective_tol") c.objective_tol = Reader::as<double>(w, g);
                      else c.restarts = Reader::as<int>(w, g);
                    });
           else if (f == "seeds")
             rd.map(v, f, {"count", "base"}, [&](S g, N w) {
               if (g == "seeds.count") c.seed_count = Reader::as<int>(w, g);
               else c.seed_base = Reader::as<std::uint64_t>(w, g);
             });
           else if (f == "quantization")
             rd.map(v, f, {"noise_dbm", "bits", "si", "samples", "alpha"}, [&](S g, N w) {
               if (g == "quantization.noise_dbm") c.quant_noise_dbm = Reader::list<double>(w, g);
               else if (g == "quantization.bits") c.quant_bits = Reader::list<int>(w, g);
               else if (g == "quantization.si") c.quant_si = Reader::list<bool>(w, g);
               else if (g == "quantization.samples") c.quant_samples = Reader::as<int>(w, g);
               else c.quant_alpha = Reader::as<double>(w, g);
             });
           else if (f == "coupling")
             rd.map(v, f, {"quadrature_order", "cache_dir"}, [&](S g, N w) {
               if (g == "coupling.quadrature_order") c.quadrature_order = Reader::as<int>(w, g);
               else c.coupling_cache_dir = Reader::text(w, g);
             });
         });
  validate_impl(c, [&](const std::string& field) {
    auto it = lines.find(field);
    return it == lines.end() ? 0 : it->second;
  });
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(slurp(path));
}

std::string to_yaml(const ExperimentConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  const auto link = [&](const char* name, const LinkConfig& l) {
    e << YAML::Key << name << YAML::Value << YAML::Flow << YAML::BeginMap
      << YAML::Key << "distance" << YAML::Value << l.distance
      << YAML::Key << "exponent" << YAML::Value << l.exponent
      << YAML::Key << "paths" << YAML::Value << l.paths << YAML::EndMap;
  };
  const auto pair = [&](const char* name, double re, double im) {
    e << YAML::Key << name << YAML::Value << YAML::Flow << YAML::BeginSeq << re << im
      << YAML::EndSeq;
  };
  const auto str = [&](const char* name, const std::string& s) {
    e << YAML::Key << name << YAML::Value << YAML::DoubleQuoted << s;
  };
  e << YAML::BeginMap;
  str("mode", c.mode);
  str("model", c.model);
  e << YAML::Key << "frequency_hz" << YAML::Value << c.frequency_hz;
  e << YAML::Key << "power_dbm" << YAML::Value << c.power_dbm;
  e << YAML::Key << "pathloss_ref_db" << YAML::Value << c.pathloss_ref_db;
  e << YAML::Key << "threads" << YAML::Value << c.threads;
  str("output_dir", c.output_dir);

  e << YAML::Key << "arrays" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "nt" << YAML::Value << c.nt;
  e << YAML::Key << "nr" << YAML::Value << c.nr;
  e << YAML::Key << "ris_side" << YAML::Value << c.ris_side;
  str("spacing", c.spacing);
  e << YAML::EndMap;

  e << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "comm_dbm" << YAML::Value << c.noise_comm_dbm;
  e << YAML::Key << "sensing_dbm" << YAML::Value << c.noise_sensing_dbm;
  e << YAML::EndMap;

  e << YAML::Key << "links" << YAML::Value << YAML::BeginMap;
  link("bs_ris", c.bs_ris);
  link("ris_rx", c.ris_rx);
  link("ris_user", c.ris_user);
  link("bs_user", c.bs_user);
  e << YAML::EndMap;

  e << YAML::Key << "target" << YAML::Value << YAML::BeginMap;
  str("angle", c.target_angle);
  str("ris_angle", c.ris_target_angle);
  str("azimuth", c.azimuth);
  pair("gamma_bs", c.gamma_bs_re, c.gamma_bs_im);
  pair("gamma_ris", c.gamma_ris_re, c.gamma_ris_im);
  e << YAML::EndMap;

  e << YAML::Key << "bistatic" << YAML::Value << YAML::BeginMap;
  str("aod", c.aod);
  str("aoa", c.aoa);
  str("ris_rx_angle", c.ris_rx_angle);
  e << YAML::EndMap;

  e << YAML::Key << "self_interference" << YAML::Value << YAML::BeginMap;
  str("pitch", c.si_pitch);
  str("separation", c.si_separation);
  e << YAML::EndMap;

  e << YAML::Key << "optimizer" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "alpha_grid" << YAML::Value << YAML::Flow << c.alpha_grid;
  e << YAML::Key << "step_size" << YAML::Value << c.step_size;
  e << YAML::Key << "outer_iters" << YAML::Value << c.outer_iters;
  e << YAML::Key << "inner_cov_iters" << YAML::Value << c.inner_cov_iters;
  e << YAML::Key << "backtracking" << YAML::Value << c.backtracking;
  e << YAML::Key << "objective_tol" << YAML::Value << c.objective_tol;
  e << YAML::Key << "restarts" << YAML::Value << c.restarts;
  e << YAML::EndMap;

  e << YAML::Key << "seeds" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "count" << YAML::Value << c.seed_count;
  e << YAML::Key << "base" << YAML::Value << c.seed_base;
  e << YAML::EndMap;

  e << YAML::Key << "quantization" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "noise_dbm" << YAML::Value << YAML::Flow << c.quant_noise_dbm;
  e << YAML::Key << "bits" << YAML::Value << YAML::Flow << c.quant_bits;
  e << YAML::Key << "si" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (bool b : c.quant_si) e << b;
  e << YAML::EndSeq;
  e << YAML::Key << "samples" << YAML::Value << c.quant_samples;
  e << YAML::Key << "alpha" << YAML::Value << c.quant_alpha;
  e << YAML::EndMap;

  e << YAML::Key << "coupling" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "quadrature_order" << YAML::Value << c.quadrature_order;
  str("cache_dir", c.coupling_cache_dir);
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

LinearConfig validate(const ExperimentConfig& config) {
  return validate_impl(config, nullptr);
}

std::string manifest_hash(const ExperimentConfig& config) {
  const std::string content = to_yaml(config) + "version: " + kVersion + "\n";
  return sha1_hex("blob " + std::to_string(content.size()) + std::string(1, '\0') + content);
}

ArraySet array_set(const ExperimentConfig& c, const LinearConfig& lin) {
  const double half = 0.5 * lin.wavelength;
  ArraySet a;
  a.tx = UlaSpec{c.nt, half, lin.wavelength};
  a.rx = UlaSpec{c.nr, half, lin.wavelength};
  a.ris = UpaSpec{c.ris_side, lin.spacing_m, lin.wavelength};
  return a;
}

ChannelSetSpec channel_spec(const ExperimentConfig& c, const LinearConfig& lin) {
  const ArraySet a = array_set(c, lin);
  const auto link = [&](const LinkConfig& l) {
    MultipathSpec m;
    m.n_paths = l.paths;
    m.pathloss_ref_db = c.pathloss_ref_db;
    m.distance = l.distance;
    m.pathloss_exponent = l.exponent;
    return m;
  };
  ChannelSetSpec s;
  s.tx = a.tx;
  s.rx = a.rx;
  s.ris = a.ris;
  s.bs_ris = link(c.bs_ris);
  s.ris_rx = link(c.ris_rx);
  s.ris_user = link(c.ris_user);
  s.bs_user = link(c.bs_user);
  if (lin.mode == RadarMode::monostatic) {
    s.reciprocal_ris_links = true;
    s.layout = colocated_layout(c.nt, c.nr, lin.si_pitch_m, lin.si_separation_m);
  }
  return s;
}

SensingScene sensing_scene(const ExperimentConfig& c, const LinearConfig& lin) {
  SensingScene s;
  s.mode = lin.mode;
  s.theta_bs = lin.target_angle;
  s.theta_ris = lin.ris_target_angle;
  s.phi_tx = lin.aod;
  s.phi_rx = lin.aoa;
  s.phi_ris = lin.ris_target_angle;
  s.phi_ris_rx = lin.ris_rx_angle;
  s.psi = lin.azimuth;
  s.gamma_bs = cd(c.gamma_bs_re, c.gamma_bs_im);
  s.gamma_ris = cd(c.gamma_ris_re, c.gamma_ris_im);
  s.noise_var_sensing = lin.noise_sensing_w;
  s.noise_var_comm = lin.noise_comm_w;
  return s;
}

OptimizerConfig optimizer_config(const ExperimentConfig& c) {
  OptimizerConfig o;
  o.alpha_grid = c.alpha_grid;
  o.step_size = c.step_size;
  o.outer_iters = c.outer_iters;
  o.inner_cov_iters = c.inner_cov_iters;
  o.backtracking = c.backtracking;
  o.objective_tol = c.objective_tol;
  o.restarts = c.restarts;
  o.threads = 1;
  return o;
}

ScatteringMatrix scattering_for(const ExperimentConfig& c, const LinearConfig& lin) {
  const UpaSpec ris = array_set(c, lin).ris;
  CouplingMatrix b;
  if (c.coupling_cache_dir.empty()) {
    b = build_coupling_matrix(ris, c.quadrature_order);
  } else {
    std::filesystem::create_directories(c.coupling_cache_dir);
    char name[128];
    std::snprintf(name, sizeof name, "coupling_%d_%.17g_%.17g_%d.bin", ris.side,
                  ris.spacing, ris.wavelength, c.quadrature_order);
    b = cached_coupling_matrix(std::filesystem::path(c.coupling_cache_dir) / name, ris,
                               c.quadrature_order);
  }
  return scattering_from_coupling(b);
}

Problem build_problem(const ExperimentConfig& c, const LinearConfig& lin,
                      const ScatteringMatrix& s, std::uint64_t seed) {
  Problem p;
  p.scene = sensing_scene(c, lin);
  p.mats = build_sensing_matrices(p.scene, array_set(c, lin));
  p.channels = generate_channel_set(channel_spec(c, lin), seed);
  p.s = s;
  p.model = lin.model;
  p.power = lin.power_w;
  return p;
}

Problem build_problem(const ExperimentConfig& c, std::uint64_t seed) {
  const LinearConfig lin = validate(c);
  return build_problem(c, lin, scattering_for(c, lin), seed);
}

std::vector<std::uint64_t> seed_list(const ExperimentConfig& c) {
  std::vector<std::uint64_t> out;
  for (int k = 0; k < c.seed_count; ++k) out.push_back(c.seed_base + static_cast<std::uint64_t>(k));
  return out;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

SweepOutput run_sweep(const ExperimentConfig& c, const std::filesystem::path& out_dir) {
  const LinearConfig lin = validate(c);
  std::filesystem::create_directories(out_dir);
  const ScatteringMatrix s = scattering_for(c, lin);
  const OptimizerConfig opt = optimizer_config(c);
  const std::vector<std::uint64_t> seeds = seed_list(c);
  std::vector<OptimizationResult> results(seeds.size());

  with_diagnostic(out_dir, [&] {
    parallel_for(static_cast<int>(seeds.size()), c.threads, [&](int k) {
      const Problem p = build_problem(c, lin, s, seeds[k]);
      OptimizerConfig o = opt;
      o.restart_seed = mix(seeds[k]);
      try {
        results[k] = optimize_multistart(p, o);
      } catch (const NumericalAbort& e) {
        throw NumericalAbort("seed " + std::to_string(seeds[k]) + ": " + e.what());
      }
    });
  });

  SweepOutput out;
  out.pareto_csv = out_dir / "pareto.csv";
  out.trace_csv = out_dir / "trace.csv";
  out.manifest = out_dir / "manifest.json";
  const std::string model = c.model, mode = c.mode;
  const std::string m = std::to_string(c.ris_side * c.ris_side);
  const std::string spacing = format_number(lin.spacing_wavelengths);

  std::ostringstream pareto;
  pareto << "alpha,fi_trace,mi,model,mode,M,spacing,seed\n";
  std::ostringstream trace;
  trace << "seed,iteration,alpha,objective,fi_trace,mi,step\n";
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    for (const ParetoPoint& pt : results[k].pareto_points) {
      pareto << format_number(pt.alpha) << ',' << format_number(pt.fi_trace) << ','
             << format_number(pt.mi) << ',' << model << ',' << mode << ',' << m << ','
             << spacing << ',' << seeds[k] << '\n';
      ++out.rows;
    }
    for (const TraceRecord& t : results[k].trace)
      trace << seeds[k] << ',' << t.iteration << ',' << format_number(t.alpha) << ','
            << format_number(t.objective) << ',' << format_number(t.fi) << ','
            << format_number(t.mi) << ',' << format_number(t.step) << '\n';
  }
  write_text(out.pareto_csv, pareto.str());
  write_text(out.trace_csv, trace.str());
  write_manifest(out.manifest, "sweep", c, lin, seeds);
  return out;
}

QuantOutput run_quantization_study(const ExperimentConfig& c,
                                   const std::filesystem::path& out_dir) {
  const LinearConfig lin = validate(c);
  std::filesystem::create_directories(out_dir);
  const ScatteringMatrix s = scattering_for(c, lin);
  const OptimizerConfig opt = optimizer_config(c);
  const std::vector<std::uint64_t> seeds = seed_list(c);
  std::size_t alpha_index = 0;
  for (std::size_t i = 0; i < c.alpha_grid.size(); ++i)
    if (std::abs(c.alpha_grid[i] - c.quant_alpha) < 1e-12) alpha_index = i;

  std::vector<QuantStudyDesign> designs(seeds.size());
  with_diagnostic(out_dir, [&] {
    parallel_for(static_cast<int>(seeds.size()), c.threads, [&](int k) {
      const Problem p = build_problem(c, lin, s, seeds[k]);
      OptimizerConfig o = opt;
      o.restart_seed = mix(seeds[k]);
      OptimizationResult r;
      try {
        r = optimize_multistart(p, o);
      } catch (const NumericalAbort& e) {
        throw NumericalAbort("seed " + std::to_string(seeds[k]) + ": " + e.what());
      }
      QuantStudyDesign& d = designs[k];
      d.scene = p.scene;
      d.mats = p.mats;
      d.channels = p.channels;
      d.theta = p.reflect(r.upsilon_final);
      d.r = r.rx_per_alpha[alpha_index];
      d.batch_seed = mix(seeds[k] ^ 0x51ULL);
    });
  });

  QuantOutput out;
  out.table = si_quantization_study(designs, lin.quant_noise_w, c.quant_bits, c.quant_si,
                                    c.quant_samples, c.threads);
  out.csv = out_dir / "quantization.csv";
  out.reference_csv = out_dir / "quantization_reference.csv";
  out.manifest = out_dir / "manifest.json";
  std::ostringstream q;
  q << "noise_var,bits,si_flag,seed_count,fi_trace_mean,fi_trace_std\n";
  for (const QuantStudyRow& r : out.table.rows)
    q << format_number(r.noise_var) << ',' << r.bits << ',' << (r.si ? 1 : 0) << ','
      << r.seed_count << ',' << format_number(r.fi_trace_mean) << ','
      << format_number(r.fi_trace_std) << '\n';
  std::ostringstream ref;
  ref << "noise_var,seed_count,fi_trace_mean,fi_trace_std\n";
  for (const QuantReferenceRow& r : out.table.unquantized)
    ref << format_number(r.noise_var) << ',' << r.seed_count << ','
        << format_number(r.fi_trace_mean) << ',' << format_number(r.fi_trace_std) << '\n';
  write_text(out.csv, q.str());
  write_text(out.reference_csv, ref.str());
  write_manifest(out.manifest, "quant-study", c, lin, seeds);
  return out;
}

}  // namespace risjcas
