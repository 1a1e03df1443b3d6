#pragma once

// Run configuration: INI-style "key = value" under [sections], parsed with
// boost::property_tree and written back with 17 significant digits so that
// parse(serialize(c)) == c.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "tmf/dynamics.hpp"
#include "tmf/noise.hpp"

namespace tmf {

/// Invalid configuration; `key` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what) : Error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  // [grid]
  int n = 2;
  int m = 32;
  // [noise]
  int K = 4;
  double s = 3.0;
  // [model]
  Variant variant = Variant::v1_hamiltonian;
  double eta = 0.05;
  // [time]
  double dt = 5e-4;
  double T = 0.25;
  int output_every = 50;
  // [ensemble]
  int particles = 64;
  std::uint64_t seed = 1;
  // [initial]
  std::string initial = "taylor_green";
  int band = 4;
  double amplitude = 1.0;
  std::uint64_t initial_seed = 7;
  // [loop]
  double loop_x = std::numbers::pi / 2;
  double loop_y = std::numbers::pi / 2;
  double loop_z = std::numbers::pi;
  double loop_radius = 0.5;
  int loop_points = 512;
  int audit_seeds = 8;
  // [picard]
  int picard_iterations = 6;
  double picard_damping = 1.0;
  // [output]
  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

inline std::string format_double(double x) { return fmt::format("{:.17g}", x); }

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"grid", {"n", "m"}},
      {"noise", {"K", "s"}},
      {"model", {"variant", "eta"}},
      {"time", {"dt", "T", "output_every"}},
      {"ensemble", {"particles", "seed"}},
      {"initial", {"kind", "band", "amplitude", "seed"}},
      {"loop", {"x", "y", "z", "radius", "points", "seeds"}},
      {"picard", {"iterations", "damping"}},
      {"output", {"dir"}},
  };
  return schema;
}

template <class T>
T parse_value(const std::string& key, const std::string& text);

template <>
inline double parse_value<double>(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  if (pos != text.size() || !std::isfinite(v)) throw ConfigError(key, "expected a finite number, got '" + text + "'");
  return v;
}

template <>
inline long long parse_value<long long>(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  }
  if (pos != text.size()) throw ConfigError(key, "expected an integer, got '" + text + "'");
  return v;
}

template <>
inline std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& text) {
  if (text.empty() || text[0] == '-') throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  }
  if (pos != text.size()) throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  return v;
}

inline int parse_int(const std::string& key, const std::string& text) {
  const auto v = parse_value<long long>(key, text);
  if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(key, "integer out of range");
  return static_cast<int>(v);
}

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace detail

/// Checks every invariant; throws ConfigError naming the first bad key.
inline void validate(const RunConfig& c) {
  if (c.n != 2 && c.n != 3) throw ConfigError("grid.n", "must be 2 or 3");
  if (c.m < 8 || !detail::is_power_of_two(c.m)) throw ConfigError("grid.m", "must be a power of two >= 8");
  if (c.K < 1) throw ConfigError("noise.K", "must be >= 1");
  if (!(c.s > 1.0 + c.n / 2.0)) throw ConfigError("noise.s", "must exceed 1 + n/2");
  if (!(c.eta > 0.0)) throw ConfigError("model.eta", "must be positive");
  if (!(c.dt > 0.0)) throw ConfigError("time.dt", "must be positive");
  if (!(c.T > 0.0)) throw ConfigError("time.T", "must be positive");
  if (c.output_every < 1) throw ConfigError("time.output_every", "must be >= 1");
  if (c.particles < 1) throw ConfigError("ensemble.particles", "must be >= 1");
  if (c.initial != "taylor_green" && c.initial != "random_band" && c.initial != "zero") {
    throw ConfigError("initial.kind", "must be taylor_green, random_band or zero");
  }
  if (c.band < 1 || c.band > c.m / 3) throw ConfigError("initial.band", "must lie in [1, m/3]");
  if (!(c.amplitude >= 0.0)) throw ConfigError("initial.amplitude", "must be non-negative");
  if (!(c.loop_radius > 0.0) || c.loop_radius >= std::numbers::pi) throw ConfigError("loop.radius", "must lie in (0, pi)");
  if (c.loop_points < 64) throw ConfigError("loop.points", "must be >= 64");
  if (c.audit_seeds < 1) throw ConfigError("loop.seeds", "must be >= 1");
  if (c.picard_iterations < 1) throw ConfigError("picard.iterations", "must be >= 1");
  if (!(c.picard_damping > 0.0 && c.picard_damping <= 1.0)) throw ConfigError("picard.damping", "must lie in (0, 1]");
  if (c.output_dir.empty()) throw ConfigError("output.dir", "must not be empty");
}

inline RunConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  const auto& schema = detail::config_schema();
  std::map<std::string, std::string> kv;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(section, "keys must live inside a [section]");
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError(section, "unknown section");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError(section + "." + key, "unknown key");
      kv[section + "." + key] = value.data();
    }
  }
  RunConfig c;
  auto take = [&](const std::string& key, auto& field) {
    const auto it = kv.find(key);
    if (it == kv.end()) return;
    using F = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<F, int>) {
      field = detail::parse_int(key, it->second);
    } else if constexpr (std::is_same_v<F, double>) {
      field = detail::parse_value<double>(key, it->second);
    } else if constexpr (std::is_same_v<F, std::uint64_t>) {
      field = detail::parse_value<std::uint64_t>(key, it->second);
    } else if constexpr (std::is_same_v<F, std::string>) {
      field = it->second;
    }
  };
  take("grid.n", c.n);
  take("grid.m", c.m);
  take("noise.K", c.K);
  take("noise.s", c.s);
  if (auto it = kv.find("model.variant"); it != kv.end()) {
    try {
      c.variant = parse_variant(it->second);
    } catch (const Error&) {
      throw ConfigError("model.variant", "must be V1_HAMILTONIAN, V2_PROJECTED or H17_RAW, got '" + it->second + "'");
    }
  }
  take("model.eta", c.eta);
  take("time.dt", c.dt);
  take("time.T", c.T);
  take("time.output_every", c.output_every);
  take("ensemble.particles", c.particles);
  take("ensemble.seed", c.seed);
  take("initial.kind", c.initial);
  take("initial.band", c.band);
  take("initial.amplitude", c.amplitude);
  take("initial.seed", c.initial_seed);
  take("loop.x", c.loop_x);
  take("loop.y", c.loop_y);
  take("loop.z", c.loop_z);
  take("loop.radius", c.loop_radius);
  take("loop.points", c.loop_points);
  take("loop.seeds", c.audit_seeds);
  take("picard.iterations", c.picard_iterations);
  take("picard.damping", c.picard_damping);
  take("output.dir", c.output_dir);
  validate(c);
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  return parse_config(in);
}

inline std::string serialize(const RunConfig& c) {
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  out += "[grid]\n";
  line("n", std::to_string(c.n));
  line("m", std::to_string(c.m));
  out += "\n[noise]\n";
  line("K", std::to_string(c.K));
  line("s", format_double(c.s));
  out += "\n[model]\n";
  line("variant", to_string(c.variant));
  line("eta", format_double(c.eta));
  out += "\n[time]\n";
  line("dt", format_double(c.dt));
  line("T", format_double(c.T));
  line("output_every", std::to_string(c.output_every));
  out += "\n[ensemble]\n";
  line("particles", std::to_string(c.particles));
  line("seed", std::to_string(c.seed));
  out += "\n[initial]\n";
  line("kind", c.initial);
  line("band", std::to_string(c.band));
  line("amplitude", format_double(c.amplitude));
  line("seed", std::to_string(c.initial_seed));
  out += "\n[loop]\n";
  line("x", format_double(c.loop_x));
  line("y", format_double(c.loop_y));
  line("z", format_double(c.loop_z));
  line("radius", format_double(c.loop_radius));
  line("points", std::to_string(c.loop_points));
  line("seeds", std::to_string(c.audit_seeds));
  out += "\n[picard]\n";
  line("iterations", std::to_string(c.picard_iterations));
  line("damping", format_double(c.picard_damping));
  out += "\n[output]\n";
  line("dir", c.output_dir);
  return out;
}

inline std::shared_ptr<const BasisTruncation> make_basis(const RunConfig& c) {
  return std::make_shared<BasisTruncation>(c.n, c.K, c.s);
}

inline ModelVariant make_model(const RunConfig& c) { return ModelVariant(c.variant, c.eta, make_basis(c)); }

/// The config followed by the derived quantities, as a comment-free INI.
inline std::string resolved_config(const RunConfig& c) {
  const auto model = make_model(c);
  std::string out = serialize(c);
  out += "\n[derived]\n";
  out += "nu = " + format_double(model.nu()) + "\n";
  out += "c_K = " + format_double(model.basis().effective_constant()) + "\n";
  out += "eps_K = " + format_double(model.basis().anisotropy()) + "\n";
  out += "noise_fields = " + std::to_string(model.basis().size()) + "\n";
  out += "dealias_cutoff = " + std::to_string(GridSpec(c.n, c.m).dealias_cutoff()) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Initial conditions
// ---------------------------------------------------------------------------

inline SpectralField taylor_green_field(const GridSpec& g, double amplitude = 1.0) {
  auto f = VectorField::sample(g, [&](const Point& x) {
    if (g.dim() == 2) return Point{amplitude * std::sin(x[0]) * std::cos(x[1]), -amplitude * std::cos(x[0]) * std::sin(x[1]), 0.0};
    return Point{amplitude * std::sin(x[0]) * std::cos(x[1]) * std::cos(x[2]),
                 -amplitude * std::cos(x[0]) * std::sin(x[1]) * std::cos(x[2]), 0.0};
  });
  return dft_forward(f);
}

/// Random solenoidal field with |k_j| <= band, spectrum ~ 1/(1+|k|^2), energy
/// 1/2 amplitude^2 (2 pi)^n. Draws come from the counter RNG so the field is
/// identical on every platform.
inline SpectralField random_band_field(const GridSpec& g, int band, double amplitude, std::uint64_t seed) {
  const NoiseStream rng(seed);
  SpectralField s(g, g.dim());
  for (std::size_t slot = 0; slot < g.modes(); ++slot) {
    const auto k = g.mode_wavevector(slot);
    bool inside = true;
    for (int d = 0; d < g.dim(); ++d) inside &= std::abs(k[d]) <= band;
    const double k2 = norm_squared(k, g.dim());
    if (!inside || k2 == 0.0) continue;
    const double decay = 1.0 / (1.0 + k2);
    for (int c = 0; c < g.dim(); ++c) {
      const auto a = static_cast<std::uint32_t>(2 * c);
      s.component(c)[slot] = decay * Complex(rng.normal(slot, a, 0), rng.normal(slot, a + 1, 0));
    }
  }
  // Round trip through samples makes the half spectrum Hermitian-consistent.
  s = dft_forward(dft_inverse(s));
  dealias(s);
  leray_project_inplace(s);
  const double e = spectral_inner(s, s);
  if (e > 0.0) s *= amplitude * std::sqrt(std::pow(two_pi, g.dim()) / e);
  return s;
}

inline SpectralField initial_condition(const RunConfig& c) {
  const GridSpec g(c.n, c.m);
  if (c.initial == "taylor_green") return taylor_green_field(g, c.amplitude);
  if (c.initial == "random_band") return random_band_field(g, c.band, c.amplitude, c.initial_seed);
  return SpectralField(g, c.n);
}

}  // namespace tmf
