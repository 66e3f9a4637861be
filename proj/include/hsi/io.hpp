#pragma once

#include "hsi/metrics.hpp"
#include "hsi/noise.hpp"
#include "hsi/solver.hpp"
#include "hsi/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hsi {

static_assert(std::endian::native == std::endian::little, "cube files assume a little-endian host");

/// Failure to read or write a file, or a malformed file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kCubeMagic = "HSICUBE1";
inline constexpr std::size_t kCubeHeaderBytes = 8 + 3 * 4;

///
/// Reads an HSICUBE1 file: 8-byte magic, h, w, p as little-endian u32,
/// then h*w*p little-endian float32 values with the height index fastest.
///
inline Cube read_cube(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::array<char, kCubeHeaderBytes> header{};
  in.read(header.data(), header.size());
  if (static_cast<std::size_t>(in.gcount()) != header.size()) {
    throw IoError(path.string() + ": truncated header (" + std::to_string(in.gcount()) + " of " +
                  std::to_string(header.size()) + " bytes)");
  }
  if (std::string_view(header.data(), 8) != kCubeMagic) throw IoError(path.string() + ": bad magic, not an HSICUBE1 file");
  std::array<std::uint32_t, 3> dims{};
  std::memcpy(dims.data(), header.data() + 8, 12);
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) {
    throw IoError(path.string() + ": zero dimension in header (" + std::to_string(dims[0]) + "x" +
                  std::to_string(dims[1]) + "x" + std::to_string(dims[2]) + ")");
  }
  const Dims d{dims[0], dims[1], dims[2]};
  const std::size_t expected = d.size() * sizeof(float);
  std::vector<float> payload(d.size());
  in.read(reinterpret_cast<char *>(payload.data()), static_cast<std::streamsize>(expected));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != expected) {
    throw IoError(path.string() + ": truncated payload, expected " + std::to_string(expected) + " bytes, got " +
                  std::to_string(got));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(path.string() + ": trailing bytes after " + std::to_string(expected) + "-byte payload");
  }
  std::vector<double> values(payload.begin(), payload.end());
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (!std::isfinite(values[n])) throw IoError(path.string() + ": non-finite value at index " + std::to_string(n));
  }
  return Cube(d, std::move(values));
}

/// Writes a cube as float32; values must be finite after narrowing.
inline void write_cube(const std::filesystem::path &path, const Cube &cube) {
  const Dims d = cube.dims();
  const auto max_dim = static_cast<std::size_t>(std::numeric_limits<std::uint32_t>::max());
  if (d.h > max_dim || d.w > max_dim || d.p > max_dim) throw IoError("cube too large for the file format");
  std::vector<float> payload(cube.size());
  for (std::size_t n = 0; n < cube.size(); ++n) {
    payload[n] = static_cast<float>(cube[n]);
    if (!std::isfinite(payload[n])) {
      throw IoError("refusing to write non-finite value at index " + std::to_string(n) + " to '" + path.string() + "'");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::array<std::uint32_t, 3> dims{static_cast<std::uint32_t>(d.h), static_cast<std::uint32_t>(d.w),
                                          static_cast<std::uint32_t>(d.p)};
  out.write(kCubeMagic.data(), 8);
  out.write(reinterpret_cast<const char *>(dims.data()), 12);
  out.write(reinterpret_cast<const char *>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// Per-band min-max rescaling to [0, 1]; constant bands become 0.
inline Cube normalize_bands(Cube c) {
  for (std::size_t k = 0; k < c.dims().p; ++k) {
    auto band = c.band(k);
    const double lo = band.minCoeff(), hi = band.maxCoeff();
    if (hi > lo) {
      band = (band.array() - lo) / (hi - lo);
    } else {
      band.setZero();
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// key = value documents

/// Ordered key/value pairs; keys are unique.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

///
/// Parses lines of the form `key = value`. Blank lines and lines whose
/// first non-blank character is '#' are skipped. Duplicate keys and lines
/// without '=' are errors.
///
inline KeyValues parse_key_values(std::istream &in, const std::string &origin = "<input>") {
  KeyValues kv;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw std::invalid_argument(where + ": expected key = value");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw std::invalid_argument(where + ": empty key");
    if (!seen.insert(key).second) throw std::invalid_argument(where + ": duplicate key '" + key + "'");
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

inline KeyValues read_key_values(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return parse_key_values(in, path.string());
}

inline void write_key_values(std::ostream &out, const KeyValues &kv) {
  for (const auto &[k, v] : kv) out << k << " = " << v << '\n';
}

inline void write_key_values(const std::filesystem::path &path, const KeyValues &kv) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_key_values(out, kv);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline double parse_double(const std::string &key, const std::string &text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw std::invalid_argument("'" + key + "': expected a finite number, got '" + text + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string &key, const std::string &text) {
  Int v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("'" + key + "': expected an integer, got '" + text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string &key, const std::string &text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("'" + key + "': expected true or false, got '" + text + "'");
}

inline std::vector<std::string> split_list(const std::string &text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <std::size_t N>
std::array<double, N> parse_doubles(const std::string &key, const std::string &text) {
  const auto parts = split_list(text);
  if (parts.size() != N) {
    throw std::invalid_argument("'" + key + "': expected " + std::to_string(N) + " comma-separated numbers");
  }
  std::array<double, N> out{};
  for (std::size_t n = 0; n < N; ++n) out[n] = parse_double(key, parts[n]);
  return out;
}

inline TuckerRanks parse_ranks(const std::string &key, const std::string &text) {
  const auto parts = split_list(text);
  if (parts.size() != 3) throw std::invalid_argument("'" + key + "': expected three comma-separated ranks");
  return {parse_int<std::size_t>(key, parts[0]), parse_int<std::size_t>(key, parts[1]),
          parse_int<std::size_t>(key, parts[2])};
}

template <typename T>
std::string join(const T &values) {
  std::string s;
  for (const auto &v : values) {
    if (!s.empty()) s += ',';
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
      s += format_double(v);
    } else {
      s += std::to_string(v);
    }
  }
  return s;
}

inline std::string join_ranks(const TuckerRanks &r) { return join(std::array<std::size_t, 3>{r.r1, r.r2, r.r3}); }

/// Applies a handler per key; keys without a handler are rejected.
template <typename Handlers>
void dispatch(const KeyValues &kv, const Handlers &handlers, const std::string &what) {
  for (const auto &[key, value] : kv) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw std::invalid_argument("unknown " + what + " key '" + key + "'");
    it->second(value);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Solver configuration

/// Every solver key with its effective value; unset ranks are written as "auto".
inline KeyValues to_key_values(const SolverConfig &c) {
  return {
      {"lambda1", format_double(c.lambda1)},
      {"lambda2", format_double(c.lambda2)},
      {"beta0", format_double(c.beta0)},
      {"beta_max", format_double(c.beta_max)},
      {"beta_growth", format_double(c.beta_growth)},
      {"weight_h", format_double(c.weights.h)},
      {"weight_w", format_double(c.weights.w)},
      {"weight_p", format_double(c.weights.p)},
      {"ranks_x", c.ranks_x ? detail::join_ranks(*c.ranks_x) : "auto"},
      {"ranks_b", c.ranks_b ? detail::join_ranks(*c.ranks_b) : "auto"},
      {"epsilon", format_double(c.epsilon)},
      {"k_max", std::to_string(c.k_max)},
      {"p_override", c.p_override ? detail::join(*c.p_override) : "auto"},
      {"model_stripes", c.model_stripes ? "true" : "false"},
      {"hooi_max_iter", std::to_string(c.hooi_max_iter)},
      {"hooi_tol", format_double(c.hooi_tol)},
      {"gst_iterations", std::to_string(c.gst_iterations)},
  };
}

///
/// Builds a SolverConfig from key/value pairs over the defaults.
/// Unknown keys are rejected and the result is validated.
///
inline SolverConfig solver_config_from(const KeyValues &kv) {
  SolverConfig c;
  using Handler = std::function<void(const std::string &)>;
  auto num = [](const char *key, double &field) {
    return std::pair<const std::string, Handler>{key, [key, &field](const std::string &v) { field = detail::parse_double(key, v); }};
  };
  auto integer = [](const char *key, int &field) {
    return std::pair<const std::string, Handler>{key, [key, &field](const std::string &v) { field = detail::parse_int<int>(key, v); }};
  };
  auto ranks = [](const char *key, std::optional<TuckerRanks> &field) {
    return std::pair<const std::string, Handler>{key, [key, &field](const std::string &v) {
      if (v == "auto") {
        field.reset();
      } else {
        field = detail::parse_ranks(key, v);
      }
    }};
  };
  const std::map<std::string, Handler> handlers{
      num("lambda1", c.lambda1),
      num("lambda2", c.lambda2),
      num("beta0", c.beta0),
      num("beta_max", c.beta_max),
      num("beta_growth", c.beta_growth),
      num("weight_h", c.weights.h),
      num("weight_w", c.weights.w),
      num("weight_p", c.weights.p),
      ranks("ranks_x", c.ranks_x),
      ranks("ranks_b", c.ranks_b),
      num("epsilon", c.epsilon),
      integer("k_max", c.k_max),
      {"p_override",
       [&c](const std::string &v) {
         if (v == "auto") {
           c.p_override.reset();
         } else {
           c.p_override = detail::parse_doubles<3>("p_override", v);
         }
       }},
      {"model_stripes", [&c](const std::string &v) { c.model_stripes = detail::parse_bool("model_stripes", v); }},
      integer("hooi_max_iter", c.hooi_max_iter),
      num("hooi_tol", c.hooi_tol),
      integer("gst_iterations", c.gst_iterations),
  };
  detail::dispatch(kv, handlers, "solver config");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Noise parameters

inline KeyValues to_key_values(const NoiseSpec &s) {
  auto range = [](const Range &r) { return format_double(r.lo) + "," + format_double(r.hi); };
  return {
      {"case_id", std::to_string(s.case_id)},
      {"gaussian_variance", range(s.gaussian_variance)},
      {"impulse_ratio", range(s.impulse_ratio)},
      {"stripe_kind", to_string(s.stripe_kind)},
      {"stripe_coverage", range(s.stripe_coverage)},
      {"stripe_amplitude", format_double(s.stripe_amplitude)},
      {"deadline_band_fraction", format_double(s.deadline_band_fraction)},
      {"deadline_count", std::to_string(s.deadline_count_min) + "," + std::to_string(s.deadline_count_max)},
      {"deadline_width", std::to_string(s.deadline_width_min) + "," + std::to_string(s.deadline_width_max)},
      {"seed", std::to_string(s.seed)},
  };
}

///
/// Builds a NoiseSpec from key/value pairs. When case_id is present the
/// case defaults are loaded first and the remaining keys override them.
///
inline NoiseSpec noise_spec_from(const KeyValues &kv) {
  NoiseSpec s;
  for (const auto &[k, v] : kv) {
    if (k == "case_id") s = NoiseSpec::for_case(detail::parse_int<int>(k, v));
  }
  using Handler = std::function<void(const std::string &)>;
  auto range = [](const char *key, Range &field) {
    return std::pair<const std::string, Handler>{key, [key, &field](const std::string &v) {
      const auto r = detail::parse_doubles<2>(key, v);
      field = {r[0], r[1]};
    }};
  };
  auto int_pair = [](const char *key, int &lo, int &hi) {
    return std::pair<const std::string, Handler>{key, [key, &lo, &hi](const std::string &v) {
      const auto parts = detail::split_list(v);
      if (parts.size() != 2) throw std::invalid_argument(std::string("'") + key + "': expected two integers");
      lo = detail::parse_int<int>(key, parts[0]);
      hi = detail::parse_int<int>(key, parts[1]);
    }};
  };
  const std::map<std::string, Handler> handlers{
      {"case_id", [](const std::string &) {}},
      range("gaussian_variance", s.gaussian_variance),
      range("impulse_ratio", s.impulse_ratio),
      {"stripe_kind", [&s](const std::string &v) { s.stripe_kind = parse_stripe_kind(v); }},
      range("stripe_coverage", s.stripe_coverage),
      {"stripe_amplitude",
       [&s](const std::string &v) { s.stripe_amplitude = detail::parse_double("stripe_amplitude", v); }},
      {"deadline_band_fraction",
       [&s](const std::string &v) { s.deadline_band_fraction = detail::parse_double("deadline_band_fraction", v); }},
      int_pair("deadline_count", s.deadline_count_min, s.deadline_count_max),
      int_pair("deadline_width", s.deadline_width_min, s.deadline_width_max),
      {"seed", [&s](const std::string &v) { s.seed = detail::parse_int<std::uint64_t>("seed", v); }},
  };
  detail::dispatch(kv, handlers, "noise config");
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Run configuration: solver and noise keys in one file

struct RunConfig {
  SolverConfig solver;
  NoiseSpec noise;
};

inline bool is_noise_key(const std::string &key) {
  static const std::set<std::string> keys = [] {
    std::set<std::string> s;
    for (const auto &[k, v] : to_key_values(NoiseSpec{})) s.insert(k);
    return s;
  }();
  return keys.count(key) > 0;
}

inline bool is_solver_key(const std::string &key) {
  static const std::set<std::string> keys = [] {
    std::set<std::string> s;
    for (const auto &[k, v] : to_key_values(SolverConfig{})) s.insert(k);
    return s;
  }();
  return keys.count(key) > 0;
}

/// Splits a mixed document into solver and noise keys; anything else is rejected.
inline RunConfig run_config_from(const KeyValues &kv) {
  KeyValues solver, noise;
  for (const auto &entry : kv) (is_noise_key(entry.first) ? noise : solver).push_back(entry);
  return {solver_config_from(solver), noise_spec_from(noise)};
}

inline RunConfig read_run_config(const std::filesystem::path &path) { return run_config_from(read_key_values(path)); }

// ---------------------------------------------------------------------------
// Simulation manifest

inline constexpr std::string_view kDrawnPrefix = "drawn.";

/// NoiseSpec keys followed by the per-band values drawn by the simulator.
inline KeyValues simulation_manifest(const NoiseSpec &spec, const Simulation &sim) {
  KeyValues kv = to_key_values(spec);
  kv.emplace_back("drawn.sigma", detail::join(sim.sigma_per_band));
  kv.emplace_back("drawn.impulse_ratio", detail::join(sim.impulse_per_band));
  kv.emplace_back("drawn.stripe_coverage", detail::join(sim.coverage_per_band));
  return kv;
}

/// Recovers the NoiseSpec from a manifest; the drawn.* entries are informational.
inline NoiseSpec noise_spec_from_manifest(const KeyValues &kv) {
  KeyValues spec;
  for (const auto &entry : kv) {
    if (!entry.first.starts_with(kDrawnPrefix)) spec.push_back(entry);
  }
  return noise_spec_from(spec);
}

// ---------------------------------------------------------------------------
// CSV outputs

/// iter,rel_change,beta with one row per outer iteration (1-based).
inline void write_diagnostics_csv(std::ostream &out, const SolveDiagnostics &d) {
  out << "iter,rel_change,beta\n";
  for (std::size_t n = 0; n < d.rel_change_history.size(); ++n) {
    out << n + 1 << ',' << format_double(d.rel_change_history[n]) << ',' << format_double(d.beta_history[n]) << '\n';
  }
}

/// Per-band rows `band,psnr,ssim` then a `mean,<mpsnr>,<mssim>` line.
inline void write_metrics_csv(std::ostream &out, const MetricsReport &r) {
  out << "band,psnr,ssim\n";
  for (std::size_t k = 0; k < r.psnr_per_band.size(); ++k) {
    out << k << ',' << format_double(r.psnr_per_band[k]) << ',' << format_double(r.ssim_per_band[k]) << '\n';
  }
  out << "mean," << format_double(r.mpsnr) << ',' << format_double(r.mssim) << '\n';
}

}  // namespace hsi
