#pragma once

#include "hsi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsi {

using Rng = std::mt19937_64;

enum class StripeKind { none, random, periodic, mixed, wide_vertical };

inline std::string to_string(StripeKind k) {
  switch (k) {
    case StripeKind::none: return "none";
    case StripeKind::random: return "random";
    case StripeKind::periodic: return "periodic";
    case StripeKind::mixed: return "mixed";
    case StripeKind::wide_vertical: return "wide_vertical";
  }
  return "none";
}

inline StripeKind parse_stripe_kind(const std::string &s) {
  for (StripeKind k : {StripeKind::none, StripeKind::random, StripeKind::periodic, StripeKind::mixed,
                       StripeKind::wide_vertical}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown stripe kind '" + s + "'");
}

/// Closed interval; per-band values are drawn uniformly from it.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range &, const Range &) = default;
};

///
/// One simulated degradation scenario.
///
/// Gaussian strength is given as a variance range; each band draws its
/// variance uniformly from it. Stripe coverage is the fraction of
/// columns striped in a band.
///
struct NoiseSpec {
  int case_id = 1;
  Range gaussian_variance{0.0, 0.2};
  Range impulse_ratio{0.0, 0.2};
  StripeKind stripe_kind = StripeKind::none;
  Range stripe_coverage{0.0, 0.0};
  double stripe_amplitude = 0.25;
  double deadline_band_fraction = 0.2;
  int deadline_count_min = 1;
  int deadline_count_max = 3;
  int deadline_width_min = 1;
  int deadline_width_max = 3;
  std::uint64_t seed = 0;

  /// Canonical parameters for cases 1-6 of the benchmark protocol.
  static NoiseSpec for_case(int case_id, std::uint64_t seed = 0) {
    NoiseSpec s;
    s.case_id = case_id;
    s.seed = seed;
    switch (case_id) {
      case 1:
        break;
      case 2:
        s.gaussian_variance = {0.1, 0.1};
        s.impulse_ratio = {0.2, 0.2};
        s.stripe_kind = StripeKind::random;
        s.stripe_coverage = {0.4, 0.5};
        break;
      case 3:
        s.stripe_kind = StripeKind::random;
        s.stripe_coverage = {0.6, 0.7};
        break;
      case 4:
        s.stripe_kind = StripeKind::periodic;
        s.stripe_coverage = {0.4, 0.4};
        break;
      case 5:
        s.stripe_kind = StripeKind::mixed;
        s.stripe_coverage = {0.4, 0.4};
        break;
      case 6:
        s.stripe_kind = StripeKind::wide_vertical;
        s.stripe_coverage = {0.3, 0.3};
        break;
      default:
        throw std::invalid_argument("noise case must be 1..6, got " + std::to_string(case_id));
    }
    return s;
  }

  void validate() const {
    auto fail = [](const std::string &m) { throw std::invalid_argument("NoiseSpec: " + m); };
    if (case_id < 1 || case_id > 6) fail("case_id must be 1..6");
    auto unit = [](const Range &r) { return r.lo >= 0.0 && r.lo <= r.hi && r.hi <= 1.0; };
    if (!(gaussian_variance.lo >= 0.0 && gaussian_variance.lo <= gaussian_variance.hi &&
          std::isfinite(gaussian_variance.hi)))
      fail("gaussian variance range must satisfy 0 <= lo <= hi");
    if (!unit(impulse_ratio)) fail("impulse ratios must lie in [0, 1]");
    if (!unit(stripe_coverage)) fail("stripe coverage must lie in [0, 1]");
    if (!(stripe_amplitude >= 0.0) || !std::isfinite(stripe_amplitude)) fail("stripe amplitude must be >= 0");
    if (!(deadline_band_fraction >= 0.0 && deadline_band_fraction <= 1.0))
      fail("deadline band fraction must lie in [0, 1]");
    if (deadline_count_min < 0 || deadline_count_min > deadline_count_max) fail("bad deadline count range");
    if (deadline_width_min < 1 || deadline_width_min > deadline_width_max) fail("bad deadline width range");
  }
};

namespace detail {

inline double draw(const Range &r, Rng &rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

/// First `count` entries of a Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng &rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline void check_per_band(std::size_t values, const Dims &d, const char *what) {
  if (values != d.p) {
    throw std::invalid_argument(std::string(what) + ": expected one value per band (" +
                                std::to_string(d.p) + "), got " + std::to_string(values));
  }
}

}  // namespace detail

/// Zero-mean Gaussian field with std sigma[k] in band k.
inline Cube gaussian_field(const Dims &d, const std::vector<double> &sigma, Rng &rng) {
  detail::check_per_band(sigma.size(), d, "gaussian_field");
  Cube g(d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < d.p; ++k) {
    if (!(sigma[k] >= 0.0)) throw std::invalid_argument("gaussian_field: sigma must be >= 0");
    if (sigma[k] == 0.0) continue;
    for (double &v : g.band(k).reshaped()) v = sigma[k] * normal(rng);
  }
  return g;
}

inline Cube add_gaussian(const Cube &t, const std::vector<double> &sigma, Rng &rng) {
  return t + gaussian_field(t.dims(), sigma, rng);
}

struct MaskedNoise {
  Cube noisy;
  Cube mask;  ///< 1 where a voxel was overwritten, else 0
};

/// Salt and pepper: each voxel of band k is hit with probability ratio[k]
/// and then set to 0 or 1 with equal odds.
inline MaskedNoise apply_impulse(const Cube &t, const std::vector<double> &ratio, Rng &rng) {
  const Dims d = t.dims();
  detail::check_per_band(ratio.size(), d, "add_impulse");
  MaskedNoise out{t, Cube(d)};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t k = 0; k < d.p; ++k) {
    if (!(ratio[k] >= 0.0 && ratio[k] <= 1.0)) throw std::invalid_argument("add_impulse: ratio outside [0, 1]");
    if (ratio[k] == 0.0) continue;
    for (std::size_t j = 0; j < d.w; ++j) {
      for (std::size_t i = 0; i < d.h; ++i) {
        if (u(rng) < ratio[k]) {
          out.noisy(i, j, k) = u(rng) < 0.5 ? 0.0 : 1.0;
          out.mask(i, j, k) = 1.0;
        }
      }
    }
  }
  return out;
}

inline Cube add_impulse(const Cube &t, const std::vector<double> &ratio, Rng &rng) {
  return apply_impulse(t, ratio, rng).noisy;
}

/// Zeroes runs of whole columns in a random subset of bands.
inline MaskedNoise apply_deadlines(const Cube &t, const NoiseSpec &spec, Rng &rng) {
  const Dims d = t.dims();
  MaskedNoise out{t, Cube(d)};
  const auto n_bands = static_cast<std::size_t>(std::lround(spec.deadline_band_fraction * static_cast<double>(d.p)));
  if (n_bands == 0 || spec.deadline_count_max == 0) return out;
  for (std::size_t k : detail::sample_without_replacement(d.p, n_bands, rng)) {
    const int count = std::uniform_int_distribution<int>(spec.deadline_count_min, spec.deadline_count_max)(rng);
    for (int c = 0; c < count; ++c) {
      const auto width = std::min<std::size_t>(
          d.w, static_cast<std::size_t>(
                   std::uniform_int_distribution<int>(spec.deadline_width_min, spec.deadline_width_max)(rng)));
      const std::size_t start = std::uniform_int_distribution<std::size_t>(0, d.w - width)(rng);
      for (std::size_t j = start; j < start + width; ++j) {
        for (std::size_t i = 0; i < d.h; ++i) {
          out.noisy(i, j, k) = 0.0;
          out.mask(i, j, k) = 1.0;
        }
      }
    }
  }
  return out;
}

inline Cube add_deadlines(const Cube &t, const NoiseSpec &spec, Rng &rng) {
  return apply_deadlines(t, spec, rng).noisy;
}

struct StripeResult {
  Cube noisy;
  Cube field;  ///< additive stripe field, constant down every column
  std::vector<double> coverage;  ///< coverage drawn for each band
};

///
/// Additive column stripes, one realization per band.
///
/// random: round(c w) random columns, each biased by U[-A, A].
/// periodic: columns 0, P, 2P, ... with P = ceil(1 / c), sharing one
///   per-band bias of magnitude U[A/2, A] and random sign.
/// mixed: periodic columns at coverage c/2 plus round(c w / 2) random
///   columns drawn from the remainder.
/// wide_vertical: contiguous blocks 5-15 columns wide, one bias per
///   block, until at least round(c w) columns are covered.
///
inline StripeResult add_stripes(const Cube &t, StripeKind kind, const Range &coverage, double amplitude,
                                Rng &rng) {
  const Dims d = t.dims();
  if (!(coverage.lo >= 0.0 && coverage.lo <= coverage.hi && coverage.hi <= 1.0)) {
    throw std::invalid_argument("add_stripes: coverage must lie in [0, 1]");
  }
  StripeResult out{t, Cube(d), std::vector<double>(d.p, 0.0)};
  if (kind == StripeKind::none) return out;
  std::uniform_real_distribution<double> bias(-amplitude, amplitude);
  std::uniform_real_distribution<double> magnitude(0.5 * amplitude, amplitude);
  std::vector<double> column(d.w);

  auto periodic = [&](double c, std::vector<bool> &used) {
    if (c <= 0.0) return;
    const auto period = static_cast<std::size_t>(std::ceil(1.0 / c));
    const double a = (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5 ? -1.0 : 1.0) * magnitude(rng);
    for (std::size_t j = 0; j < d.w; j += period) {
      column[j] = a;
      used[j] = true;
    }
  };
  auto random = [&](double c, std::vector<bool> &used) {
    std::vector<std::size_t> free;
    for (std::size_t j = 0; j < d.w; ++j)
      if (!used[j]) free.push_back(j);
    const auto n = static_cast<std::size_t>(std::lround(c * static_cast<double>(d.w)));
    for (std::size_t pick : detail::sample_without_replacement(free.size(), n, rng)) {
      column[free[pick]] = bias(rng);
      used[free[pick]] = true;
    }
  };

  for (std::size_t k = 0; k < d.p; ++k) {
    const double c = detail::draw(coverage, rng);
    out.coverage[k] = c;
    std::fill(column.begin(), column.end(), 0.0);
    std::vector<bool> used(d.w, false);
    switch (kind) {
      case StripeKind::random:
        random(c, used);
        break;
      case StripeKind::periodic:
        periodic(c, used);
        break;
      case StripeKind::mixed:
        periodic(0.5 * c, used);
        random(0.5 * c, used);
        break;
      case StripeKind::wide_vertical: {
        const auto target = static_cast<std::size_t>(std::lround(c * static_cast<double>(d.w)));
        std::size_t covered = 0;
        while (covered < target) {
          const auto width = std::min<std::size_t>(d.w, std::uniform_int_distribution<std::size_t>(5, 15)(rng));
          const std::size_t start = std::uniform_int_distribution<std::size_t>(0, d.w - width)(rng);
          const double a = bias(rng);
          for (std::size_t j = start; j < start + width; ++j) {
            if (!used[j]) ++covered;
            used[j] = true;
            column[j] = a;
          }
        }
        break;
      }
      case StripeKind::none:
        break;
    }
    for (std::size_t j = 0; j < d.w; ++j) {
      if (column[j] == 0.0) continue;
      for (std::size_t i = 0; i < d.h; ++i) {
        out.field(i, j, k) = column[j];
        out.noisy(i, j, k) += column[j];
      }
    }
  }
  return out;
}

struct Simulation {
  Cube noisy;
  Cube gaussian;
  Cube impulse_mask;
  Cube stripe_field;
  Cube deadline_mask;
  std::vector<double> sigma_per_band;
  std::vector<double> impulse_per_band;
  std::vector<double> coverage_per_band;
};

///
/// Applies a case's layers in the order Gaussian, stripes, dead lines,
/// impulse. Every draw comes from one generator seeded with spec.seed.
///
inline Simulation simulate_case(const Cube &truth, const NoiseSpec &spec) {
  spec.validate();
  const Dims d = truth.dims();
  Rng rng(spec.seed);
  Simulation sim;
  sim.sigma_per_band.resize(d.p);
  sim.impulse_per_band.resize(d.p);
  for (std::size_t k = 0; k < d.p; ++k) sim.sigma_per_band[k] = std::sqrt(detail::draw(spec.gaussian_variance, rng));
  for (std::size_t k = 0; k < d.p; ++k) sim.impulse_per_band[k] = detail::draw(spec.impulse_ratio, rng);

  sim.gaussian = gaussian_field(d, sim.sigma_per_band, rng);
  Cube noisy = truth + sim.gaussian;
  StripeResult stripes = add_stripes(noisy, spec.stripe_kind, spec.stripe_coverage, spec.stripe_amplitude, rng);
  sim.stripe_field = std::move(stripes.field);
  sim.coverage_per_band = std::move(stripes.coverage);
  MaskedNoise dead = apply_deadlines(stripes.noisy, spec, rng);
  sim.deadline_mask = std::move(dead.mask);
  MaskedNoise impulse = apply_impulse(dead.noisy, sim.impulse_per_band, rng);
  sim.impulse_mask = std::move(impulse.mask);
  sim.noisy = std::move(impulse.noisy);
  return sim;
}

}  // namespace hsi
