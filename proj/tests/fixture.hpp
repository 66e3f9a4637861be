#pragma once

// Synthetic low-rank cube shared by the end-to-end tests.

#include "hsi/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace hsi::fixture {

inline constexpr Dims kDims{48, 48, 16};

/// Four abundance maps mixed with four smooth spectra, rescaled to [0.1, 0.9].
inline Cube low_rank_cube(const Dims &d = kDims) {
  const double h = static_cast<double>(d.h), w = static_cast<double>(d.w), p = static_cast<double>(d.p);
  auto abundance = [&](int m, std::size_t i, std::size_t j) {
    const double y = static_cast<double>(i) / h, x = static_cast<double>(j) / w;
    switch (m) {
      case 0: return 0.6 + 0.4 * std::cos(std::numbers::pi * x) * std::sin(0.5 * std::numbers::pi * y + 0.3);
      case 1: return (y > 0.15 && y < 0.45 && x > 0.2 && x < 0.7) ? 1.0 : 0.0;
      case 2: return (y > 0.55 && y < 0.85 && x > 0.5 && x < 0.9) ? 1.0 : 0.0;
      default: {
        const double dy = y - 0.65, dx = x - 0.25;
        return std::exp(-(dx * dx + dy * dy) / (2.0 * 0.08 * 0.08));
      }
    }
  };
  auto spectrum = [&](int m, std::size_t k) {
    const double t = static_cast<double>(k) / std::max(1.0, p - 1.0);
    switch (m) {
      case 0: return 0.5 + 0.3 * t;
      case 1: return 0.8 - 0.6 * t * t;
      case 2: return 0.3 + 0.5 * std::sin(std::numbers::pi * t);
      default: return 0.9 * std::exp(-8.0 * (t - 0.4) * (t - 0.4));
    }
  };
  Cube c(d);
  for (std::size_t k = 0; k < d.p; ++k)
    for (std::size_t j = 0; j < d.w; ++j)
      for (std::size_t i = 0; i < d.h; ++i) {
        double v = 0.0;
        for (int m = 0; m < 4; ++m) v += abundance(m, i, j) * spectrum(m, k);
        c(i, j, k) = v;
      }
  const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
  const double a = *lo, b = *hi;
  for (double &v : c) v = 0.1 + 0.8 * (v - a) / (b - a);
  return c;
}

}  // namespace hsi::fixture
