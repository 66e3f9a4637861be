#pragma once

#include "hsi/tensor.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hsi {

/// Per-direction weights (height, width, band) of the difference operator.
struct TvWeights {
  double h = 1.0;
  double w = 1.0;
  double p = 0.5;

  void validate() const {
    if (!std::isfinite(h) || !std::isfinite(w) || !std::isfinite(p) || h < 0 || w < 0 || p < 0) {
      throw std::invalid_argument("TV weights must be finite and nonnegative");
    }
  }
};

/// Weighted differences along height (gx), width (gy) and band (gz).
struct GradientStack {
  Cube gx;
  Cube gy;
  Cube gz;

  const Dims &dims() const { return gx.dims(); }

  GradientStack &operator+=(const GradientStack &o) {
    gx += o.gx;
    gy += o.gy;
    gz += o.gz;
    return *this;
  }
  GradientStack &operator-=(const GradientStack &o) {
    gx -= o.gx;
    gy -= o.gy;
    gz -= o.gz;
    return *this;
  }
  GradientStack &operator*=(double s) {
    gx *= s;
    gy *= s;
    gz *= s;
    return *this;
  }
  friend GradientStack operator+(GradientStack a, const GradientStack &b) { return a += b; }
  friend GradientStack operator-(GradientStack a, const GradientStack &b) { return a -= b; }
  friend GradientStack operator*(GradientStack a, double s) { return a *= s; }
  friend bool operator==(const GradientStack &, const GradientStack &) = default;
};

inline GradientStack zero_stack(const Dims &d) { return {Cube(d), Cube(d), Cube(d)}; }

inline double dot(const GradientStack &a, const GradientStack &b) {
  return dot(a.gx, b.gx) + dot(a.gy, b.gy) + dot(a.gz, b.gz);
}

/// Circular forward differences, each direction scaled by its weight.
inline GradientStack diff_forward(const Cube &t, const TvWeights &wts) {
  const auto [h, w, p] = t.dims();
  GradientStack g = zero_stack(t.dims());
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t kn = (k + 1) % p;
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t jn = (j + 1) % w;
      for (std::size_t i = 0; i < h; ++i) {
        const std::size_t in = (i + 1) % h;
        const double v = t(i, j, k);
        g.gx(i, j, k) = wts.h * (t(in, j, k) - v);
        g.gy(i, j, k) = wts.w * (t(i, jn, k) - v);
        g.gz(i, j, k) = wts.p * (t(i, j, kn) - v);
      }
    }
  }
  return g;
}

/// Adjoint of diff_forward under the Euclidean inner product.
inline Cube diff_adjoint(const GradientStack &g, const TvWeights &wts) {
  const Dims d = g.gx.dims();
  if (g.gy.dims() != d || g.gz.dims() != d) {
    throw std::invalid_argument("diff_adjoint: gradient blocks have inconsistent dims");
  }
  const auto [h, w, p] = d;
  Cube t(d);
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t kp = (k + p - 1) % p;
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t jp = (j + w - 1) % w;
      for (std::size_t i = 0; i < h; ++i) {
        const std::size_t ip = (i + h - 1) % h;
        t(i, j, k) = wts.h * (g.gx(ip, j, k) - g.gx(i, j, k)) +
                     wts.w * (g.gy(i, jp, k) - g.gy(i, j, k)) +
                     wts.p * (g.gz(i, j, kp) - g.gz(i, j, k));
      }
    }
  }
  return t;
}

inline double soft_threshold(double x, double delta) {
  if (x > delta) return x - delta;
  if (x < -delta) return x + delta;
  return 0.0;
}

inline Cube soft_threshold(Cube t, double delta) {
  for (double &v : t) v = soft_threshold(v, delta);
  return t;
}

/// Below this magnitude gst_shrink returns 0 (the GST jump point).
inline double gst_threshold(double tau, double p) {
  if (p == 1.0) return tau;
  const double base = 2.0 * tau * (1.0 - p);
  return std::pow(base, 1.0 / (2.0 - p)) + tau * p * std::pow(base, (p - 1.0) / (2.0 - p));
}

namespace detail {
inline void check_exponent(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("hyper-Laplacian exponent must lie in (0, 1], got " +
                                std::to_string(p));
  }
}
}  // namespace detail

///
/// Proximal map of tau*|x|^p: argmin_x tau*|x|^p + (x - y)^2 / 2.
///
/// Generalized soft thresholding. Below gst_threshold the answer is 0;
/// above it the nonzero stationary point is found by the fixed-point
/// iteration x <- |y| - tau*p*x^(p-1) started at |y|. The iterate is
/// compared against 0 so the returned point is never worse than the
/// zero candidate.
///
inline double gst_shrink(double y, double tau, double p, int iterations = 10) {
  detail::check_exponent(p);
  if (tau < 0.0) throw std::invalid_argument("gst_shrink: tau must be nonnegative");
  if (p == 1.0) return soft_threshold(y, tau);
  const double a = std::abs(y);
  if (tau == 0.0) return y;
  if (a <= gst_threshold(tau, p)) return 0.0;
  double x = a;
  for (int it = 0; it < iterations; ++it) {
    const double next = a - tau * p * std::pow(x, p - 1.0);
    if (!(next > 0.0 && next <= a)) return 0.0;
    if (next == x) break;
    x = next;
  }
  const double f_x = tau * std::pow(x, p) + 0.5 * (x - a) * (x - a);
  const double f_0 = 0.5 * a * a;
  if (f_0 <= f_x) return 0.0;
  return std::copysign(x, y);
}

/// Exponents (p_h, p_w, p_p) of the three gradient directions.
using Exponents = std::array<double, 3>;

/// Blockwise generalized shrinkage with a shared threshold.
inline GradientStack ahsstv_prox(GradientStack g, double tau, const Exponents &p,
                                 int iterations = 10) {
  for (double e : p) detail::check_exponent(e);
  if (tau < 0.0) throw std::invalid_argument("ahsstv_prox: tau must be nonnegative");
  std::array<Cube *, 3> blocks{&g.gx, &g.gy, &g.gz};
  for (int b = 0; b < 3; ++b) {
    for (double &v : *blocks[b]) v = gst_shrink(v, tau, p[b], iterations);
  }
  return g;
}

}  // namespace hsi
