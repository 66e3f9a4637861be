#pragma once

#include "hsi/priors.hpp"
#include "hsi/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsi {

/// Normalized histogram on a uniform grid symmetric about zero.
///
/// Bin b has center (b - (n-1)/2) * width with width = 2 * half_range / n,
/// so the middle bin is centered on 0.
struct Histogram {
  double half_range = 1.0;
  std::vector<double> masses;

  std::size_t bins() const { return masses.size(); }
  double width() const { return 2.0 * half_range / static_cast<double>(masses.size()); }
  double center(std::size_t b) const {
    return (static_cast<double>(b) - static_cast<double>(masses.size() - 1) / 2.0) * width();
  }
  double edge(std::size_t b) const { return center(b) - width() / 2.0; }
  bool same_grid(const Histogram &o) const {
    return half_range == o.half_range && bins() == o.bins();
  }
};

namespace detail {

inline void check_grid(double half_range, std::size_t bins) {
  if (!(half_range > 0.0) || !std::isfinite(half_range)) {
    throw std::invalid_argument("histogram range must be positive and finite");
  }
  if (bins < 3 || bins % 2 == 0) {
    throw std::invalid_argument("histogram bin count must be odd and >= 3, got " +
                                std::to_string(bins));
  }
}

inline void normalize(std::vector<double> &m) {
  const double total = std::accumulate(m.begin(), m.end(), 0.0);
  if (total > 0.0) {
    for (double &v : m) v /= total;
  }
}

inline double median_in_place(std::vector<double> &v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace detail

///
/// Robust standard deviation of the noise underlying a difference field.
///
/// MAD / 0.6745 estimates the std of the differenced noise, which is
/// sqrt(2) times the std of the original per-voxel noise; the result is
/// divided by sqrt(2) so it refers to the original noise.
///
inline double estimate_noise_sigma(std::span<const double> gradients) {
  if (gradients.empty()) throw std::invalid_argument("estimate_noise_sigma: empty input");
  std::vector<double> v(gradients.begin(), gradients.end());
  const double med = detail::median_in_place(v);
  for (double &x : v) x = std::abs(x - med);
  const double mad = detail::median_in_place(v);
  return mad / 0.6745 / std::sqrt(2.0);
}

inline double estimate_noise_sigma(const Cube &gradients) {
  return estimate_noise_sigma(gradients.values());
}

/// Histogram with clamped tails, masses summing to one.
inline Histogram histogram(std::span<const double> values, double half_range, std::size_t bins) {
  detail::check_grid(half_range, bins);
  Histogram hist{half_range, std::vector<double>(bins, 0.0)};
  if (values.empty()) throw std::invalid_argument("histogram: empty input");
  const double width = hist.width();
  const auto mid = static_cast<long>(bins - 1) / 2;
  std::vector<std::size_t> counts(bins, 0);
  for (double x : values) {
    if (!std::isfinite(x)) throw std::invalid_argument("histogram: non-finite value");
    const long b = std::clamp(static_cast<long>(std::round(x / width)) + mid, 0L,
                              static_cast<long>(bins) - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  const double n = static_cast<double>(values.size());
  for (std::size_t b = 0; b < bins; ++b) hist.masses[b] = static_cast<double>(counts[b]) / n;
  return hist;
}

/// Average of a histogram and its mirror image.
inline Histogram symmetrize(Histogram h) {
  const std::size_t n = h.bins();
  for (std::size_t b = 0; b < n / 2; ++b) {
    const double m = 0.5 * (h.masses[b] + h.masses[n - 1 - b]);
    h.masses[b] = m;
    h.masses[n - 1 - b] = m;
  }
  return h;
}

/// Discretized density proportional to exp(-k |x|^p) on the template's grid.
inline Histogram hyper_laplacian_histogram(double k, double p, const Histogram &grid) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw std::invalid_argument("hyper-Laplacian scale k must be positive");
  }
  detail::check_exponent(p);
  Histogram out{grid.half_range, std::vector<double>(grid.bins())};
  for (std::size_t b = 0; b < out.bins(); ++b) {
    out.masses[b] = std::exp(-k * std::pow(std::abs(out.center(b)), p));
  }
  detail::normalize(out.masses);
  return out;
}

/// Discretized zero-mean Gaussian; std 0 gives a delta at the center bin.
inline Histogram gaussian_histogram(double stddev, const Histogram &grid) {
  if (!(stddev >= 0.0)) throw std::invalid_argument("gaussian_histogram: negative std");
  Histogram out{grid.half_range, std::vector<double>(grid.bins(), 0.0)};
  if (stddev == 0.0) {
    out.masses[out.bins() / 2] = 1.0;
    return out;
  }
  for (std::size_t b = 0; b < out.bins(); ++b) {
    const double z = out.center(b) / stddev;
    out.masses[b] = std::exp(-0.5 * z * z);
  }
  detail::normalize(out.masses);
  if (std::accumulate(out.masses.begin(), out.masses.end(), 0.0) == 0.0) {
    out.masses[out.bins() / 2] = 1.0;
  }
  return out;
}

/// Linear convolution truncated to the shared grid, renormalized.
inline Histogram convolve_hist(const Histogram &a, const Histogram &b) {
  if (!a.same_grid(b)) throw std::invalid_argument("convolve_hist: histogram grids differ");
  const std::size_t n = a.bins();
  const std::size_t mid = (n - 1) / 2;
  Histogram out{a.half_range, std::vector<double>(n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) {
    const double aj = a.masses[j];
    if (aj == 0.0) continue;
    // output index i = j + l - mid, restricted to [0, n)
    const std::size_t l_lo = j < mid ? mid - j : 0;
    const std::size_t l_hi = std::min(n, n + mid - j);
    for (std::size_t l = l_lo; l < l_hi; ++l) out.masses[j + l - mid] += aj * b.masses[l];
  }
  detail::normalize(out.masses);
  return out;
}

template <std::size_t N>
using Point = std::array<double, N>;

template <std::size_t N>
struct Box {
  Point<N> lower;
  Point<N> upper;
};

template <std::size_t N>
struct NelderMeadResult {
  Point<N> x;
  double value = 0.0;
  int iterations = 0;
};

struct NelderMeadOptions {
  int max_iter = 500;
  /// Stop when max - min of the simplex values falls below this...
  double value_tol = 1e-8;
  /// ...and every vertex lies within this distance (per coordinate) of the best.
  double point_tol = 1e-8;
};

///
/// Nelder-Mead simplex search with projection onto a box.
///
/// Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
/// Every trial point is clamped into the box before evaluation.
///
template <std::size_t N, typename F>
NelderMeadResult<N> nelder_mead(F &&objective, Point<N> start, const Box<N> &box,
                                const NelderMeadOptions &opt = {}) {
  for (std::size_t d = 0; d < N; ++d) {
    if (!(box.lower[d] < box.upper[d])) {
      throw std::invalid_argument("nelder_mead: degenerate bounds in coordinate " +
                                  std::to_string(d));
    }
    if (start[d] < box.lower[d] || start[d] > box.upper[d]) {
      throw std::invalid_argument("nelder_mead: start outside bounds");
    }
  }
  auto project = [&](Point<N> x) {
    for (std::size_t d = 0; d < N; ++d) x[d] = std::clamp(x[d], box.lower[d], box.upper[d]);
    return x;
  };
  struct Vertex {
    Point<N> x;
    double f;
  };
  std::array<Vertex, N + 1> s;
  s[0] = {start, objective(start)};
  for (std::size_t d = 0; d < N; ++d) {
    Point<N> x = start;
    const double span = box.upper[d] - box.lower[d];
    double step = x[d] != 0.0 ? 0.05 * std::abs(x[d]) : 0.00025 * span;
    step = std::min(step, 0.5 * span);
    x[d] = x[d] + step <= box.upper[d] ? x[d] + step : x[d] - step;
    x = project(x);
    s[d + 1] = {x, objective(x)};
  }
  auto combine = [&](const Point<N> &c, const Point<N> &x, double t) {
    Point<N> r;
    for (std::size_t d = 0; d < N; ++d) r[d] = c[d] + t * (x[d] - c[d]);
    return project(r);
  };

  int it = 0;
  for (; it < opt.max_iter; ++it) {
    std::stable_sort(s.begin(), s.end(), [](const Vertex &a, const Vertex &b) { return a.f < b.f; });
    double spread = 0.0;
    for (std::size_t v = 1; v <= N; ++v) {
      for (std::size_t d = 0; d < N; ++d) spread = std::max(spread, std::abs(s[v].x[d] - s[0].x[d]));
    }
    if (s[N].f - s[0].f < opt.value_tol && spread < opt.point_tol) break;

    Point<N> centroid{};
    for (std::size_t v = 0; v < N; ++v) {
      for (std::size_t d = 0; d < N; ++d) centroid[d] += s[v].x[d] / static_cast<double>(N);
    }
    const Point<N> xr = combine(centroid, s[N].x, -1.0);
    const double fr = objective(xr);
    if (fr < s[0].f) {
      const Point<N> xe = combine(centroid, s[N].x, -2.0);
      const double fe = objective(xe);
      s[N] = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
      continue;
    }
    if (fr < s[N - 1].f) {
      s[N] = {xr, fr};
      continue;
    }
    // contraction: outside if the reflected point beats the worst, else inside
    const bool outside = fr < s[N].f;
    const Point<N> xc = outside ? combine(centroid, xr, 0.5) : combine(centroid, s[N].x, 0.5);
    const double fc = objective(xc);
    if (fc < (outside ? fr : s[N].f)) {
      s[N] = {xc, fc};
      continue;
    }
    for (std::size_t v = 1; v <= N; ++v) {
      s[v].x = combine(s[0].x, s[v].x, 0.5);
      s[v].f = objective(s[v].x);
    }
  }
  const auto best =
      std::min_element(s.begin(), s.end(), [](const Vertex &a, const Vertex &b) { return a.f < b.f; });
  return {best->x, best->f, it};
}

/// Grid shared by every gradient histogram: 255 bins on [-1, 1].
struct HistogramGrid {
  double half_range = 1.0;
  std::size_t bins = 255;
};

struct DirectionFit {
  double sigma = 0.0;
  double k = 0.0;
  double p = 1.0;
  double residual = 0.0;
};

struct FitOptions {
  HistogramGrid grid{};
  Point<2> start{10.0, 0.7};
  Box<2> bounds{{0.5, 0.1}, {500.0, 1.0}};
  NelderMeadOptions search{};
};

/// Squared mismatch between an observed gradient histogram and a
/// hyper-Laplacian convolved with the differenced-noise Gaussian.
inline double histogram_mismatch(const Histogram &observed, const Histogram &noise, double k,
                                 double p) {
  const Histogram model = convolve_hist(hyper_laplacian_histogram(k, p, observed), noise);
  double s = 0.0;
  for (std::size_t b = 0; b < observed.bins(); ++b) {
    const double d = observed.masses[b] - model.masses[b];
    s += d * d;
  }
  return s;
}

///
/// Fit (k, p) of a hyper-Laplacian gradient prior to noisy gradients.
///
/// `sigma` is the std of the per-voxel Gaussian noise; differencing two
/// independent samples doubles its variance, so the noise histogram uses
/// std sqrt(2) * sigma.
///
inline DirectionFit fit_direction(std::span<const double> gradients, double sigma,
                                  const FitOptions &opt = {}) {
  if (gradients.empty()) throw std::invalid_argument("fit_direction: empty input");
  if (!(sigma >= 0.0)) throw std::invalid_argument("fit_direction: sigma must be nonnegative");
  const Histogram observed = symmetrize(histogram(gradients, opt.grid.half_range, opt.grid.bins));
  const Histogram noise = gaussian_histogram(std::sqrt(2.0) * sigma, observed);
  auto objective = [&](const Point<2> &x) { return histogram_mismatch(observed, noise, x[0], x[1]); };
  const auto r = nelder_mead<2>(objective, opt.start, opt.bounds, opt.search);
  return {sigma, r.x[0], r.x[1], r.value};
}

/// Fitted exponents plus per-direction diagnostics.
struct HyperLaplacianFit {
  std::array<DirectionFit, 3> directions{};

  Exponents exponents() const {
    return {directions[0].p, directions[1].p, directions[2].p};
  }
};

/// Fit one hyper-Laplacian per difference direction of a noisy cube.
inline HyperLaplacianFit estimate_p(const Cube &y, const FitOptions &opt = {}) {
  const Dims d = y.dims();
  if (d.h < 2 || d.w < 2 || d.p < 2) {
    throw std::invalid_argument("estimate_p: every dimension must be >= 2, got " + to_string(d));
  }
  const GradientStack g = diff_forward(y, TvWeights{1.0, 1.0, 1.0});
  HyperLaplacianFit fit;
  const std::array<const Cube *, 3> fields{&g.gx, &g.gy, &g.gz};
  for (int i = 0; i < 3; ++i) {
    const double sigma = estimate_noise_sigma(*fields[i]);
    fit.directions[i] = fit_direction(fields[i]->values(), sigma, opt);
  }
  return fit;
}

}  // namespace hsi
