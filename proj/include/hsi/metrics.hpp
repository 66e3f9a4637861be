#pragma once

#include "hsi/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace hsi {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE), capped at 100 dB for identical inputs.
inline double psnr(std::span<const double> ref, std::span<const double> test, double peak = 1.0) {
  if (ref.size() != test.size() || ref.empty()) throw std::invalid_argument("psnr: size mismatch");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  double mse = 0.0;
  for (std::size_t n = 0; n < ref.size(); ++n) {
    const double e = ref[n] - test[n];
    mse += e * e;
  }
  mse /= static_cast<double>(ref.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

namespace detail {

/// 11-tap Gaussian, sigma 1.5, normalized to unit sum.
inline std::array<double, 11> ssim_kernel() {
  std::array<double, 11> k{};
  for (int i = 0; i < 11; ++i) {
    const double x = i - 5;
    k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
  }
  const double s = std::accumulate(k.begin(), k.end(), 0.0);
  for (double &v : k) v /= s;
  return k;
}

/// Separable 'valid' filtering of an h x w column-major image.
inline Matrix filter_valid(const Matrix &img) {
  static const auto k = ssim_kernel();
  const Eigen::Index h = img.rows() - 10, w = img.cols() - 10;
  Matrix tmp(h, img.cols());
  for (Eigen::Index j = 0; j < img.cols(); ++j)
    for (Eigen::Index i = 0; i < h; ++i) {
      double s = 0.0;
      for (int t = 0; t < 11; ++t) s += k[static_cast<std::size_t>(t)] * img(i + t, j);
      tmp(i, j) = s;
    }
  Matrix out(h, w);
  for (Eigen::Index j = 0; j < w; ++j)
    for (Eigen::Index i = 0; i < h; ++i) {
      double s = 0.0;
      for (int t = 0; t < 11; ++t) s += k[static_cast<std::size_t>(t)] * tmp(i, j + t);
      out(i, j) = s;
    }
  return out;
}

}  // namespace detail

///
/// Mean SSIM over all fully contained 11x11 windows (Gaussian weights,
/// sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1.
///
inline double ssim(const Matrix &ref, const Matrix &test) {
  if (ref.rows() != test.rows() || ref.cols() != test.cols()) {
    throw std::invalid_argument("ssim: band sizes differ");
  }
  if (ref.rows() < 11 || ref.cols() < 11) throw std::invalid_argument("ssim: bands must be at least 11x11");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const Matrix mx = detail::filter_valid(ref);
  const Matrix my = detail::filter_valid(test);
  const Matrix xx = detail::filter_valid(ref.cwiseProduct(ref));
  const Matrix yy = detail::filter_valid(test.cwiseProduct(test));
  const Matrix xy = detail::filter_valid(ref.cwiseProduct(test));
  double total = 0.0;
  for (Eigen::Index n = 0; n < mx.size(); ++n) {
    const double ux = mx(n), uy = my(n);
    const double vx = xx(n) - ux * ux, vy = yy(n) - uy * uy, cxy = xy(n) - ux * uy;
    total += ((2 * ux * uy + c1) * (2 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

/// Spectral angle in radians; 0 for two zero spectra, pi/2 if exactly one is zero.
inline double sam(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("sam: spectra differ in length");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    ab += a[n] * b[n];
    aa += a[n] * a[n];
    bb += b[n] * b[n];
  }
  if (aa == 0.0 && bb == 0.0) return 0.0;
  if (aa == 0.0 || bb == 0.0) return std::numbers::pi / 2.0;
  return std::acos(std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0));
}

struct MetricsReport {
  std::vector<double> psnr_per_band;
  std::vector<double> ssim_per_band;
  std::vector<double> sam_per_pixel;  ///< row-major over (i, j): index i + h j
  double mpsnr = 0.0;
  double mssim = 0.0;
  double msam = 0.0;
  double sam_min = 0.0;
  double sam_max = 0.0;
};

inline MetricsReport evaluate(const Cube &ref, const Cube &test) {
  const Dims d = ref.dims();
  if (test.dims() != d) throw std::invalid_argument("evaluate: cube dims differ");
  MetricsReport r;
  const std::size_t plane = d.h * d.w;
  for (std::size_t k = 0; k < d.p; ++k) {
    r.psnr_per_band.push_back(psnr(ref.values().subspan(k * plane, plane), test.values().subspan(k * plane, plane)));
    r.ssim_per_band.push_back(ssim(ref.band(k), test.band(k)));
  }
  std::vector<double> a(d.p), b(d.p);
  r.sam_per_pixel.resize(plane);
  for (std::size_t n = 0; n < plane; ++n) {
    for (std::size_t k = 0; k < d.p; ++k) {
      a[k] = ref[n + k * plane];
      b[k] = test[n + k * plane];
    }
    r.sam_per_pixel[n] = sam(a, b);
  }
  auto mean = [](const std::vector<double> &v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  r.mpsnr = mean(r.psnr_per_band);
  r.mssim = mean(r.ssim_per_band);
  r.msam = mean(r.sam_per_pixel);
  const auto [lo, hi] = std::minmax_element(r.sam_per_pixel.begin(), r.sam_per_pixel.end());
  r.sam_min = *lo;
  r.sam_max = *hi;
  return r;
}

}  // namespace hsi
