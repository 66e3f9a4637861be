#pragma once

#include "hsi/tensor.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace hsi {

/// Multilinear rank (r1, r2, r3) of a Tucker model.
struct TuckerRanks {
  std::size_t r1 = 1;
  std::size_t r2 = 1;
  std::size_t r3 = 1;

  constexpr std::size_t operator[](int mode) const {
    return mode == 1 ? r1 : mode == 2 ? r2 : r3;
  }
  friend constexpr bool operator==(const TuckerRanks &, const TuckerRanks &) = default;
};

inline std::string to_string(const TuckerRanks &r) {
  return std::to_string(r.r1) + "," + std::to_string(r.r2) + "," + std::to_string(r.r3);
}

inline void check_ranks(const TuckerRanks &r, const Dims &d) {
  for (int n = 1; n <= 3; ++n) {
    if (r[n] < 1 || r[n] > d[n]) {
      throw std::invalid_argument("Tucker rank (" + to_string(r) + ") invalid for cube " +
                                  to_string(d));
    }
  }
}

/// Core tensor plus one column-orthonormal factor per mode.
struct TuckerFactors {
  Cube core;
  std::array<Matrix, 3> factors;
};

/// core x1 F1 x2 F2 x3 F3
inline Cube reconstruct(const TuckerFactors &f) {
  const Dims c = f.core.dims();
  for (int n = 1; n <= 3; ++n) {
    if (f.factors[n - 1].cols() != static_cast<Eigen::Index>(c[n])) {
      throw std::invalid_argument("reconstruct: factor " + std::to_string(n) + " has " +
                                  std::to_string(f.factors[n - 1].cols()) +
                                  " columns, core extent is " + std::to_string(c[n]));
    }
  }
  Cube t = mode_product(f.core, f.factors[0], 1);
  t = mode_product(t, f.factors[1], 2);
  return mode_product(t, f.factors[2], 3);
}

namespace detail {

inline Cube project_all(const Cube &t, const std::array<Matrix, 3> &factors) {
  Cube c = mode_product(t, factors[0].transpose(), 1);
  c = mode_product(c, factors[1].transpose(), 2);
  return mode_product(c, factors[2].transpose(), 3);
}

/// t contracted with the transposed factors of every mode except `skip`.
inline Cube project_except(const Cube &t, const std::array<Matrix, 3> &factors, int skip) {
  Cube c = t;
  for (int n = 1; n <= 3; ++n) {
    if (n != skip) c = mode_product(c, factors[n - 1].transpose(), n);
  }
  return c;
}

/// ||t - reconstruct|| for orthonormal factors, via ||t||^2 - ||core||^2.
inline double residual_norm(double t_norm_sq, const Cube &core) {
  const double c = fro_norm(core);
  return std::sqrt(std::max(0.0, t_norm_sq - c * c));
}

}  // namespace detail

/// Truncated HOSVD: per-mode leading singular vectors, then project.
inline TuckerFactors hosvd_init(const Cube &t, const TuckerRanks &ranks) {
  check_ranks(ranks, t.dims());
  TuckerFactors f;
  for (int n = 1; n <= 3; ++n) f.factors[n - 1] = detail::leading_basis(unfold(t, n), ranks[n]);
  f.core = detail::project_all(t, f.factors);
  return f;
}

struct HooiOptions {
  int max_iter = 10;
  double tol = 1e-4;
  /// Called after every sweep with (sweep index, residual norm).
  std::function<void(int, double)> on_sweep;
};

///
/// Higher-order orthogonal iteration from a truncated-HOSVD start.
///
/// Each sweep replaces factor n by the leading left singular vectors of
/// the mode-n unfolding of t contracted with the other two factors. The
/// loop stops once the relative change of ||t - reconstruct|| drops
/// below tol or after max_iter sweeps.
///
inline TuckerFactors hooi(const Cube &t, const TuckerRanks &ranks, const HooiOptions &opt = {}) {
  if (opt.max_iter < 1) throw std::invalid_argument("hooi: max_iter must be >= 1");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("hooi: tol must be positive");
  TuckerFactors f = hosvd_init(t, ranks);
  const double t_norm = fro_norm(t);
  const double t_norm_sq = t_norm * t_norm;
  double err = detail::residual_norm(t_norm_sq, f.core);
  for (int it = 0; it < opt.max_iter; ++it) {
    for (int n = 1; n <= 3; ++n) {
      const Cube partial = detail::project_except(t, f.factors, n);
      f.factors[n - 1] = detail::leading_basis(unfold(partial, n), ranks[n]);
    }
    f.core = detail::project_all(t, f.factors);
    const double next = detail::residual_norm(t_norm_sq, f.core);
    if (opt.on_sweep) opt.on_sweep(it, next);
    const double change = std::abs(err - next) / std::max(err, std::numeric_limits<double>::min());
    err = next;
    if (err <= 1e-14 * t_norm || change < opt.tol) break;
  }
  return f;
}

inline TuckerFactors hooi(const Cube &t, const TuckerRanks &ranks, int max_iter, double tol) {
  HooiOptions opt;
  opt.max_iter = max_iter;
  opt.tol = tol;
  return hooi(t, ranks, opt);
}

}  // namespace hsi
