#pragma once

#include "hsi/circulant_solver.hpp"
#include "hsi/hyper_laplacian.hpp"
#include "hsi/priors.hpp"
#include "hsi/tensor.hpp"
#include "hsi/tucker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsi {

/// Image rank default: (0.8 h, 0.8 w, min(10, p)).
inline TuckerRanks default_ranks_x(const Dims &d) {
  auto scaled = [](std::size_t n, double f) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(f * static_cast<double>(n))), 1, n);
  };
  return {scaled(d.h, 0.8), scaled(d.w, 0.8), std::min<std::size_t>(10, d.p)};
}

/// Stripe rank default: (1, 0.5 w, 0.5 p); stripes are constant down a column.
inline TuckerRanks default_ranks_b(const Dims &d) {
  auto scaled = [](std::size_t n, double f) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(f * static_cast<double>(n))), 1, n);
  };
  return {1, scaled(d.w, 0.5), scaled(d.p, 0.5)};
}

struct SolverConfig {
  double lambda1 = 0.002;  ///< weight of the hyper-Laplacian gradient prior
  double lambda2 = 0.02;   ///< weight of the sparse-noise l1 term
  double beta0 = 0.01;
  double beta_max = 1e6;
  double beta_growth = 1.05;
  TvWeights weights{};
  std::optional<TuckerRanks> ranks_x;  ///< default_ranks_x when unset
  std::optional<TuckerRanks> ranks_b;  ///< default_ranks_b when unset
  double epsilon = 1e-6;
  int k_max = 100;
  std::optional<Exponents> p_override;
  /// When false the stripe component stays identically zero.
  bool model_stripes = true;
  int hooi_max_iter = 10;
  double hooi_tol = 1e-4;
  int gst_iterations = 10;

  TuckerRanks image_ranks(const Dims &d) const { return ranks_x.value_or(default_ranks_x(d)); }
  TuckerRanks stripe_ranks(const Dims &d) const { return ranks_b.value_or(default_ranks_b(d)); }

  void validate() const {
    auto fail = [](const std::string &m) { throw std::invalid_argument("SolverConfig: " + m); };
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail("lambda1 and lambda2 must be >= 0");
    if (!(beta0 > 0.0) || !(beta_max > 0.0) || beta0 > beta_max) fail("need 0 < beta0 <= beta_max");
    if (!(beta_growth >= 1.0)) fail("beta_growth must be >= 1");
    if (!(epsilon > 0.0)) fail("epsilon must be positive");
    if (k_max < 1) fail("k_max must be >= 1");
    if (hooi_max_iter < 1 || !(hooi_tol > 0.0)) fail("invalid HOOI budget");
    if (gst_iterations < 1) fail("gst_iterations must be >= 1");
    weights.validate();
    if (weights.h == 0.0 && weights.w == 0.0 && weights.p == 0.0) fail("at least one TV weight must be > 0");
    if (p_override) {
      for (double e : *p_override) {
        if (!(e > 0.0 && e <= 1.0)) fail("p_override entries must lie in (0, 1]");
      }
    }
  }
};

/// All primal and dual variables of the splitting.
struct SolverState {
  Cube x, z, s, b;
  GradientStack f;
  Cube lam1;
  GradientStack lam2;
  double beta = 0.0;
  int iter = 0;
  std::vector<double> rel_change_history;

  static SolverState zeros(const Dims &d, double beta) {
    return {Cube(d), Cube(d), Cube(d), Cube(d), zero_stack(d), Cube(d), zero_stack(d), beta, 0, {}};
  }
};

/// y = clean + sparse + stripes + residual.
struct ObservationDecomposition {
  Cube clean;
  Cube sparse;
  Cube stripes;
  Cube residual;
};

/// ((clean + sparse) + stripes) + residual, evaluated left to right.
inline Cube recompose(const ObservationDecomposition &d) {
  Cube y = d.clean;
  for (std::size_t n = 0; n < y.size(); ++n) {
    y[n] = ((d.clean[n] + d.sparse[n]) + d.stripes[n]) + d.residual[n];
  }
  return y;
}

struct SolveDiagnostics {
  std::vector<double> rel_change_history;
  std::vector<double> beta_history;  ///< beta used during each iteration
  Exponents exponents{1.0, 1.0, 1.0};
  std::optional<HyperLaplacianFit> fit;  ///< set when exponents were estimated
  TuckerRanks ranks_x;
  TuckerRanks ranks_b;
  int iterations = 0;
  bool converged = false;
  double wall_seconds = 0.0;
};

struct SolveResult {
  ObservationDecomposition decomposition;
  SolveDiagnostics diagnostics;
};

/// HOOI fit of (beta z - lam1) / beta at the image ranks.
inline Cube update_x(const SolverState &st, const SolverConfig &cfg) {
  Cube target = st.z;
  for (std::size_t n = 0; n < target.size(); ++n) target[n] = (st.beta * st.z[n] - st.lam1[n]) / st.beta;
  return reconstruct(hooi(target, cfg.image_ranks(target.dims()), cfg.hooi_max_iter, cfg.hooi_tol));
}

/// Right-hand side of the z normal equation.
inline Cube z_rhs(const SolverState &st, const SolverConfig &cfg, const Cube &y) {
  const GradientStack g = st.f * st.beta - st.lam2;
  Cube h = diff_adjoint(g, cfg.weights);
  for (std::size_t n = 0; n < h.size(); ++n) {
    h[n] += y[n] - st.b[n] - st.s[n] + st.lam1[n] + st.beta * st.x[n];
  }
  return h;
}

///
/// Solves ((1 + beta) I + beta D_w^T D_w) z = H exactly in the Fourier domain,
/// with H = y - b - s + lam1 + beta x + D_w^T (beta f - lam2).
///
inline Cube update_z(const SolverState &st, const SolverConfig &cfg, const Cube &y,
                     const CirculantSolver &solver) {
  return solver.solve(z_rhs(st, cfg, y), 1.0 + st.beta, st.beta);
}

inline Cube update_z(const SolverState &st, const SolverConfig &cfg, const Cube &y) {
  return update_z(st, cfg, y, CirculantSolver(y.dims(), cfg.weights));
}

/// Generalized shrinkage of D_w z + lam2 / beta with threshold lambda1 / beta.
inline GradientStack update_f(const SolverState &st, const SolverConfig &cfg, const Exponents &p) {
  GradientStack g = diff_forward(st.z, cfg.weights);
  g += st.lam2 * (1.0 / st.beta);
  return ahsstv_prox(std::move(g), cfg.lambda1 / st.beta, p, cfg.gst_iterations);
}

/// HOOI fit of y - z - s at the stripe ranks.
inline Cube update_b(const SolverState &st, const SolverConfig &cfg, const Cube &y) {
  if (!cfg.model_stripes) return Cube(y.dims());
  Cube target = y;
  for (std::size_t n = 0; n < target.size(); ++n) target[n] = y[n] - st.z[n] - st.s[n];
  return reconstruct(hooi(target, cfg.stripe_ranks(y.dims()), cfg.hooi_max_iter, cfg.hooi_tol));
}

inline Cube update_s(const SolverState &st, const SolverConfig &cfg, const Cube &y) {
  Cube r = y;
  for (std::size_t n = 0; n < r.size(); ++n) r[n] = soft_threshold(y[n] - st.z[n] - st.b[n], cfg.lambda2);
  return r;
}

struct MultiplierUpdate {
  Cube lam1;
  GradientStack lam2;
  double beta;
};

/// Dual ascent on both constraints, then beta <- min(growth * beta, beta_max).
inline MultiplierUpdate update_multipliers(const SolverState &st, const SolverConfig &cfg) {
  MultiplierUpdate u{st.lam1, st.lam2, st.beta};
  for (std::size_t n = 0; n < u.lam1.size(); ++n) u.lam1[n] += st.beta * (st.x[n] - st.z[n]);
  GradientStack gap = diff_forward(st.z, cfg.weights);
  gap -= st.f;
  u.lam2 += gap * st.beta;
  u.beta = std::min(st.beta * cfg.beta_growth, cfg.beta_max);
  return u;
}

/// ||x_next - x_prev||^2 / ||x_prev||^2; 1 when x_prev is zero but x_next is not.
inline double relative_change(const Cube &prev, const Cube &next) {
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < prev.size(); ++n) {
    const double d = next[n] - prev[n];
    num += d * d;
    den += prev[n] * prev[n];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : 1.0;
  return num / den;
}

namespace detail {

/// Grid for decomposition outputs: sums of three components stay exact.
inline constexpr double kOutputGrid = 0x1p-40;

inline Cube snap_to_grid(Cube c) {
  for (double &v : c) v = std::nearbyint(v / kOutputGrid) * kOutputGrid;
  return c;
}

}  // namespace detail

///
/// Splits y into a residual and three snapped components.
///
/// clean, sparse and stripes are rounded to multiples of 2^-40 so their
/// running sum t is exact; the residual y - t is then exact whenever y
/// lies on a grid at least as coarse near its magnitude, which holds for
/// any cube read from the 32-bit file format. In that case
/// recompose(result) == y bit for bit.
///
inline ObservationDecomposition decompose(const Cube &y, const Cube &clean, const Cube &sparse,
                                          const Cube &stripes) {
  ObservationDecomposition d{detail::snap_to_grid(clean), detail::snap_to_grid(sparse),
                             detail::snap_to_grid(stripes), Cube(y.dims())};
  for (std::size_t n = 0; n < y.size(); ++n) {
    d.residual[n] = y[n] - ((d.clean[n] + d.sparse[n]) + d.stripes[n]);
  }
  return d;
}

/// Observes the state after every completed outer iteration.
using IterationObserver = std::function<void(const SolverState &)>;

///
/// Full restoration loop.
///
/// Exponents come from estimate_p(y) unless overridden; all variables
/// start at zero; each iteration updates x, z, f, b, s, then the
/// multipliers, and stops once relative_change(x) <= epsilon or after
/// k_max iterations. y is expected to be normalized to [0, 1] per band.
///
inline SolveResult solve(const Cube &y, const SolverConfig &cfg,
                         const IterationObserver &observer = {}) {
  cfg.validate();
  if (!y.all_finite()) throw std::invalid_argument("solve: input contains non-finite values");
  const auto t0 = std::chrono::steady_clock::now();
  const Dims d = y.dims();

  SolveDiagnostics diag;
  diag.ranks_x = cfg.image_ranks(d);
  diag.ranks_b = cfg.stripe_ranks(d);
  check_ranks(diag.ranks_x, d);
  if (cfg.model_stripes) check_ranks(diag.ranks_b, d);
  if (cfg.p_override) {
    diag.exponents = *cfg.p_override;
  } else {
    diag.fit = estimate_p(y);
    diag.exponents = diag.fit->exponents();
  }

  SolverConfig resolved = cfg;
  resolved.ranks_x = diag.ranks_x;
  resolved.ranks_b = diag.ranks_b;

  const CirculantSolver circulant(d, cfg.weights);
  SolverState st = SolverState::zeros(d, cfg.beta0);
  for (int k = 0; k < cfg.k_max; ++k) {
    Cube x_next = update_x(st, resolved);
    const double rel = relative_change(st.x, x_next);
    st.x = std::move(x_next);
    st.z = update_z(st, resolved, y, circulant);
    st.f = update_f(st, resolved, diag.exponents);
    st.b = update_b(st, resolved, y);
    st.s = update_s(st, resolved, y);
    diag.beta_history.push_back(st.beta);
    MultiplierUpdate mu = update_multipliers(st, resolved);
    st.lam1 = std::move(mu.lam1);
    st.lam2 = std::move(mu.lam2);
    st.beta = mu.beta;
    st.iter = k + 1;
    st.rel_change_history.push_back(rel);
    if (observer) observer(st);
    // The first iteration starts from x = 0 on both sides; never stop there.
    if (k > 0 && rel <= cfg.epsilon) {
      diag.converged = true;
      break;
    }
  }
  diag.iterations = st.iter;
  diag.rel_change_history = st.rel_change_history;
  diag.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {decompose(y, st.x, st.s, st.b), std::move(diag)};
}

}  // namespace hsi
