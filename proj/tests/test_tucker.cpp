#include "hsi/tucker.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hsi;

namespace {

Cube random_cube(Dims d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Cube c(d);
  for (double &v : c) v = n(rng);
  return c;
}

Matrix orthonormal(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  Matrix q = Eigen::HouseholderQR<Matrix>(m).householderQ();
  return q.leftCols(cols);
}

TuckerFactors random_factors(Dims d, TuckerRanks r, unsigned seed) {
  TuckerFactors f;
  f.core = random_cube(Dims{r.r1, r.r2, r.r3}, seed);
  for (int n = 1; n <= 3; ++n)
    f.factors[n - 1] = orthonormal(static_cast<Eigen::Index>(d[n]), static_cast<Eigen::Index>(r[n]), seed * 3u + static_cast<unsigned>(n));
  return f;
}

double rel_error(const Cube &a, const Cube &b) { return fro_norm(a - b) / fro_norm(b); }

double orthonormality_defect(const Matrix &u) {
  return (u.transpose() * u - Matrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

// Step-by-step HOSVD and one HOOI sweep using only the oracle SVD and
// explicit index loops.
using oracle::Dense;

Dense oracle_unfold(const Cube &t, int mode) {
  const Dims d = t.dims();
  Dense m(d[mode], d.size() / d[mode]);
  for (std::size_t k = 0; k < d.p; ++k)
    for (std::size_t j = 0; j < d.w; ++j)
      for (std::size_t i = 0; i < d.h; ++i) {
        const double v = t(i, j, k);
        if (mode == 1) m(i, j + d.w * k) = v;
        if (mode == 2) m(j, i + d.h * k) = v;
        if (mode == 3) m(k, i + d.h * j) = v;
      }
  return m;
}

Dense leading(const Dense &m, std::size_t r) {
  auto [u, sv] = oracle::jacobi_svd_left(m);
  Dense out(m.rows, r);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t c = 0; c < r; ++c) out(i, c) = u(i, c);
  return out;
}

// t x_n u^T with explicit loops.
Cube contract(const Cube &t, const Dense &u, int mode) {
  Dims d = t.dims();
  Dims out = d;
  if (mode == 1) out.h = u.cols;
  if (mode == 2) out.w = u.cols;
  if (mode == 3) out.p = u.cols;
  Cube r(out);
  for (std::size_t k = 0; k < out.p; ++k)
    for (std::size_t j = 0; j < out.w; ++j)
      for (std::size_t i = 0; i < out.h; ++i) {
        double s = 0.0;
        const std::size_t len = d[mode];
        for (std::size_t a = 0; a < len; ++a) {
          if (mode == 1) s += u(a, i) * t(a, j, k);
          if (mode == 2) s += u(a, j) * t(i, a, k);
          if (mode == 3) s += u(a, k) * t(i, j, a);
        }
        r(i, j, k) = s;
      }
  return r;
}

}  // namespace

TEST(TuckerRanks, Validation) {
  EXPECT_THROW(check_ranks(TuckerRanks{0, 1, 1}, Dims{2, 2, 2}), std::invalid_argument);
  EXPECT_THROW(check_ranks(TuckerRanks{3, 1, 1}, Dims{2, 2, 2}), std::invalid_argument);
  EXPECT_NO_THROW(check_ranks(TuckerRanks{2, 2, 2}, Dims{2, 2, 2}));
}

TEST(Reconstruct, ZeroCoreGivesZeroCube) {
  TuckerFactors f = random_factors(Dims{4, 5, 3}, TuckerRanks{2, 2, 2}, 1);
  f.core = Cube(Dims{2, 2, 2});
  for (double v : reconstruct(f)) EXPECT_EQ(v, 0.0);
}

TEST(Reconstruct, IdentityFactorsReturnCore) {
  const Cube t = random_cube(Dims{3, 4, 2}, 2);
  TuckerFactors f{t, {Matrix::Identity(3, 3), Matrix::Identity(4, 4), Matrix::Identity(2, 2)}};
  EXPECT_EQ(reconstruct(f), t);
}

TEST(Reconstruct, MatchesModeProductComposition) {
  const TuckerFactors f = random_factors(Dims{5, 4, 6}, TuckerRanks{2, 3, 2}, 3);
  const Cube direct = mode_product(mode_product(mode_product(f.core, f.factors[0], 1), f.factors[1], 2), f.factors[2], 3);
  const Cube r = reconstruct(f);
  for (std::size_t n = 0; n < r.size(); ++n) EXPECT_NEAR(r[n], direct[n], 1e-12);
}

TEST(Reconstruct, RejectsShapeMismatch) {
  TuckerFactors f = random_factors(Dims{5, 4, 6}, TuckerRanks{2, 3, 2}, 3);
  f.factors[1] = Matrix::Identity(4, 2);
  EXPECT_THROW(reconstruct(f), std::invalid_argument);
}

TEST(HosvdInit, FullRanksAreExact) {
  const Cube t = random_cube(Dims{4, 5, 3}, 4);
  EXPECT_LE(rel_error(reconstruct(hosvd_init(t, TuckerRanks{4, 5, 3})), t), 1e-10);
}

TEST(HosvdInit, OuterProductAtRankOne) {
  Cube t(Dims{3, 4, 5});
  for (std::size_t k = 0; k < 5; ++k)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < 3; ++i) t(i, j, k) = (1.0 + i) * (2.0 - 0.5 * j) * (0.3 + k);
  EXPECT_LE(rel_error(reconstruct(hosvd_init(t, TuckerRanks{1, 1, 1})), t), 1e-12);
}

TEST(HosvdInit, ErrorMatchesOracleTruncation) {
  const Cube t = random_cube(Dims{8, 8, 8}, 5);
  const TuckerRanks r{4, 4, 4};
  Cube core = t;
  std::array<Dense, 3> us;
  for (int n = 1; n <= 3; ++n) us[static_cast<std::size_t>(n - 1)] = leading(oracle_unfold(t, n), 4);
  for (int n = 1; n <= 3; ++n) core = contract(core, us[static_cast<std::size_t>(n - 1)], n);
  const double oracle_err = std::sqrt(std::max(0.0, fro_norm(t) * fro_norm(t) - fro_norm(core) * fro_norm(core)));
  const double err = fro_norm(reconstruct(hosvd_init(t, r)) - t);
  EXPECT_NEAR(err, oracle_err, 1e-10 * fro_norm(t));
}

TEST(Hooi, ExactLowRankTensorIsRecovered) {
  const Dims d{7, 6, 5};
  const TuckerRanks r{3, 2, 2};
  const Cube t = reconstruct(random_factors(d, r, 6));
  EXPECT_LE(rel_error(reconstruct(hooi(t, r, 10, 1e-4)), t), 1e-8);
}

TEST(Hooi, FullRanksReproduceInput) {
  const Cube t = random_cube(Dims{4, 3, 5}, 7);
  EXPECT_LE(rel_error(reconstruct(hooi(t, TuckerRanks{4, 3, 5}, 10, 1e-4)), t), 1e-10);
}

TEST(Hooi, NoWorseThanHosvd) {
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Cube t = random_cube(Dims{8, 8, 8}, seed);
    const TuckerRanks r{4, 4, 4};
    const double e0 = fro_norm(reconstruct(hosvd_init(t, r)) - t);
    const double e1 = fro_norm(reconstruct(hooi(t, r, 10, 1e-4)) - t);
    EXPECT_LE(e1, e0 + 1e-12);
  }
}

TEST(Hooi, ErrorNonIncreasingAndFactorsOrthonormal) {
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Cube t = random_cube(Dims{9, 7, 6}, 40 + seed);
    const TuckerRanks r{3, 4, 2};
    std::vector<double> errs{fro_norm(reconstruct(hosvd_init(t, r)) - t)};
    HooiOptions opt;
    opt.max_iter = 25;
    opt.tol = 1e-14;
    opt.on_sweep = [&](int, double e) { errs.push_back(e); };
    const TuckerFactors f = hooi(t, r, opt);
    for (std::size_t n = 1; n < errs.size(); ++n) EXPECT_LE(errs[n], errs[n - 1] * (1.0 + 1e-12));
    for (const Matrix &u : f.factors) EXPECT_LE(orthonormality_defect(u), 1e-8);
    EXPECT_NEAR(errs.back(), fro_norm(reconstruct(f) - t), 1e-9 * fro_norm(t));
  }
}

TEST(Hooi, OrthonormalAfterEverySweep) {
  const Cube t = random_cube(Dims{6, 6, 6}, 11);
  for (int sweeps = 1; sweeps <= 5; ++sweeps) {
    const TuckerFactors f = hooi(t, TuckerRanks{2, 3, 4}, sweeps, 1e-14);
    for (const Matrix &u : f.factors) EXPECT_LE(orthonormality_defect(u), 1e-8);
  }
}

TEST(Hooi, RejectsInvalidBudget) {
  const Cube t = random_cube(Dims{3, 3, 3}, 1);
  EXPECT_THROW(hooi(t, TuckerRanks{1, 1, 1}, 0, 1e-4), std::invalid_argument);
  EXPECT_THROW(hooi(t, TuckerRanks{1, 1, 1}, 1, 0.0), std::invalid_argument);
  EXPECT_THROW(hooi(t, TuckerRanks{4, 1, 1}, 1, 1e-4), std::invalid_argument);
}

TEST(Hooi, SingleSweepMatchesStepByStepOracle) {
  const Cube t = random_cube(Dims{3, 3, 3}, 12);
  const std::size_t r = 2;
  std::array<Dense, 3> u;
  for (int n = 1; n <= 3; ++n) u[static_cast<std::size_t>(n - 1)] = leading(oracle_unfold(t, n), r);
  for (int n = 1; n <= 3; ++n) {
    Cube partial = t;
    for (int m = 1; m <= 3; ++m)
      if (m != n) partial = contract(partial, u[static_cast<std::size_t>(m - 1)], m);
    u[static_cast<std::size_t>(n - 1)] = leading(oracle_unfold(partial, n), r);
  }
  const TuckerFactors f = hooi(t, TuckerRanks{r, r, r}, 1, 1e-14);
  for (int n = 0; n < 3; ++n) {
    Dense got(3, r);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < r; ++c) got(i, c) = f.factors[static_cast<std::size_t>(n)](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    EXPECT_LE(oracle::subspace_angle(got, u[static_cast<std::size_t>(n)]), 1e-8);
  }
}

TEST(Hooi, RanksBeyondContractedWidthStayOrthonormal) {
  // r2 exceeds r1 * r3, so the contracted mode-2 unfolding is narrower than r2.
  const Cube t = random_cube(Dims{6, 12, 8}, 13);
  const TuckerFactors f = hooi(t, TuckerRanks{1, 6, 4}, 10, 1e-4);
  for (const Matrix &u : f.factors) EXPECT_LE(orthonormality_defect(u), 1e-8);
  EXPECT_EQ(f.factors[1].cols(), 6);
}

TEST(Hooi, Deterministic) {
  const Cube t = random_cube(Dims{6, 5, 4}, 14);
  EXPECT_EQ(reconstruct(hooi(t, TuckerRanks{2, 2, 2}, 10, 1e-4)), reconstruct(hooi(t, TuckerRanks{2, 2, 2}, 10, 1e-4)));
}
