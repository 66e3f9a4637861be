#include "hsi/noise.hpp"
#include "fixture.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <set>

using namespace hsi;

namespace {

double mean(const Cube &c) {
  double s = 0.0;
  for (double v : c) s += v;
  return s / static_cast<double>(c.size());
}

double stddev(const Cube &c) {
  const double m = mean(c);
  double s = 0.0;
  for (double v : c) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(c.size() - 1));
}

bool column_constant(const Cube &c, std::size_t j, std::size_t k) {
  for (std::size_t i = 1; i < c.dims().h; ++i)
    if (c(i, j, k) != c(0, j, k)) return false;
  return true;
}

std::set<std::size_t> nonzero_columns(const Cube &c, std::size_t k) {
  std::set<std::size_t> cols;
  for (std::size_t j = 0; j < c.dims().w; ++j)
    if (c(0, j, k) != 0.0) cols.insert(j);
  return cols;
}

bool bitwise_equal(const Cube &a, const Cube &b) {
  return a.dims() == b.dims() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(StripeKind, RoundTripsThroughText) {
  for (StripeKind k : {StripeKind::none, StripeKind::random, StripeKind::periodic, StripeKind::mixed,
                       StripeKind::wide_vertical})
    EXPECT_EQ(parse_stripe_kind(to_string(k)), k);
  EXPECT_THROW(parse_stripe_kind("diagonal"), std::invalid_argument);
}

TEST(SampleWithoutReplacement, DistinctSortedInRange) {
  Rng rng(1);
  for (std::size_t count : {0u, 1u, 7u, 20u}) {
    const auto s = detail::sample_without_replacement(20, count, rng);
    ASSERT_EQ(s.size(), count);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), count);
    for (std::size_t v : s) EXPECT_LT(v, 20u);
  }
}

TEST(Gaussian, LevelAndMean) {
  Rng rng(2);
  const Cube g = gaussian_field(Dims{128, 128, 4}, std::vector<double>(4, 0.1), rng);
  EXPECT_GE(stddev(g), 0.095);
  EXPECT_LE(stddev(g), 0.105);
  EXPECT_NEAR(mean(g), 0.0, 3 * 0.1 / std::sqrt(static_cast<double>(g.size())));
}

TEST(Gaussian, PerBandLevels) {
  Rng rng(3);
  const Dims d{96, 96, 2};
  const Cube g = gaussian_field(d, {0.0, 0.2}, rng);
  for (double v : g.band(0).reshaped()) EXPECT_EQ(v, 0.0);
  double s = 0.0;
  for (double v : g.band(1).reshaped()) s += v * v;
  EXPECT_NEAR(std::sqrt(s / (96.0 * 96.0)), 0.2, 0.01);
  EXPECT_THROW(gaussian_field(d, {0.1}, rng), std::invalid_argument);
}

TEST(Impulse, ZeroRatioIsIdentity) {
  Rng rng(4);
  const Cube t = fixture::low_rank_cube(Dims{16, 16, 3});
  const MaskedNoise r = apply_impulse(t, std::vector<double>(3, 0.0), rng);
  EXPECT_TRUE(bitwise_equal(r.noisy, t));
  for (double v : r.mask) EXPECT_EQ(v, 0.0);
}

TEST(Impulse, FractionMatchesRatio) {
  Rng rng(5);
  const Cube t(Dims{256, 256, 1}, 0.5);
  const MaskedNoise r = apply_impulse(t, {0.2}, rng);
  std::size_t hit = 0, salt = 0;
  for (std::size_t n = 0; n < t.size(); ++n) {
    if (r.mask[n] == 1.0) {
      ++hit;
      EXPECT_TRUE(r.noisy[n] == 0.0 || r.noisy[n] == 1.0);
      salt += r.noisy[n] == 1.0;
    } else {
      EXPECT_EQ(r.noisy[n], 0.5);
    }
  }
  const double frac = static_cast<double>(hit) / static_cast<double>(t.size());
  EXPECT_NEAR(frac, 0.2, 0.01);
  EXPECT_NEAR(static_cast<double>(salt) / static_cast<double>(hit), 0.5, 0.02);
}

TEST(Impulse, FullRatioOnlySaltAndPepper) {
  Rng rng(6);
  const MaskedNoise r = apply_impulse(fixture::low_rank_cube(Dims{16, 16, 2}), {1.0, 1.0}, rng);
  for (double v : r.noisy) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(Deadlines, DisabledLeavesCubeUntouched) {
  Rng rng(7);
  const Cube t(Dims{8, 10, 5}, 0.4);
  NoiseSpec spec;
  spec.deadline_count_min = spec.deadline_count_max = 0;
  EXPECT_TRUE(bitwise_equal(add_deadlines(t, spec, rng), t));
  spec = NoiseSpec{};
  spec.deadline_band_fraction = 0.0;
  EXPECT_TRUE(bitwise_equal(add_deadlines(t, spec, rng), t));
}

TEST(Deadlines, SingleWidthTwoLineZeroesTwoFullColumns) {
  Rng rng(8);
  const Dims d{9, 12, 1};
  const Cube t(d, 0.4);
  NoiseSpec spec;
  spec.deadline_band_fraction = 1.0;
  spec.deadline_count_min = spec.deadline_count_max = 1;
  spec.deadline_width_min = spec.deadline_width_max = 2;
  const MaskedNoise r = apply_deadlines(t, spec, rng);
  double masked = 0.0;
  for (double v : r.mask) masked += v;
  EXPECT_EQ(masked, 2.0 * d.h);
  for (std::size_t j = 0; j < d.w; ++j) {
    EXPECT_TRUE(column_constant(r.mask, j, 0));
    EXPECT_TRUE(column_constant(r.noisy, j, 0));
    if (r.mask(0, j, 0) == 1.0) {
      EXPECT_EQ(r.noisy(0, j, 0), 0.0);
    }
  }
}

TEST(Deadlines, BandCountFollowsFraction) {
  Rng rng(9);
  const Dims d{6, 20, 10};
  const MaskedNoise r = apply_deadlines(Cube(d, 0.5), NoiseSpec{}, rng);
  std::size_t bands = 0;
  for (std::size_t k = 0; k < d.p; ++k) bands += r.mask.band(k).sum() > 0 ? 1 : 0;
  EXPECT_EQ(bands, 2u);
}

TEST(Stripes, ZeroCoverageAddsNothing) {
  Rng rng(10);
  const Cube t = fixture::low_rank_cube(Dims{12, 12, 3});
  const StripeResult r = add_stripes(t, StripeKind::random, Range{0.0, 0.0}, 0.25, rng);
  EXPECT_TRUE(bitwise_equal(r.noisy, t));
  for (double v : r.field) EXPECT_EQ(v, 0.0);
}

TEST(Stripes, PeriodicQuarterHitsEveryFourthColumn) {
  Rng rng(11);
  const Dims d{6, 16, 3};
  const StripeResult r = add_stripes(Cube(d), StripeKind::periodic, Range{0.25, 0.25}, 0.25, rng);
  for (std::size_t k = 0; k < d.p; ++k) {
    EXPECT_EQ(nonzero_columns(r.field, k), (std::set<std::size_t>{0, 4, 8, 12}));
    const double a = r.field(0, 0, k);
    EXPECT_GE(std::abs(a), 0.125);
    EXPECT_LE(std::abs(a), 0.25);
    for (std::size_t j : {4u, 8u, 12u}) EXPECT_EQ(r.field(0, j, k), a);
  }
}

TEST(Stripes, RandomCoverageAndAmplitude) {
  Rng rng(12);
  const Dims d{5, 40, 4};
  const StripeResult r = add_stripes(Cube(d), StripeKind::random, Range{0.4, 0.5}, 0.25, rng);
  for (std::size_t k = 0; k < d.p; ++k) {
    EXPECT_GE(r.coverage[k], 0.4);
    EXPECT_LE(r.coverage[k], 0.5);
    const auto cols = nonzero_columns(r.field, k);
    EXPECT_LE(cols.size(), static_cast<std::size_t>(std::lround(r.coverage[k] * 40)));
    EXPECT_GE(cols.size() + 1, static_cast<std::size_t>(std::lround(r.coverage[k] * 40)));
    for (double v : r.field.band(k).reshaped()) EXPECT_LE(std::abs(v), 0.25);
  }
}

TEST(Stripes, WideVerticalCoversContiguousBlocks) {
  Rng rng(13);
  const Dims d{4, 60, 3};
  const StripeResult r = add_stripes(Cube(d), StripeKind::wide_vertical, Range{0.3, 0.3}, 0.25, rng);
  for (std::size_t k = 0; k < d.p; ++k) EXPECT_GE(nonzero_columns(r.field, k).size(), 17u);
}

TEST(Stripes, EveryKindIsConstantDownColumns) {
  const Dims d{7, 30, 4};
  for (StripeKind kind : {StripeKind::random, StripeKind::periodic, StripeKind::mixed, StripeKind::wide_vertical}) {
    Rng rng(14);
    const StripeResult r = add_stripes(Cube(d), kind, Range{0.3, 0.5}, 0.25, rng);
    for (std::size_t k = 0; k < d.p; ++k)
      for (std::size_t j = 0; j < d.w; ++j) EXPECT_TRUE(column_constant(r.field, j, k)) << to_string(kind);
    // Mode-1 rank one per band.
    for (std::size_t k = 0; k < d.p; ++k) {
      Eigen::JacobiSVD<Matrix> svd(Matrix(r.field.band(k)));
      if (svd.singularValues().size() > 1) {
        EXPECT_LE(svd.singularValues()(1), 1e-12);
      }
    }
  }
}

TEST(Stripes, RejectsBadCoverage) {
  Rng rng(15);
  EXPECT_THROW(add_stripes(Cube(Dims{2, 2, 2}), StripeKind::random, Range{0.5, 0.4}, 0.25, rng), std::invalid_argument);
  EXPECT_THROW(add_stripes(Cube(Dims{2, 2, 2}), StripeKind::random, Range{0.5, 1.4}, 0.25, rng), std::invalid_argument);
}

TEST(NoiseSpec, CaseTable) {
  const NoiseSpec c1 = NoiseSpec::for_case(1);
  EXPECT_EQ(c1.stripe_kind, StripeKind::none);
  EXPECT_EQ(c1.stripe_coverage, (Range{0.0, 0.0}));
  const NoiseSpec c2 = NoiseSpec::for_case(2, 7);
  EXPECT_EQ(c2.gaussian_variance, (Range{0.1, 0.1}));
  EXPECT_EQ(c2.impulse_ratio, (Range{0.2, 0.2}));
  EXPECT_EQ(c2.stripe_kind, StripeKind::random);
  EXPECT_EQ(c2.stripe_coverage, (Range{0.4, 0.5}));
  EXPECT_EQ(c2.seed, 7u);
  EXPECT_EQ(NoiseSpec::for_case(4).stripe_kind, StripeKind::periodic);
  EXPECT_EQ(NoiseSpec::for_case(5).stripe_kind, StripeKind::mixed);
  EXPECT_EQ(NoiseSpec::for_case(6).stripe_kind, StripeKind::wide_vertical);
  for (int c = 1; c <= 6; ++c) EXPECT_NO_THROW(NoiseSpec::for_case(c).validate());
  EXPECT_THROW(NoiseSpec::for_case(0), std::invalid_argument);
  EXPECT_THROW(NoiseSpec::for_case(7), std::invalid_argument);
}

TEST(NoiseSpec, ValidationRejectsBadRanges) {
  NoiseSpec s;
  s.impulse_ratio = {0.2, 1.5};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = NoiseSpec{};
  s.deadline_width_min = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = NoiseSpec{};
  s.gaussian_variance = {0.3, 0.1};
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(SimulateCase, CaseOneHasNoStripes) {
  const Simulation sim = simulate_case(fixture::low_rank_cube(Dims{16, 16, 5}), NoiseSpec::for_case(1, 3));
  for (double v : sim.stripe_field) EXPECT_EQ(v, 0.0);
  for (double c : sim.coverage_per_band) EXPECT_EQ(c, 0.0);
}

TEST(SimulateCase, CaseTwoDrawsFixedLevels) {
  const Simulation sim = simulate_case(fixture::low_rank_cube(Dims{16, 16, 5}), NoiseSpec::for_case(2, 3));
  for (double s : sim.sigma_per_band) EXPECT_DOUBLE_EQ(s, std::sqrt(0.1));
  for (double r : sim.impulse_per_band) EXPECT_EQ(r, 0.2);
  for (double c : sim.coverage_per_band) {
    EXPECT_GE(c, 0.4);
    EXPECT_LE(c, 0.5);
  }
}

TEST(SimulateCase, DeterministicPerSeed) {
  const Cube truth = fixture::low_rank_cube(Dims{16, 16, 5});
  for (int c = 1; c <= 6; ++c) {
    const Simulation a = simulate_case(truth, NoiseSpec::for_case(c, 11));
    const Simulation b = simulate_case(truth, NoiseSpec::for_case(c, 11));
    EXPECT_TRUE(bitwise_equal(a.noisy, b.noisy)) << "case " << c;
  }
  const Simulation a = simulate_case(truth, NoiseSpec::for_case(2, 11));
  const Simulation b = simulate_case(truth, NoiseSpec::for_case(2, 12));
  EXPECT_FALSE(bitwise_equal(a.noisy, b.noisy));
}

TEST(SimulateCase, UnmaskedVoxelsAreTruthPlusAdditiveLayers) {
  const Cube truth = fixture::low_rank_cube(Dims{20, 20, 6});
  for (int c = 1; c <= 6; ++c) {
    const Simulation sim = simulate_case(truth, NoiseSpec::for_case(c, 21));
    for (std::size_t n = 0; n < truth.size(); ++n) {
      if (sim.impulse_mask[n] == 1.0) {
        EXPECT_TRUE(sim.noisy[n] == 0.0 || sim.noisy[n] == 1.0);
      } else if (sim.deadline_mask[n] == 1.0) {
        EXPECT_EQ(sim.noisy[n], 0.0);
      } else {
        EXPECT_EQ(sim.noisy[n], (truth[n] + sim.gaussian[n]) + sim.stripe_field[n]) << "case " << c << " voxel " << n;
      }
    }
  }
}
