#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "inertdrift/rng.hpp"

using namespace inertdrift;

// Known-answer vectors of the Random123 distribution (kat_vectors, philox4x32 10 rounds).
TEST(Philox, KnownAnswerZero) {
  const PhiloxCounter out = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const PhiloxCounter out =
      philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const PhiloxCounter out =
      philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(NoiseSource, SameKeySameSequence) {
  const NoiseSource a(42, 3), b(42, 3);
  for (std::uint64_t k = 0; k < 1000; ++k) {
    EXPECT_EQ(a.standard_normal(k), b.standard_normal(k));
    EXPECT_EQ(a.uniform(k), b.uniform(k));
  }
}

TEST(NoiseSource, OrderOfQueriesIrrelevant) {
  const NoiseSource a(7, 0);
  const double late = a.standard_normal(123456789);
  for (std::uint64_t k = 0; k < 100; ++k) (void)a.standard_normal(k);
  EXPECT_EQ(a.standard_normal(123456789), late);
}

TEST(NoiseSource, StreamsSeedsAndSlotsDiffer) {
  const NoiseSource a(1, 0), b(1, 1), c(2, 0);
  int same_stream = 0, same_seed = 0, same_slot = 0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    same_stream += a.standard_normal(k) == b.standard_normal(k);
    same_seed += a.standard_normal(k) == c.standard_normal(k);
    same_slot += a.uniform(k, 0) == a.uniform(k, 1);
  }
  EXPECT_EQ(same_stream, 0);
  EXPECT_EQ(same_seed, 0);
  EXPECT_EQ(same_slot, 0);
}

TEST(NoiseSource, NormalMoments) {
  const NoiseSource n(2024, 5);
  const std::size_t N = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (std::uint64_t k = 0; k < N; ++k) {
    const double z = n.standard_normal(k);
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  const double m = s1 / N, v = s2 / N, k4 = s4 / N;
  // standard errors: 1/sqrt(N), sqrt(2/N), sqrt(96/N)
  EXPECT_LT(std::fabs(m), 5.0 / std::sqrt(N));
  EXPECT_LT(std::fabs(v - 1.0), 5.0 * std::sqrt(2.0 / N));
  EXPECT_LT(std::fabs(k4 - 3.0), 5.0 * std::sqrt(96.0 / N));
}

TEST(NoiseSource, UniformInOpenIntervalAndLag1Uncorrelated) {
  const NoiseSource n(99, 0);
  const std::size_t N = 100000;
  double s = 0.0, lag = 0.0, prev = n.uniform(0);
  for (std::uint64_t k = 1; k <= N; ++k) {
    const double u = n.uniform(k);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    lag += (u - 0.5) * (prev - 0.5);
    prev = u;
  }
  EXPECT_LT(std::fabs(s / N - 0.5), 5.0 * std::sqrt(1.0 / 12.0 / N));
  EXPECT_LT(std::fabs(lag / N), 5.0 / 12.0 / std::sqrt(N));
}

TEST(DeriveSeed, DistinctLabelsGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a)
    for (std::uint64_t b = 0; b < 50; ++b) seen.insert(derive_seed(1, a, b));
  EXPECT_EQ(seen.size(), 2500u);
  EXPECT_EQ(derive_seed(5, 6, 7), derive_seed(5, 6, 7));
}
