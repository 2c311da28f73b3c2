#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "pathdens/rng.hpp"

using namespace pathdens;

TEST(CounterRng, SameKeySameDraws) {
  const CounterRng a(7, 3), b(7, 3);
  for (std::uint64_t c = 0; c < 100; ++c) {
    EXPECT_EQ(a.bits(c), b.bits(c));
    EXPECT_EQ(a.normal(c), b.normal(c));
  }
}

TEST(CounterRng, StreamsDiffer) {
  const CounterRng a(7, 3), b(7, 4);
  int same = 0;
  for (std::uint64_t c = 0; c < 1000; ++c) same += a.bits(c) == b.bits(c);
  EXPECT_EQ(same, 0);
}

TEST(CounterRng, UniformInOpenInterval) {
  const CounterRng r(1, 0);
  for (std::uint64_t c = 0; c < 10000; ++c) {
    const double u = r.uniform(c);
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(CounterRng, NormalMoments) {
  const CounterRng r(11, 5);
  const int m = 200000;
  double s = 0, s2 = 0, s4 = 0;
  for (int c = 0; c < m; ++c) {
    const double z = r.normal(static_cast<std::uint64_t>(c));
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / m, 0.0, 0.01);
  EXPECT_NEAR(s2 / m, 1.0, 0.01);
  EXPECT_NEAR(s4 / m, 3.0, 0.05);
}

TEST(CounterRng, DerivedStreamsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t p = 0; p < 50; ++p)
    for (std::uint64_t t = 0; t < 50; ++t) seen.insert(derive_stream(p, t));
  EXPECT_EQ(seen.size(), 2500u);
}
