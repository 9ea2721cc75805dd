#include "elastic/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using elastic::CounterStream;
using elastic::DrawTag;

TEST(CounterStream, SameKeysSameDraw) {
  CounterStream a(42), b(42);
  EXPECT_EQ(a.bits(DrawTag::late, {3, 1, 2}), b.bits(DrawTag::late, {3, 1, 2}));
  EXPECT_NE(a.bits(DrawTag::late, {3, 1, 2}), a.bits(DrawTag::late, {3, 2, 1}));
  EXPECT_NE(a.bits(DrawTag::late, {3, 1, 2}), a.bits(DrawTag::drop, {3, 1, 2}));
  EXPECT_NE(a.bits(DrawTag::late, {3, 1, 2}), CounterStream(43).bits(DrawTag::late, {3, 1, 2}));
}

TEST(CounterStream, DrawIsIndependentOfCallHistory) {
  CounterStream s(7);
  const double first = s.uniform(DrawTag::sample, {10, 0});
  for (int k = 0; k < 100; ++k) (void)s.uniform(DrawTag::sample, {static_cast<std::uint64_t>(k), 1});
  EXPECT_EQ(first, s.uniform(DrawTag::sample, {10, 0}));
}

TEST(CounterStream, UniformMomentsAndRange) {
  CounterStream s(1);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = s.uniform(DrawTag::late, {static_cast<std::uint64_t>(k)});
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum2 += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sum2 / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(CounterStream, BelowCoversRangeEvenly) {
  CounterStream s(9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int k = 0; k < n; ++k) ++counts[s.below(7, DrawTag::delay, {static_cast<std::uint64_t>(k)})];
  for (int c : counts) EXPECT_NEAR(c, n / 7, 5 * std::sqrt(n / 7.0));
  EXPECT_EQ(s.below(1, DrawTag::delay, {5}), 0u);
}

TEST(CounterStream, SplitGivesDistinctChildren) {
  CounterStream s(5);
  EXPECT_NE(s.split(0).seed(), s.split(1).seed());
  EXPECT_EQ(s.split(3).seed(), CounterStream(5).split(3).seed());
  EXPECT_NE(s.split(0).seed(), s.seed());
}
