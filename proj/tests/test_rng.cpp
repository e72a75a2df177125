#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "enaqt/rng.hpp"

using enaqt::Philox4x32;

// Known-answer vectors of the reference Random123 implementation.
TEST(Philox, KnownAnswers) {
  using B = Philox4x32::Block;
  EXPECT_EQ(Philox4x32::bijection(B{0, 0, 0, 0}, {0, 0}),
            (B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::bijection(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                                  {0xffffffff, 0xffffffff}),
            (B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::bijection(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                                  {0xa4093822, 0x299f31d0}),
            (B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
  Philox4x32 a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u32();
    EXPECT_EQ(x, b.next_u32());
  }
  Philox4x32 a2(42, 7);
  std::vector<std::uint32_t> s1, s2, s3;
  for (int i = 0; i < 16; ++i) {
    s1.push_back(a2.next_u32());
    s2.push_back(c.next_u32());
    s3.push_back(d.next_u32());
  }
  EXPECT_NE(s1, s2);
  EXPECT_NE(s1, s3);
}

TEST(Philox, StreamIdUsesHighCounterWords) {
  Philox4x32 g(5, (std::uint64_t(3) << 32) | 9);
  const auto expect = Philox4x32::bijection({0, 0, 9, 3}, {5, 0});
  for (int i = 0; i < 4; ++i) EXPECT_EQ(g.next_u32(), expect[i]);
}

TEST(Philox, UniformMoments) {
  Philox4x32 g(1, 0);
  const int n = 200000;
  double m1 = 0, m2 = 0, lo = 1, hi = 0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    m1 += u;
    m2 += u * u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  m1 /= n;
  m2 /= n;
  EXPECT_NEAR(m1, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(m2 - m1 * m1, 1.0 / 12, 2e-3);
  EXPECT_LT(lo, 1e-4);
  EXPECT_GT(hi, 1 - 1e-4);
}

TEST(Philox, ExponentialMean) {
  Philox4x32 g(9, 3);
  const int n = 100000;
  double m = 0;
  for (int i = 0; i < n; ++i) m += g.exponential(2.0);
  m /= n;
  EXPECT_NEAR(m, 0.5, 5 * 0.5 / std::sqrt(double(n)));
  EXPECT_TRUE(std::isinf(g.exponential(0.0)));
}

TEST(Philox, BoundedIntegersCoverRange) {
  Philox4x32 g(2, 2);
  std::vector<int> hist(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = g.below(7);
    ASSERT_LT(k, 7u);
    ++hist[k];
  }
  for (int h : hist) EXPECT_NEAR(h, n / 7.0, 5 * std::sqrt(n / 7.0));
}
