#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "haldane/random.hpp"

using haldane::philox4x64;
using haldane::PhiloxCounter;
using haldane::RandomStream;

// Reference outputs produced with numpy.random.Philox (4x64, 10 rounds).
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x64({1, 0, 0, 0}, {0, 0}),
            (PhiloxCounter{0x02f4ba6408e4d89bULL, 0x3dd62b0b9ca8c5b2ULL,
                           0x1c8667a55d902e79ULL, 0x907d7a052fd5b4dcULL}));
  EXPECT_EQ(philox4x64({2, 0, 0, 0}, {0, 0}),
            (PhiloxCounter{0x809bf322883987c3ULL, 0x471128b9e807f7ddULL,
                           0xf250ba0dbec065b7ULL, 0xfc6ed66767a457bcULL}));
  EXPECT_EQ(philox4x64({6, 7, 0, 0}, {0xdeadbeef, 0x1234}),
            (PhiloxCounter{0xbb25dc1828ffa824ULL, 0x32547d994d602015ULL,
                           0xf59161311c00d686ULL, 0x4e1c6c48d3e9db99ULL}));
  const auto all = ~0ULL;
  EXPECT_EQ(philox4x64({all, all, all, all}, {all, all}),
            (PhiloxCounter{0x87b092c3013fe90bULL, 0x438c3c67be8d0224ULL,
                           0x9cc7d7c69cd777b6ULL, 0xa09caebf594f0ba0ULL}));
}

TEST(RandomStream, FirstBlockIsCounterZero) {
  RandomStream rng(5, 3, 2);
  const auto block = philox4x64({0, 3, 2, 0}, {5, 0});
  for (int i = 0; i < 4; ++i) EXPECT_EQ(rng(), block[i]);
  const auto next = philox4x64({1, 3, 2, 0}, {5, 0});
  EXPECT_EQ(rng(), next[0]);
}

TEST(RandomStream, SameAddressSameSequence) {
  RandomStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(RandomStream, DistinctAddressesDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (std::uint64_t stream = 0; stream < 4; ++stream) {
      for (std::uint64_t sub = 0; sub < 4; ++sub) {
        firsts.insert(RandomStream(seed, stream, sub)());
      }
    }
  }
  EXPECT_EQ(firsts.size(), 64u);
}

TEST(RandomStream, ForkKeepsSeedAndStream) {
  RandomStream rng(9, 4);
  rng();
  auto child = rng.fork(11);
  EXPECT_EQ(child.seed(), 9u);
  EXPECT_EQ(child.stream(), 4u);
  EXPECT_EQ(child.substream(), 11u);
  RandomStream direct(9, 4, 11);
  EXPECT_EQ(child(), direct());
}

TEST(RandomStream, UniformOpenInterval) {
  RandomStream rng(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // mean of U(0,1): 0.5 with sd sqrt(1/12/n)
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RandomStream, BitBalance) {
  RandomStream rng(123);
  const int n = 100000;
  int ones[64] = {};
  for (int i = 0; i < n; ++i) {
    const auto x = rng();
    for (int b = 0; b < 64; ++b) ones[b] += (x >> b) & 1;
  }
  const double sd = std::sqrt(n * 0.25);
  for (int b = 0; b < 64; ++b) EXPECT_NEAR(ones[b], n / 2.0, 5.0 * sd) << b;
}
