#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "siggame/rng.hpp"
#include "siggame/sampling.hpp"

using namespace siggame;

TEST(DiscountedWeights, TracksPlainVectorUnderRandomOperations) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t n : {1u, 2u, 7u, 16u, 100u, 729u}) {
    std::vector<double> plain(n);
    for (auto& v : plain) v = unit(rng) < 0.2 ? 0.0 : unit(rng) * 5.0;
    plain[0] += 0.5;
    DiscountedWeights dw(plain);
    for (int step = 0; step < 20000; ++step) {
      const double factor = 0.9 + 0.1 * unit(rng);
      dw.discount(factor);
      for (auto& v : plain) v *= factor;
      const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      const double amount = unit(rng) * 4.0;
      dw.add(i, amount);
      plain[i] += amount;
    }
    const double total = std::accumulate(plain.begin(), plain.end(), 0.0);
    EXPECT_NEAR(dw.total(), total, 1e-9 * total);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(dw.weight(i), plain[i], 1e-9 * total) << i;
  }
}

TEST(DiscountedWeights, RescalesWithoutLosingRatios) {
  DiscountedWeights dw(std::vector<double>{1.0, 2.0, 3.0});
  for (int i = 0; i < 28; ++i) dw.discount(1e-10);  // forces several rescales
  const double t = dw.total();
  ASSERT_GT(t, 0.0);
  EXPECT_NEAR(dw.weight(0) / t, 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(dw.weight(2) / t, 0.5, 1e-12);
  dw.add(0, 1.0);
  EXPECT_NEAR(dw.weight(0), 1.0, 1e-12);
  EXPECT_EQ(dw.sample(0.0), 0u);
}

TEST(DiscountedWeights, NeverSamplesZeroWeights) {
  std::vector<double> w{0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0};
  DiscountedWeights dw(w);
  for (double u : {0.0, 1e-17, 0.3333333333333333, 0.3333333333333334, 0.5, 0.999999999999, 1.0 - 1e-16})
    EXPECT_TRUE(dw.sample(u) == 2 || dw.sample(u) == 5) << u;
  DiscountedWeights tail(std::vector<double>{3.0, 0.0, 0.0});
  EXPECT_EQ(tail.sample(1.0 - 1e-16), 0u);
}

TEST(DiscountedWeights, SamplingFrequenciesMatchWeights) {
  const std::vector<double> w{1.0, 0.0, 4.0, 2.0, 3.0};
  DiscountedWeights dw(w);
  SplitMix64 rng(123);
  const int draws = 200000;
  std::vector<int> counts(w.size(), 0);
  for (int i = 0; i < draws; ++i) ++counts[dw.sample(rng.uniform())];
  EXPECT_EQ(counts[1], 0);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double expected = draws * w[i] / 10.0;
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  EXPECT_LT(chi2, 18.47);  // 4 degrees of freedom, p = 0.001
}

TEST(DiscountedWeights, RejectsNegativeWeights) {
  EXPECT_THROW(DiscountedWeights(std::vector<double>{1.0, -0.5}), InvalidArgument);
}

TEST(Rng, StreamsAreDeterministicAndDistinct) {
  auto a = derive_stream(1, 2, 3), b = derive_stream(1, 2, 3), c = derive_stream(1, 3, 2);
  for (int i = 0; i < 10; ++i) {
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
  }
  SplitMix64 r(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.below(7), 7u);
  }
}

TEST(Rng, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  SplitMix64 r(8);
  shuffle_in_place(v, r);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
}
