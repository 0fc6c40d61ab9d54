#include <cstring>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "tbstream/simd/kernels.hpp"

using namespace tbstream::simd;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(SimdLevels, NamesRoundTrip) {
  for (auto lvl : {Level::Scalar, Level::AVX2, Level::NEON}) {
    EXPECT_EQ(level_from_string(to_string(lvl)), lvl);
  }
  EXPECT_FALSE(level_from_string("sse9").has_value());
  EXPECT_TRUE(supported(Level::Scalar));
  EXPECT_TRUE(supported(detected_level()));
}

TEST(SimdLevels, SetLevelRejectsUnsupported) {
  Level before = active_level();
  for (auto lvl : {Level::AVX2, Level::NEON}) {
    if (!supported(lvl)) EXPECT_THROW(set_level(lvl), std::invalid_argument);
  }
  set_level(Level::Scalar);
  EXPECT_EQ(active_level(), Level::Scalar);
  set_level(before);
}

TEST(SimdDot, ScalarMatchesHandComputed) {
  std::vector<double> a{1, 2, 3, 4, 5, 6, 7};
  std::vector<double> b{7, 6, 5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(dot_scalar(a.data(), b.data(), a.size()), 84.0);
  EXPECT_EQ(dot_scalar(a.data(), b.data(), 0), 0.0);
}

TEST(SimdDot, VariantsBitIdenticalToScalar) {
  std::mt19937_64 rng(99);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 17u, 64u, 255u, 256u, 1001u}) {
    for (int rep = 0; rep < 20; ++rep) {
      auto a = random_vec(rng, n), b = random_vec(rng, n);
      double ref = dot_scalar(a.data(), b.data(), n);
      for (auto lvl : {Level::AVX2, Level::NEON}) {
        if (!supported(lvl)) continue;
        double got = dot(lvl, a.data(), b.data(), n);
        EXPECT_TRUE(same_bits(ref, got)) << to_string(lvl) << " n=" << n << " " << ref << " vs " << got;
      }
    }
  }
}

TEST(SimdDot, CloseToLongDoubleSum) {
  std::mt19937_64 rng(3);
  auto a = random_vec(rng, 777), b = random_vec(rng, 777);
  long double exact = 0;
  for (std::size_t i = 0; i < a.size(); ++i) exact += static_cast<long double>(a[i]) * b[i];
  EXPECT_NEAR(dot(a.data(), b.data(), a.size()), static_cast<double>(exact), 1e-9);
}

TEST(SimdDot, ManyRowsMatchesPerRow) {
  std::mt19937_64 rng(17);
  const std::size_t dim = 256, nrows = 37;
  auto q = random_vec(rng, dim), rows = random_vec(rng, dim * nrows);
  std::vector<double> out(nrows), ref(nrows);
  dot_many(Level::Scalar, q.data(), rows.data(), nrows, dim, ref.data());
  dot_many(q.data(), rows.data(), nrows, dim, out.data());
  for (std::size_t r = 0; r < nrows; ++r) {
    EXPECT_TRUE(same_bits(ref[r], out[r]));
    EXPECT_TRUE(same_bits(ref[r], dot_scalar(q.data(), rows.data() + r * dim, dim)));
  }
}
