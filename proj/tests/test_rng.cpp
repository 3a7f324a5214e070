#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "sympolicy/rng.hpp"

using namespace sympolicy;

TEST_CASE("derived seeds are stable and order-sensitive") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("streams with equal seeds are identical") {
  RngStream a(42), b(42), c(43);
  bool same = true, diff = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next();
    same &= va == b.next();
    diff |= va != c.next();
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("uniform01 covers [0,1) evenly") {
  RngStream rng(7);
  const int kBuckets = 16;
  int counts[kBuckets] = {};
  const int n = 1 << 18;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    counts[static_cast<int>(u * kBuckets)]++;
  }
  const double expect = static_cast<double>(n) / kBuckets;
  for (int b = 0; b < kBuckets; ++b) {
    CHECK(std::abs(counts[b] - expect) < 5.0 * std::sqrt(expect));
  }
}

TEST_CASE("uniform_index is unbiased for small n") {
  RngStream rng(11);
  int counts[5] = {};
  const int n = 200000;
  for (int i = 0; i < n; ++i) counts[rng.uniform_index(5)]++;
  for (int c : counts) CHECK(std::abs(c - n / 5) < 5 * std::sqrt(n / 5.0));
}

TEST_CASE("ziggurat normal matches N(0,1) moments and tails") {
  RngStream rng(123);
  const int n = 1 << 21;
  double sum = 0, sum2 = 0, sum3 = 0, sum4 = 0;
  int beyond2 = 0, beyond3 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
    sum3 += z * z * z;
    sum4 += z * z * z * z;
    if (std::abs(z) > 2.0) ++beyond2;
    if (std::abs(z) > 3.0) ++beyond3;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.005);
  CHECK(std::abs(var - 1.0) < 0.01);
  CHECK(std::abs(sum3 / n) < 0.02);            // skewness ~ 0
  CHECK(std::abs(sum4 / n - 3.0) < 0.05);      // kurtosis ~ 3
  // P(|Z|>2) = 0.04550, P(|Z|>3) = 0.0026998
  CHECK(std::abs(beyond2 / double(n) - 0.04550) < 0.002);
  CHECK(std::abs(beyond3 / double(n) - 0.0026998) < 0.0005);
}

TEST_CASE("normal(mean, stddev) scales correctly") {
  RngStream rng(9);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(2.0, 3.0);
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean - 2.0) < 0.05);
  CHECK(std::abs(var - 9.0) < 0.2);
}
