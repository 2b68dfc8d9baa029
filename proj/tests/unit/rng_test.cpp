#include <doctest.h>

#include <cmath>

#include "tpsmooth/rng.hpp"

using tpsmooth::Rng;

TEST_SUITE("rng") {

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(43);
  bool all_equal = true;
  for (int i = 0; i < 10; ++i) all_equal = all_equal && c.next_u64() == d.next_u64();
  CHECK_FALSE(all_equal);
}

TEST_CASE("uniform stays inside the open unit interval") {
  Rng rng(7);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments") {
  Rng rng(11);
  const int n = 1000000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("gamma moments across the shape boundary") {
  Rng rng(13);
  for (const double shape : {0.5, 1.7, 50.0}) {
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(shape);
      sum += g;
      sum2 += g * g;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(shape).epsilon(0.02));
    CHECK(var == doctest::Approx(shape).epsilon(0.05));
  }
}

TEST_CASE("inverse gamma mean matches scale/(shape-1)") {
  Rng rng(17);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.inverse_gamma(5.0, 8.0);
  CHECK(sum / n == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("weibull with shape 1/2: mean is 2/rate") {
  // mean of Weibull(k, scale s) is s * Gamma(1 + 1/k) = s * Gamma(3) = 2s.
  Rng rng(19);
  const int n = 400000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.weibull_half(4.0);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("derived seeds differ by index") {
  CHECK(tpsmooth::derive_seed(1, 0) != tpsmooth::derive_seed(1, 1));
  CHECK(tpsmooth::derive_seed(1, 0) == tpsmooth::derive_seed(1, 0));
}

}  // TEST_SUITE
