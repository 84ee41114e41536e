#include <doctest.h>

#include <cmath>
#include <set>

#include "msmkit/rng.hpp"

using namespace msmkit;

TEST_CASE("equal keys reproduce the sequence, different keys diverge") {
  RngStream a(42, 7, 1), b(42, 7, 1), c(42, 7, 2);
  bool all_equal = true;
  bool any_equal_c = false;
  for (int i = 0; i < 256; ++i) {
    const auto x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    any_equal_c = any_equal_c || (x == c.next_u64());
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_c);
}

TEST_CASE("uniform stays in [0,1) with sane mean") {
  RngStream rng(1);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / 20000.0 - 0.5) < 0.01);
}

TEST_CASE("normal moments") {
  RngStream rng(2);
  const int n = 50000;
  double sum = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    ss += z * z;
  }
  const double mean = sum / n;
  const double var = ss / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("chi-square mean equals its degrees of freedom") {
  RngStream rng(3);
  const double df = 7.0;
  const int n = 40000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.chi_square(df);
  // SD of the mean is sqrt(2 df / n) ~ 0.019
  CHECK(std::abs(sum / n - df) < 0.08);
}

TEST_CASE("child streams are independent of the parent continuation") {
  RngStream parent(99);
  RngStream child_a = parent.child(0);
  RngStream child_b = parent.child(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 64; ++i) {
    seen.insert(child_a.next_u64());
    seen.insert(child_b.next_u64());
    seen.insert(parent.next_u64());
  }
  CHECK(seen.size() == 3 * 64);  // no collisions across streams
}
