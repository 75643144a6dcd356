#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "couplab/rng.hpp"

using namespace couplab;

TEST_CASE("identical keys replay identical sequences") {
  RngStream a(42, 17, 1), b(42, 17, 1);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  RngStream c(42, 17, 1), d(42, 17, 1);
  for (int i = 0; i < 100; ++i) CHECK(c.gaussian() == d.gaussian());
}

TEST_CASE("distinct paths are uncorrelated") {
  RngStream a(42, 0, 0), b(42, 1, 0);
  int n = 10000;
  double sab = 0, sa = 0, sb = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    double x = a.gaussian(), y = b.gaussian();
    sab += x * y;
    sa += x;
    sb += y;
    saa += x * x;
    sbb += y * y;
  }
  double cov = sab / n - (sa / n) * (sb / n);
  double corr = cov / std::sqrt((saa / n - sa / n * (sa / n)) * (sbb / n - sb / n * (sb / n)));
  CHECK(std::fabs(corr) < 0.03);
}

TEST_CASE("distinct channels are uncorrelated") {
  RngStream a(7, 3, 0), b(7, 3, 1);
  int n = 10000;
  double sab = 0;
  for (int i = 0; i < n; ++i) sab += a.gaussian() * b.gaussian();
  CHECK(std::fabs(sab / n) < 0.03);
}

TEST_CASE("gaussian moments") {
  RngStream g(123, 5, 2);
  int n = 100000;
  double s = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    double x = g.gaussian();
    s += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::fabs(s / n) < 0.01);
  CHECK(std::fabs(s2 / n - 1.0) < 0.02);
  CHECK(std::fabs(s4 / n - 3.0) < 0.15);
}

TEST_CASE("uniforms live in the open interval") {
  RngStream u(9, 0, 3);
  for (int i = 0; i < 100000; ++i) {
    double x = u.uniform();
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
}
