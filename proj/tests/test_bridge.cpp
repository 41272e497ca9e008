#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kpz/bridge.hpp"
#include "kpz/rng.hpp"

#include <cmath>
#include <vector>

using namespace kpz;

TEST_CASE("bridge endpoints are pinned to zero exactly") {
  RngStream rs(42, 0);
  for (int n : {2, 4, 64, 1024}) {
    BridgePath p = sample_bridge(n, rs);
    CHECK(p.n() == n);
    CHECK(p.values[0] == 0.0);
    CHECK(p.values[static_cast<size_t>(n)] == 0.0);
  }
}

TEST_CASE("bridge sampling is a pure function of the stream") {
  RngStream a(7, 3), b(7, 3);
  BridgePath pa = sample_bridge(256, a);
  BridgePath pb = sample_bridge(256, b);
  CHECK(pa.values == pb.values);
  RngStream c(7, 4);
  BridgePath pc = sample_bridge(256, c);
  CHECK(pa.values != pc.values);
}

TEST_CASE("invalid grid sizes are rejected") {
  RngStream rs(1, 0);
  CHECK_THROWS(sample_bridge(0, rs));
  CHECK_THROWS(sample_bridge(1, rs));
  CHECK_THROWS(sample_bridge(3, rs));
  CHECK_THROWS(sample_bridge(-8, rs));
  CHECK_THROWS(sample_bridge(48, rs));
}

TEST_CASE("sample_bridge_values matches sample_bridge bit for bit") {
  const int n = 128;
  RngStream a(9, 5), b(9, 5);
  BridgePath p = sample_bridge(n, a);
  std::vector<double> vals(n + 1), scratch(n);
  sample_bridge_values(n, b, vals.data(), scratch.data());
  CHECK(p.values == vals);
}

TEST_CASE("bridge pair: coarse is the even-index restriction of fine") {
  RngStream rs(11, 2);
  BridgePair pair = sample_bridge_pair(64, rs);
  CHECK(pair.coarse.n() == 64);
  CHECK(pair.fine.n() == 128);
  for (int j = 0; j <= 64; ++j)
    CHECK(pair.coarse.values[static_cast<size_t>(j)] ==
          pair.fine.values[static_cast<size_t>(2 * j)]);
}

TEST_CASE("midpoint variance matches y(1-y) at y = 1/2") {
  // Var B(1/2) = 1/4; the n = 2 grid carries the midpoint exactly
  const int n_samples = 100000;
  RngStream rs(101, 0);
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    BridgePath p = sample_bridge(2, rs);
    double v = p.values[1];
    s1 += v;
    s2 += v * v;
    s4 += v * v * v * v;
  }
  double m1 = s1 / n_samples;
  double m2 = s2 / n_samples;
  double m4 = s4 / n_samples;
  double se2 = std::sqrt((m4 - m2 * m2) / n_samples);
  CHECK(std::abs(m1) < 3.0 * std::sqrt(m2 / n_samples));
  CHECK(std::abs(m2 - 0.25) < 3.0 * se2);
}

TEST_CASE("covariance matches min(s,t) - s t") {
  // Cov(B(1/4), B(3/4)) = 1/4 - 3/16 = 1/16
  const int n_samples = 1000000;
  RngStream rs(202, 0);
  double s_uv = 0.0, s_uv2 = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    BridgePath p = sample_bridge(4, rs);
    double prod = p.values[1] * p.values[3];
    s_uv += prod;
    s_uv2 += prod * prod;
  }
  double m = s_uv / n_samples;
  double se = std::sqrt((s_uv2 / n_samples - m * m) / n_samples);
  CHECK(std::abs(m - 0.0625) < 3.0 * se);
}

TEST_CASE("negate flips every value and is an involution") {
  RngStream rs(5, 1);
  BridgePath p = sample_bridge(32, rs);
  BridgePath q = negate(p);
  REQUIRE(q.n() == p.n());
  for (int j = 0; j <= 32; ++j)
    CHECK(q.values[static_cast<size_t>(j)] == -p.values[static_cast<size_t>(j)]);
  BridgePath r = negate(q);
  CHECK(r.values == p.values);
}

TEST_CASE("trapezoid rule on simple grids") {
  // constant 1 integrates to 1, hat function to its exact trapezoid value
  std::vector<double> ones(9, 1.0);
  CHECK(trapezoid(ones) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> hat{0.0, 0.5, 1.0, 0.5, 0.0};
  CHECK(trapezoid(hat) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("partition functional at beta = 0 and on the zero path") {
  RngStream rs(13, 0);
  BridgePath p = sample_bridge(64, rs);
  CHECK(partition_functional(p, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  BridgePath z;
  z.values.assign(65, 0.0);
  CHECK(partition_functional(z, 2.5) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("partition functional under path negation equals beta sign flip") {
  RngStream rs(17, 0);
  BridgePath p = sample_bridge(128, rs);
  BridgePath q = negate(p);
  CHECK(partition_functional(q, 1.3) == partition_functional(p, -1.3));
}

TEST_CASE("Jensen lower bound holds pathwise") {
  RngStream rs(19, 0);
  for (int i = 0; i < 200; ++i) {
    BridgePath p = sample_bridge(64, rs);
    double t = partition_functional(p, 1.0);
    double lb = std::exp(trapezoid(p.values));
    CHECK(t >= lb * (1.0 - 1e-14));
  }
}

TEST_CASE("log partition functional agrees with the log of the plain one") {
  RngStream rs(23, 0);
  for (double beta : {0.3, 1.0, 2.0}) {
    BridgePath p = sample_bridge(64, rs);
    CHECK(log_partition_functional(p, beta) ==
          doctest::Approx(std::log(partition_functional(p, beta))).epsilon(1e-13));
  }
}

TEST_CASE("log partition functional survives large beta") {
  RngStream rs(29, 0);
  BridgePath p = sample_bridge(64, rs);
  double lp = log_partition_functional(p, 600.0);
  CHECK(std::isfinite(lp));
  // dominated by the max of the path: beta * max - log corrections
  double mx = 0.0;
  for (double v : p.values) mx = std::max(mx, v);
  CHECK(lp > 600.0 * mx - 10.0);
  CHECK(lp <= 600.0 * mx + 1e-9);
}

TEST_CASE("antithetic pairing reduces variance of the partition functional") {
  // T(p) + T(-p) shares the even part; the beta^2 term cancels in the spread
  const int n_pairs = 20000;
  RngStream rs(31, 0);
  double plain_s = 0.0, plain_s2 = 0.0, anti_s = 0.0, anti_s2 = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    BridgePath p = sample_bridge(64, rs);
    double a = partition_functional(p, 1.0);
    double b = partition_functional(negate(p), 1.0);
    plain_s += a;
    plain_s2 += a * a;
    double m = 0.5 * (a + b);
    anti_s += m;
    anti_s2 += m * m;
  }
  double vp = plain_s2 / n_pairs - (plain_s / n_pairs) * (plain_s / n_pairs);
  double va = anti_s2 / n_pairs - (anti_s / n_pairs) * (anti_s / n_pairs);
  CHECK(va < 0.5 * vp);
}
