#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kpz/constants.hpp"
#include "kpz/estimate.hpp"
#include "kpz/merge.hpp"
#include "kpz/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

using namespace kpz;

namespace {

bool same_estimate(const Estimate& a, const Estimate& b) {
  return a.value == b.value && a.std_error == b.std_error &&
         a.n_samples == b.n_samples && a.label == b.label && a.beta == b.beta;
}

}  // namespace

TEST_CASE("Welford accumulator matches two-pass moments") {
  std::vector<double> xs{1.5, 2.5, -3.0, 7.0, 0.25, -1.125, 4.75};
  BlockMoments bm;
  for (double x : xs) bm.add(x);
  long double mean = 0.0L;
  for (double x : xs) mean += x;
  mean /= static_cast<long double>(xs.size());
  long double m2 = 0.0L;
  for (double x : xs) m2 += (x - mean) * (x - mean);
  CHECK(bm.n == static_cast<int64_t>(xs.size()));
  CHECK(bm.mean == doctest::Approx(static_cast<double>(mean)).epsilon(1e-14));
  CHECK(bm.m2 == doctest::Approx(static_cast<double>(m2)).epsilon(1e-13));
}

TEST_CASE("absorb in canonical order reproduces the single pass exactly") {
  RngStream rs(3, 0);
  std::vector<double> xs(3000);
  for (double& x : xs) x = rs.next_normal();

  BlockMoments whole;
  for (double x : xs) whole.add(x);

  BlockMoments a, b, c;
  for (int i = 0; i < 1000; ++i) a.add(xs[static_cast<size_t>(i)]);
  for (int i = 1000; i < 2048; ++i) b.add(xs[static_cast<size_t>(i)]);
  for (int i = 2048; i < 3000; ++i) c.add(xs[static_cast<size_t>(i)]);
  BlockMoments folded = a;
  folded.absorb(b);
  folded.absorb(c);

  CHECK(folded.n == whole.n);
  CHECK(folded.mean == doctest::Approx(whole.mean).epsilon(1e-15));
  CHECK(folded.m2 == doctest::Approx(whole.m2).epsilon(1e-12));
}

TEST_CASE("from_blocks is invariant under block order") {
  RngStream rs(5, 0);
  std::vector<BlockMoments> blocks(8);
  for (int k = 0; k < 8; ++k) {
    blocks[static_cast<size_t>(k)].first_stream = 0x1000u ^ static_cast<uint64_t>(k * 1024);
    for (int i = 0; i < 1024; ++i)
      blocks[static_cast<size_t>(k)].add(rs.next_normal());
  }
  Estimate in_order = Estimate::from_blocks(blocks, 5, 1.0, "demo");
  std::vector<BlockMoments> shuffled{blocks[6], blocks[1], blocks[7], blocks[0],
                                     blocks[4], blocks[3], blocks[2], blocks[5]};
  Estimate reordered = Estimate::from_blocks(shuffled, 5, 1.0, "demo");
  CHECK(same_estimate(in_order, reordered));
  CHECK(in_order.n_samples == 8 * 1024);
}

TEST_CASE("merge of a whole-block partition is bit-identical to the whole") {
  RngStream rs(7, 0);
  std::vector<BlockMoments> blocks(8);
  for (int k = 0; k < 8; ++k) {
    blocks[static_cast<size_t>(k)].first_stream = 0x2000u ^ static_cast<uint64_t>(k * 1024);
    for (int i = 0; i < 500 + 97 * k; ++i)
      blocks[static_cast<size_t>(k)].add(rs.next_normal() * 0.3 + 1.0);
  }
  Estimate whole = Estimate::from_blocks(blocks, 7, 0.5, "demo");

  auto part = [&](std::vector<int> idx) {
    std::vector<BlockMoments> sub;
    for (int i : idx) sub.push_back(blocks[static_cast<size_t>(i)]);
    return Estimate::from_blocks(sub, 7, 0.5, "demo");
  };
  Estimate p1 = part({0, 3, 5});
  Estimate p2 = part({1, 2});
  Estimate p3 = part({4, 6, 7});

  Estimate m = merge({p1, p2, p3});
  CHECK(same_estimate(m, whole));
  Estimate m_rev = merge({p3, p1, p2});
  CHECK(same_estimate(m_rev, whole));
  Estimate m_id = merge({whole});
  CHECK(same_estimate(m_id, whole));
}

TEST_CASE("merge rejects label mismatch and overlapping blocks") {
  BlockMoments b1, b2;
  b1.first_stream = 1;
  b2.first_stream = 2;
  for (int i = 0; i < 10; ++i) {
    b1.add(i);
    b2.add(2 * i);
  }
  Estimate e1 = Estimate::from_blocks({b1}, 1, 1.0, "alpha");
  Estimate e2 = Estimate::from_blocks({b2}, 1, 1.0, "bravo");
  CHECK_THROWS(merge({e1, e2}));
  Estimate e3 = Estimate::from_blocks({b1}, 1, 1.0, "alpha");
  CHECK_THROWS(merge({e1, e3}));  // same first_stream appears twice
  CHECK_THROWS(merge({}));
}

TEST_CASE("control-variate gamma estimate merges independently of partition") {
  Estimate whole = estimate_gamma(1.0, 16384, 256, 11, 1);
  REQUIRE(whole.cv_blocks.size() == 16);

  auto finish_part = [&](size_t lo, size_t hi) {
    std::vector<BlockCoMoments<4>> sub(whole.cv_blocks.begin() + static_cast<long>(lo),
                                       whole.cv_blocks.begin() + static_cast<long>(hi));
    return finish_gamma_cv(sub, whole.seed, whole.beta, whole.label);
  };

  std::vector<Estimate> p2{finish_part(0, 9), finish_part(9, 16)};
  std::vector<Estimate> p8;
  for (size_t k = 0; k < 8; ++k) p8.push_back(finish_part(2 * k, 2 * k + 2));

  Estimate m1 = merge({whole});
  Estimate m2 = merge(p2);
  Estimate m8 = merge(p8);
  CHECK(same_estimate(m1, whole));
  CHECK(same_estimate(m2, whole));
  CHECK(same_estimate(m8, whole));
  std::swap(p8[0], p8[5]);
  Estimate m8s = merge(p8);
  CHECK(same_estimate(m8s, whole));
}

TEST_CASE("vector co-moment accumulator matches two-pass covariance") {
  RngStream rs(13, 0);
  const int n = 2000;
  std::vector<std::array<double, 2>> xs(n);
  for (auto& x : xs) {
    double a = rs.next_normal();
    double b = rs.next_normal();
    x = {a, 0.7 * a + 0.3 * b};
  }
  BlockCoMoments<2> cm;
  for (const auto& x : xs) cm.add(x);

  long double mx = 0.0L, my = 0.0L;
  for (const auto& x : xs) {
    mx += x[0];
    my += x[1];
  }
  mx /= n;
  my /= n;
  long double cxx = 0.0L, cxy = 0.0L, cyy = 0.0L;
  for (const auto& x : xs) {
    cxx += (x[0] - mx) * (x[0] - mx);
    cxy += (x[0] - mx) * (x[1] - my);
    cyy += (x[1] - my) * (x[1] - my);
  }
  CHECK(cm.mean[0] == doctest::Approx(static_cast<double>(mx)).epsilon(1e-12));
  CHECK(cm.mean[1] == doctest::Approx(static_cast<double>(my)).epsilon(1e-12));
  CHECK(cm.c[0] == doctest::Approx(static_cast<double>(cxx)).epsilon(1e-11));
  CHECK(cm.c[1] == doctest::Approx(static_cast<double>(cxy)).epsilon(1e-11));
  CHECK(cm.c[3] == doctest::Approx(static_cast<double>(cyy)).epsilon(1e-11));
  CHECK(cm.c[1] == cm.c[2]);

  BlockCoMoments<2> lo, hi;
  for (int i = 0; i < n / 2; ++i) lo.add(xs[static_cast<size_t>(i)]);
  for (int i = n / 2; i < n; ++i) hi.add(xs[static_cast<size_t>(i)]);
  lo.absorb(hi);
  CHECK(lo.n == cm.n);
  for (int i = 0; i < 2; ++i)
    CHECK(lo.mean[static_cast<size_t>(i)] ==
          doctest::Approx(cm.mean[static_cast<size_t>(i)]).epsilon(1e-13));
  for (int i = 0; i < 4; ++i)
    CHECK(lo.c[static_cast<size_t>(i)] ==
          doctest::Approx(cm.c[static_cast<size_t>(i)]).epsilon(1e-11));
}

TEST_CASE("standard error shrinks like one over sqrt(n)") {
  RngStream rs(17, 0);
  std::vector<BlockMoments> small(4), large(16);
  for (int k = 0; k < 16; ++k) {
    BlockMoments& b = k < 4 ? small[static_cast<size_t>(k)] : large[static_cast<size_t>(k - 4)];
    b.first_stream = static_cast<uint64_t>(k);
  }
  // same distribution, 4x the samples
  for (auto& b : small)
    for (int i = 0; i < 4096; ++i) b.add(rs.next_normal());
  for (auto& b : large)
    for (int i = 0; i < 4096; ++i) b.add(rs.next_normal());
  Estimate es = Estimate::from_blocks(small, 17, 0.0, "se");
  Estimate el = Estimate::from_blocks(large, 17, 0.0, "se");
  CHECK(el.std_error < es.std_error);
  CHECK(el.std_error / es.std_error == doctest::Approx(0.5).epsilon(0.15));
}
