#pragma once
#include <cstdint>
#include <cmath>
#include <string>
#include <vector>
#include <array>
#include <algorithm>
#include <stdexcept>

namespace kpz {

// One Welford accumulator covering a contiguous block of sample indices.
// first_stream identifies the block (salt ^ first_sample_index) and defines
// the canonical merge order.
struct BlockMoments {
  uint64_t first_stream = 0;
  int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations

  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }

  // Chan combine; only ever applied in canonical block order
  void absorb(const BlockMoments& b) {
    if (b.n == 0) return;
    if (n == 0) { *this = b; return; }
    double na = static_cast<double>(n), nb = static_cast<double>(b.n);
    double d = b.mean - mean;
    double nt = na + nb;
    mean += d * (nb / nt);
    m2 += b.m2 + d * d * (na * nb / nt);
    n += b.n;
  }
};

// Vector accumulator: mean and centered co-moment matrix for D-dimensional
// samples, used by control-variate regressions.  Same blocked-merge contract
// as BlockMoments.
template <int D>
struct BlockCoMoments {
  uint64_t first_stream = 0;
  int64_t n = 0;
  std::array<double, D> mean{};
  std::array<double, D * D> c{};  // sum of centered cross products

  void add(const std::array<double, D>& x) {
    ++n;
    double inv = 1.0 / static_cast<double>(n);
    std::array<double, D> d;
    for (int i = 0; i < D; ++i) d[i] = x[i] - mean[i];
    for (int i = 0; i < D; ++i) mean[i] += d[i] * inv;
    double w = static_cast<double>(n - 1) * inv;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        c[i * D + j] += w * d[i] * d[j];
  }

  void absorb(const BlockCoMoments& b) {
    if (b.n == 0) return;
    if (n == 0) { *this = b; return; }
    double na = static_cast<double>(n), nb = static_cast<double>(b.n);
    double nt = na + nb;
    std::array<double, D> d;
    for (int i = 0; i < D; ++i) d[i] = b.mean[i] - mean[i];
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        c[i * D + j] += b.c[i * D + j] + d[i] * d[j] * (na * nb / nt);
    for (int i = 0; i < D; ++i) mean[i] += d[i] * (nb / nt);
    n += b.n;
  }
};

// Point estimate with Monte Carlo standard error.  `blocks` (or `cv_blocks`
// for the control-variate gamma estimator) retains the per-block accumulators
// sorted by first_stream, so that merging partial estimates reproduces the
// single-pass block fold bit for bit no matter how the sample range was
// partitioned across workers.
struct Estimate {
  enum class Finisher { mean, gamma_controls };

  double value = 0.0;
  double std_error = 0.0;
  int64_t n_samples = 0;
  uint64_t seed = 0;
  double beta = 0.0;
  std::string label;
  Finisher finisher = Finisher::mean;
  std::vector<BlockMoments> blocks;
  std::vector<BlockCoMoments<4>> cv_blocks;

  static Estimate from_blocks(std::vector<BlockMoments> blocks,
                              uint64_t seed, double beta, std::string label) {
    std::sort(blocks.begin(), blocks.end(),
              [](const BlockMoments& a, const BlockMoments& b) {
                return a.first_stream < b.first_stream;
              });
    BlockMoments total;
    for (const auto& b : blocks) total.absorb(b);
    Estimate e;
    e.value = total.mean;
    e.n_samples = total.n;
    e.std_error = total.n > 1
        ? std::sqrt(total.m2 / (static_cast<double>(total.n) *
                                static_cast<double>(total.n - 1)))
        : 0.0;
    e.seed = seed;
    e.beta = beta;
    e.label = std::move(label);
    e.blocks = std::move(blocks);
    return e;
  }
};

}  // namespace kpz
