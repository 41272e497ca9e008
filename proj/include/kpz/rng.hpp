#pragma once
#include <cstdint>
#include <cmath>
#include <algorithm>

#include "kpz/fastmath.hpp"

namespace kpz {

inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30; z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27; z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// Counter-based random stream.  The generator state is a pure function of
// (seed, stream_id), so sample i can be produced from stream (salt ^ i) by any
// worker and the result never depends on thread count or scheduling.
// Core is splitmix64: state advances by a fixed odd constant, output is a
// finalizing hash of the state.
class RngStream {
public:
  RngStream() : RngStream(0, 0) {}
  RngStream(uint64_t seed, uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    state_ = mix64(seed + 0x9e3779b97f4a7c15ULL * (stream_id + 1));
    state_ = mix64(state_ ^ 0x94d049bb133111ebULL);
  }

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_id_; }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // uniform on (0,1]; never returns 0 so log() is always safe
  double next_uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // uniform integer in [0, m)
  uint64_t next_below(uint64_t m) { return next_u64() % m; }

  // standard normal, Box-Muller over the batched log/sincos kernels (so the
  // scalar and bulk paths produce identical values); the second member of
  // each pair is cached
  double next_normal() {
    if (have_spare_) { have_spare_ = false; return spare_; }
    double u1 = next_uniform(), u2 = next_uniform(), l, s, c;
    log_batch_unit(&u1, &l, 1);
    sincos_unit_batch(&u2, &s, &c, 1);
    double r = std::sqrt(-2.0 * l);
    spare_ = r * s;
    have_spare_ = true;
    return r * c;
  }

  void fill_normals(double* dst, int count) {
    constexpr int B = 256;  // pairs per batch; buffers stay L1-resident
    double u1[B], u2[B], l[B], s[B], c[B];
    constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    int done = 0;
    while (count - done >= 2) {
      int pairs = std::min((count - done) / 2, B);
      // uniforms from the affine state progression, same sequence as
      // repeated next_uniform() calls
      for (int k = 0; k < pairs; ++k) {
        uint64_t s1 = state_ + static_cast<uint64_t>(2 * k + 1) * kGamma;
        uint64_t s2 = state_ + static_cast<uint64_t>(2 * k + 2) * kGamma;
        u1[k] = static_cast<double>((mix64(s1) >> 11) + 1) * 0x1.0p-53;
        u2[k] = static_cast<double>((mix64(s2) >> 11) + 1) * 0x1.0p-53;
      }
      state_ += static_cast<uint64_t>(2 * pairs) * kGamma;
      log_batch_unit(u1, l, pairs);
      sincos_unit_batch(u2, s, c, pairs);
      for (int k = 0; k < pairs; ++k) {
        double r = std::sqrt(-2.0 * l[k]);
        dst[done + 2 * k] = r * c[k];
        dst[done + 2 * k + 1] = r * s[k];
      }
      done += 2 * pairs;
    }
    if (done < count) dst[done] = next_normal();
  }

private:
  uint64_t seed_, stream_id_, state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Fixed experiment salts.  stream_id = salt ^ sample_index; salts differ in
// high bytes so streams from different estimators never collide for any
// realistic sample index.
namespace salt {
inline constexpr uint64_t gamma_outer    = 0x47414d4d41000000ULL;
inline constexpr uint64_t gamma_refine   = 0x47414d5246000000ULL;
inline constexpr uint64_t sigma_outer    = 0x5349474d41320000ULL;
inline constexpr uint64_t big_sigma      = 0x4249475347320000ULL;
inline constexpr uint64_t brunet         = 0x4252554e45540000ULL;
inline constexpr uint64_t disorder       = 0x4449534f52440000ULL;
inline constexpr uint64_t init_bridge    = 0x494e495442520000ULL;
inline constexpr uint64_t thermal        = 0x544845524d4c0000ULL;
inline constexpr uint64_t permutation    = 0x5045524d55540000ULL;
inline constexpr uint64_t probe_bridge   = 0x50524f4252470000ULL;
inline constexpr uint64_t control_b      = 0x434f4e54524c0000ULL;
}  // namespace salt

}  // namespace kpz
