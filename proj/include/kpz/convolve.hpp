#pragma once

#include <algorithm>

namespace kpz {

// out[p] += sum_i trev[i] * src[p+i] for p in [0, len); trev is the reversed
// tap row.  The i-outer form updates out elementwise in a fixed order, so it
// vectorizes without reassociating any sum.
inline void band_convolve(const double* trev, int w, const double* src,
                          double* out, int len) {
  constexpr int kTile = 1024;
  for (int base = 0; base < len; base += kTile) {
    const int cnt = std::min(kTile, len - base);
    for (int i = 0; i < w; ++i) {
      const double c = trev[i];
      const double* s = src + base + i;
      double* o = out + base;
      for (int p = 0; p < cnt; ++p) o[p] += c * s[p];
    }
  }
}

}  // namespace kpz
