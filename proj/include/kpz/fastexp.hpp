#pragma once
#include <cstdint>
#include <cstring>
#include <cmath>

namespace kpz {

// Branch-free exp suitable for auto-vectorization: 2^k * e^r with
// r = x - k*ln2 split Cody-Waite style, degree-11 Taylor on |r| <= ln2/2.
// Relative error < 2e-14 on [-700, 700]; exp_one(0) == 1 exactly.
// Used only inside Monte Carlo integrands where throughput matters; code
// paths that promise exact identities call std::exp.
inline double exp_one(double x) {
  constexpr double kLog2e   = 1.4426950408889634074;
  constexpr double kLn2Hi   = 6.93147180369123816490e-01;
  constexpr double kLn2Lo   = 1.90821492927058770002e-10;
  // clamp keeps 2^k finite; callers stay far inside this range
  if (x > 708.0) x = 708.0;
  if (x < -708.0) x = -708.0;
  double kd = std::nearbyint(x * kLog2e);
  double r = x - kd * kLn2Hi;
  r -= kd * kLn2Lo;
  // Horner, Taylor coefficients 1/11! ... 1
  double p = 2.5052108385441718775e-08;
  p = p * r + 2.7557319223985890653e-07;
  p = p * r + 2.7557319223985892511e-06;
  p = p * r + 2.4801587301587301566e-05;
  p = p * r + 1.9841269841269841253e-04;
  p = p * r + 1.3888888888888889419e-03;
  p = p * r + 8.3333333333333332177e-03;
  p = p * r + 4.1666666666666664354e-02;
  p = p * r + 1.6666666666666665741e-01;
  p = p * r + 5.0000000000000000000e-01;
  p = p * r + 1.0;
  p = p * r + 1.0;  // final two steps give 1 + r + r^2/2 + ...
  // scale by 2^k through the exponent field
  int64_t ki = static_cast<int64_t>(kd);
  uint64_t bits;
  std::memcpy(&bits, &p, 8);
  bits += static_cast<uint64_t>(ki) << 52;
  double out;
  std::memcpy(&out, &bits, 8);
  return out;
}

inline void exp_batch(const double* x, double* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = exp_one(x[i]);
}

// out[i] = exp(scale * x[i])
inline void exp_scaled_batch(const double* x, double scale, double* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = exp_one(scale * x[i]);
}

}  // namespace kpz
