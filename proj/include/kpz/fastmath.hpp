#pragma once
#include <cstdint>
#include <cstring>
#include <cmath>

// Batched elementary functions for Monte Carlo inner loops.  Plain scalar C
// written so the compiler can auto-vectorize; accuracy targets are far below
// Monte Carlo noise (log: <1e-13 rel, sincos: <5e-12 abs) and every function
// is a pure deterministic map, so streams stay reproducible bit for bit.

namespace kpz {

// natural log for u in (0, 1]; not valid for u <= 0 or u > 1 + 2^-40
inline void log_batch_unit(const double* u, double* out, int n) {
  constexpr double kLn2 = 6.9314718055994530942e-01;
  for (int i = 0; i < n; ++i) {
    uint64_t bits;
    double x = u[i];
    std::memcpy(&bits, &x, 8);
    int64_t e = static_cast<int64_t>(bits >> 52) - 1023;
    bits = (bits & 0x000fffffffffffffULL) | 0x3ff0000000000000ULL;
    double m;
    std::memcpy(&m, &bits, 8);  // m in [1,2)
    // fold m into [sqrt(1/2), sqrt(2)) so |z| stays small
    if (m > 1.4142135623730951) { m *= 0.5; e += 1; }
    double z = (m - 1.0) / (m + 1.0);
    double z2 = z * z;
    // 2*atanh(z) = ln m, odd series through z^15
    double p = 1.0 / 15.0;
    p = p * z2 + 1.0 / 13.0;
    p = p * z2 + 1.0 / 11.0;
    p = p * z2 + 1.0 / 9.0;
    p = p * z2 + 1.0 / 7.0;
    p = p * z2 + 1.0 / 5.0;
    p = p * z2 + 1.0 / 3.0;
    p = p * z2 + 1.0;
    out[i] = static_cast<double>(e) * kLn2 + 2.0 * z * p;
  }
}

// sin and cos of a = twopi * t for t in [0, 1]; quadrant reduction plus
// degree 13/14 Taylor on |r| <= pi/4
inline void sincos_unit_batch(const double* t, double* s_out, double* c_out,
                              int n) {
  constexpr double kTwoPi = 6.2831853071795864769;
  constexpr double kHalfPiHi = 1.5707963267948966;       // pi/2 head
  constexpr double kHalfPiLo = 6.123233995736766e-17;    // pi/2 tail
  for (int i = 0; i < n; ++i) {
    double a = kTwoPi * t[i];
    double kd = std::nearbyint(a * 0.63661977236758134308);  // a * 2/pi
    double r = a - kd * kHalfPiHi;
    r -= kd * kHalfPiLo;
    double r2 = r * r;
    // sin(r)
    double ps = 1.5918144304485914965e-10;       // 1/13!
    ps = ps * r2 - 2.5052108385441718775e-08;    // -1/11!
    ps = ps * r2 + 2.7557319223985890653e-06;    // 1/9!
    ps = ps * r2 - 1.9841269841269841253e-04;    // -1/7!
    ps = ps * r2 + 8.3333333333333332177e-03;    // 1/5!
    ps = ps * r2 - 1.6666666666666665741e-01;    // -1/3!
    ps = ps * r2 + 1.0;
    double sr = r * ps;
    // cos(r)
    double pc = -1.1470745597729724714e-11;      // -1/14!
    pc = pc * r2 + 2.0876756987868098979e-09;    // 1/12!
    pc = pc * r2 - 2.7557319223985892511e-07;    // -1/10!
    pc = pc * r2 + 2.4801587301587301566e-05;    // 1/8!
    pc = pc * r2 - 1.3888888888888889419e-03;    // -1/6!
    pc = pc * r2 + 4.1666666666666664354e-02;    // 1/4!
    pc = pc * r2 - 0.5;
    pc = pc * r2 + 1.0;
    double cr = pc;
    // rotate by k * pi/2: q=0 (sr,cr); q=1 (cr,-sr); q=2 (-sr,-cr); q=3 (-cr,sr)
    int64_t q = static_cast<int64_t>(kd) & 3;
    bool swap = (q & 1) != 0;
    double s1 = swap ? cr : sr;
    double c1 = swap ? sr : cr;
    double sflip = (q == 2 || q == 3) ? -1.0 : 1.0;
    double cflip = (q == 1 || q == 2) ? -1.0 : 1.0;
    s_out[i] = sflip * s1;
    c_out[i] = cflip * c1;
  }
}

}  // namespace kpz
