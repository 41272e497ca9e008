#pragma once

#include <cstdint>
#include <vector>

namespace kpz {

double normal_cdf(double x);

struct KsResult {
  double d = 0.0;
  double p = 1.0;
  int n = 0;
};

// one-sample Kolmogorov-Smirnov against the standard normal, asymptotic
// p-value with the small-sample effective-n correction
KsResult ks_test_normal(const std::vector<double>& samples);

double ks_tail(double lambda);

struct EnergyResult {
  double statistic = 0.0;
  double p = 1.0;
  int n_perm = 0;
};

// two-sample energy distance (V-statistic over all ordered pairs) with a
// permutation p-value: p = (1 + #{E_perm >= E_obs}) / (n_perm + 1)
EnergyResult energy_permutation_test(const std::vector<std::vector<double>>& a,
                                     const std::vector<std::vector<double>>& b,
                                     int n_perm, uint64_t seed);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

LinearFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace kpz
