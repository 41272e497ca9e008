#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kpz/cylinder.hpp"
#include "kpz/estimate.hpp"
#include "kpz/lattice.hpp"

namespace kpz {

struct DecayFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
  std::pair<double, double> s_range{0.0, 0.0};
};

struct TwoSampleReport {
  double statistic = 0.0;
  double p_value = 1.0;
  int n1 = 0;
  int n2 = 0;
};

// evolves both initial laws under the same disorder, records the sup norm of
// the density difference at unit times, averages over disorder and fits a
// log-linear decay; points at or below 1e-15 truncate the fit range
DecayFit mixing_rate(double beta, const Density& nu1, const Density& nu2,
                     double t_max, int n_disorder, const CylinderConfig& cfg);

// stationary-start height increments at step s against the negated increments
// at the complementary step, compared across independent realizations by an
// energy-distance permutation test.  s_step < 0 means t_steps / 2.  With
// stationary_start = false the initial height is flat (the negative control).
TwoSampleReport reversal_statistic(double beta, int t_steps, int n_disorder,
                                   const std::vector<double>& probe_points,
                                   const CylinderConfig& cfg,
                                   bool stationary_start = true, int s_step = -1);

struct JointSamples {
  // forward rows: (height increments, corrector increments) at the probes;
  // reference rows: (-beta * W at the probes, cumulative corrector of the
  // stationary density) with the same bridge W in both halves of a row
  std::vector<std::vector<double>> forward;
  std::vector<std::vector<double>> reference;
  std::vector<int> probe_sites;
};

JointSamples collect_joint_samples(double beta, int t_steps, int n_disorder,
                                   const std::vector<double>& probe_points,
                                   const CylinderConfig& cfg);

TwoSampleReport joint_law_check(double beta, int t_steps, int n_disorder,
                                const std::vector<double>& probe_points,
                                const CylinderConfig& cfg);

// the same test on samples that were already collected
TwoSampleReport joint_law_check(const JointSamples& js, int n_permutations,
                                uint64_t seed);

// Kolmogorov-Smirnov test of samples / sqrt(t * sigma2_ref) against the
// standard normal; requires at least 200 samples
TwoSampleReport gaussian_test(const std::vector<double>& endpoint_samples,
                              double t, double sigma2_ref);

// disorder mean of the quenched endpoint variance at time t_steps * dt
Estimate quenched_variance_identity(double beta, int t_steps, int n_disorder,
                                    const CylinderConfig& cfg);

}  // namespace kpz
