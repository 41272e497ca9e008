#pragma once
#include <cstdint>
#include <vector>

#include "kpz/estimate.hpp"
#include "kpz/lattice.hpp"

namespace kpz {

// Joint (site, winding) density on the cylinder, density convention like
// Density: total() == sum(weights)*dx.  The invariant total + leak == initial
// mass is maintained exactly by construction: each step renormalizes the
// surviving mass and books the truncated remainder into leak.
struct WindingDensity {
  int n_sites = 0;
  int radius = 0;  // winding index k in [-radius, radius]
  std::vector<double> weights;  // index (k + radius) * n_sites + x
  double total_mass = 0.0;
  double leak = 0.0;
  double at(int k, int x) const {
    return weights[static_cast<size_t>(k + radius) * n_sites + x];
  }
  // marginal over winding: torus density comparable with evolve_density
  std::vector<double> fold() const;
  // marginal over sites: probabilities of each winding index
  std::vector<double> winding_marginal() const;
};

// Truncation radius heuristic for total time T: a 6.1-sigma Gaussian band
// inflated by 2 because disorder fattens the tails by an unknown constant.
int winding_radius(double total_time);

WindingDensity delta_winding(int n_sites, int site, int radius);

// Unwrapped evolution of the joint density: per-site disorder weights, then
// the Gaussian taps spread mass along the unwrapped line; mass pushed past
// the winding band is booked into leak.  Throws once leak exceeds 1e-8.
void evolve_winding(WindingDensity& state, const LatticeDisorder& d,
                    int from_step, int to_step);

// Quenched mean and variance of the real-line position k + x*dx (relative to
// a start at site 0).
struct QuenchedMoments {
  double x = 0.0;  // quenched mean
  double v = 0.0;  // quenched variance, >= 0
};
QuenchedMoments quenched_moments(const WindingDensity& state);

// Mean unwrapped displacement accumulated over [0, s_step] by polymer paths
// drawn with time-0 measure nu, evaluated per time-s endpoint site.  psi
// conditions the time-0 point on torus site 0; phi weights it by e^{beta W}.
// Both return E[time-0 representative - time-s position], the orientation
// pinned by psi(beta=0, y=1/4) = -1/4.
double psi(const LatticeDisorder& d, int s_step, int y_site);
double phi(const LatticeDisorder& d, const BridgePath& w1, int s_step, int y_site);
// all sites at once, snapshotted at several (ascending) step counts
std::vector<std::vector<double>> psi_profiles(const LatticeDisorder& d,
                                              const std::vector<int>& s_steps);
std::vector<std::vector<double>> phi_profiles(const LatticeDisorder& d,
                                              const BridgePath& w1,
                                              const std::vector<int>& s_steps);

// One unit-time window of the winding chain: mass from torus site x_prev to
// site x with integer winding increment j accumulated inside the window.
struct WindingKernel {
  int n_sites = 0;
  int j_radius = 0;
  std::vector<double> t;  // ((x_prev * n) + x) * (2*j_radius+1) + (j + j_radius)
  double leak = 0.0;      // worst truncated mass over start sites
  double at(int x_prev, int x, int j) const {
    return t[(static_cast<size_t>(x_prev) * n_sites + x) * (2 * j_radius + 1) +
             (j + j_radius)];
  }
  double mass(int x_prev, int x) const;
  double moment1(int x_prev, int x) const;
};
WindingKernel unit_winding_kernel(const LatticeDisorder& d, int window_index);
std::vector<WindingKernel> winding_chain(const LatticeDisorder& d, int n_windows);

// law of the winding increment over one window given the window's two
// endpoint sites; sums to 1
std::vector<double> eta_law(const WindingKernel& k, int x_prev_site, int x_site);

// Expected net unwrapped displacement of the time-0 point relative to the
// time-s point, computed through the unit-window chain with endpoint
// measures mu (time s) and nu (time 0).  psi and phi are the delta_0 and
// bridge-weight specializations of this quantity.
double winding_number(const LatticeDisorder& d, int s_step, const Density& mu,
                      const Density& nu);
double winding_number(const std::vector<WindingKernel>& chain, const Density& mu,
                      const Density& nu);

// Uniform endpoint average of the conditional time-0 densities under initial
// weight e^{beta W1}; integrates to 1.  tilde_phi is its running centered
// integral with tilde_phi[0] == 0.
Density tilde_g(const LatticeDisorder& d, const BridgePath& w1, int t_step);
std::vector<double> tilde_phi(const Density& g);

struct CylinderConfig {
  int n_sites = 64;
  double dt = 1.0 / 64;
  uint64_t seed = 0;
  int workers = 0;    // 0 = available_workers()
  int n_thermal = 2;  // endpoint draws per disorder realization
  int n_permutations = 999;  // resampling rounds for permutation tests
};

// Disorder-averaged endpoint statistics from a delta start at site 0:
// annealed variance per unit time with SE, its quenched/mean-square split,
// per-draw samples, and thermal endpoint draws for distribution tests.
struct AnnealedStats {
  Estimate v_over_t;                     // mean of (X^2 + V)/t
  double mean_x2 = 0.0;                  // mean of X_t^2
  double mean_qvar = 0.0;                // mean of quenched variance V_t
  double t_phys = 0.0;
  std::vector<double> x_samples;         // X_t per kept draw
  std::vector<double> qvar_samples;      // V_t per kept draw
  std::vector<double> endpoint_samples;  // thermal endpoint positions
  int n_excluded = 0;                    // draws dropped for leak overflow
};
AnnealedStats annealed_stats(double beta, int t_steps, int n_disorder,
                             const CylinderConfig& cfg);

}  // namespace kpz
