#pragma once
#include <cstdint>
#include <vector>

#include "kpz/bridge.hpp"

namespace kpz {

// Gaussian step taps on the integer displacement lattice, truncated where the
// unwrapped tail mass drops below 1e-14.  One tap set drives both the
// periodic evolution (through fold_taps) and the unwrapped winding evolution,
// so the two routes agree tap for tap.
struct StepKernelTaps {
  std::vector<double> taps;  // displacement j in [-radius, radius] at index j+radius
  int radius = 0;
  double dt = 0.0, dx = 0.0;
  double tap(int j) const { return taps[static_cast<size_t>(j + radius)]; }
  int width() const { return 2 * radius + 1; }
};
StepKernelTaps make_step_taps(double dt, double dx);

// Torus-folded views of the same taps: the mass row (adjusted in its last
// entry so an in-order sum returns exactly 1) plus displacement-moment rows
// used for moment propagation on the cylinder.
struct FoldedKernels {
  int n_sites = 0;
  std::vector<double> mass;   // mass[o] = sum of taps over j = o (mod n)
  std::vector<double> disp1;  // sum of (j*dx)   * tap over the same classes
  std::vector<double> disp2;  // sum of (j*dx)^2 * tap
};
FoldedKernels fold_taps(const StepKernelTaps& taps, int n_sites);

// Cell-averaged white noise driving one realization: i.i.d. standard normals
// per (step, site).  Rows regenerate exactly from (seed, shape).
struct LatticeDisorder {
  int n_steps = 0, n_sites = 0;
  double dt = 0.0, dx = 0.0, beta = 0.0;
  uint64_t seed = 0;
  std::vector<double> gaussians;  // row-major (step, site)
  const double* row(int step) const {
    return gaussians.data() + static_cast<size_t>(step) * n_sites;
  }
};
LatticeDisorder make_disorder(int n_steps, int n_sites, double dt, double beta,
                              uint64_t seed);

// Derives an independent realization seed from a base seed and index.
uint64_t realization_seed(uint64_t base_seed, uint64_t index);

// Multiplicative weight row for one step: w = exp(beta*g*sqrt(dt/dx)
// - beta^2*dt/(2dx)); the compensator makes E[w] = 1, so the disorder mean
// of the evolution is the pure heat flow.
void weight_row(const LatticeDisorder& d, int step, double* w);

// Probability density on the torus sites; sum(weights)*dx == 1 within 1e-12.
struct Density {
  std::vector<double> weights;
  int n() const { return static_cast<int>(weights.size()); }
};
Density uniform_density(int n);
Density delta_density(int n, int site);
// e^{beta W} normalized by its lattice sum; bridge grid must equal n_sites.
Density bridge_density(double beta, const BridgePath& w);
// Divides by total mass; throws on vanishing or non-finite mass.
void renormalize(Density& d, double dx);

// Linear field carried as values * 2^exponent; rescaling uses ldexp only, so
// the represented field is exact regardless of when renormalization fires.
struct ScaledField {
  std::vector<double> values;
  int exponent = 0;
};

// Repeated application of Z <- K * (Z . w) over steps [from_step, to_step).
// evolve_field keeps the raw linear solution (exact power-of-two rescaling);
// evolve_density renormalizes to a probability density after every step.
[[nodiscard]] ScaledField evolve_field(std::vector<double> z0, const LatticeDisorder& d,
                         int from_step, int to_step);
[[nodiscard]] Density evolve_density(const Density& init, const LatticeDisorder& d,
                       int from_step, int to_step);

// Transposed counterpart of evolve_field: applies the adjoint transfer steps
// in reverse order (convolve, then weight), so for any fields z, v over the
// same window, <evolve_field(z), v> == <z, evolve_adjoint(v)> after scaling
// each side by 2^exponent.  This turns sums over all start points into a
// single backward pass instead of a dense propagator build.
[[nodiscard]] ScaledField evolve_adjoint(std::vector<double> v, const LatticeDisorder& d,
                           int from_step, int to_step);

// Dense two-point transfer kernel in density convention: at(x_to, y_from) is
// the mass density at x_to for a unit point mass started at y_from, stored
// start-major (entries[y_from * n + x_to]) so one start's row is contiguous.
struct PropagatorMatrix {
  int n_sites = 0;
  int t_from = 0, t_to = 0;
  std::vector<double> entries;
  double at(int x_to, int y_from) const {
    return entries[static_cast<size_t>(y_from) * n_sites + x_to];
  }
  double& at(int x_to, int y_from) {
    return entries[static_cast<size_t>(y_from) * n_sites + x_to];
  }
};

// One-step periodized Gaussian transition matrix in probability convention:
// every row sums to exactly 1.
PropagatorMatrix step_kernel(double dt, int n_sites);

// Product of per-step transfer matrices over [s_step, t_step]; density
// convention, so s_step == t_step returns identity/dx.
PropagatorMatrix propagator(const LatticeDisorder& d, int s_step, int t_step);

enum class Direction { forward, backward };

// Normalized image of init under the propagator: forward maps an initial
// measure to the endpoint law, backward maps a terminal measure to the law of
// the start point.
Density endpoint_density(const PropagatorMatrix& prop, const Density& init,
                         Direction direction);

// Pointwise product of the backward density from `terminal` over [s,t] and
// the forward density from `initial` over [0,s], normalized.
Density midpoint_density(const LatticeDisorder& d, int t_step, int s_step,
                         const Density& terminal, const Density& initial);

// Height (log partition) field started from e^{beta W1}; only increments
// h(x) - h(0) are meaningful to consumers.
struct HeightField {
  std::vector<double> h;
  std::vector<double> increments;  // increments[0] == 0
};
HeightField stationary_height(const BridgePath& w1, const LatticeDisorder& d,
                              int t_step);

}  // namespace kpz
