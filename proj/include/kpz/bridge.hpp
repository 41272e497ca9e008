#pragma once
#include <vector>
#include "kpz/rng.hpp"

namespace kpz {

// Standard Brownian bridge on [0,1], sampled on the uniform grid y_j = j/n.
// Endpoints are pinned: values[0] == values[n] == 0 exactly.
struct BridgePath {
  std::vector<double> values;  // length n+1
  int n() const { return static_cast<int>(values.size()) - 1; }
};

// Scaled random walk minus its linear pull: B_j - (j/n) B_n with
// B_j = sqrt(1/n) * (xi_1 + ... + xi_j).  n must be a power of two >= 2 so
// grids refine dyadically.
BridgePath sample_bridge(int n, RngStream& stream);

// Allocation-free core of sample_bridge for estimator inner loops: writes the
// n+1 grid values into `values` using `xi_scratch` (capacity >= n) for the
// increments.  sample_bridge is a thin wrapper over this.
void sample_bridge_values(int n, RngStream& stream, double* values,
                          double* xi_scratch);

// Coupled refinement pair: `fine` is built from 2n increments of the stream
// and `coarse` is its even-index restriction, bit for bit.  Running an
// estimator on both members isolates quadrature error from sampling noise.
struct BridgePair {
  BridgePath coarse, fine;
};
BridgePair sample_bridge_pair(int n_coarse, RngStream& stream);

BridgePath negate(const BridgePath& p);

// Trapezoid rule on the bridge grid (half weights at the endpoints).
double trapezoid(const std::vector<double>& f);

// Partition functional T(p, beta): trapezoid rule applied to exp(beta * p).
// By Jensen this is >= exp(beta * trapezoid(p)) for every path.
double partition_functional(const BridgePath& p, double beta);

// log T(p, beta), computed with a max shift so large beta cannot overflow.
double log_partition_functional(const BridgePath& p, double beta);

}  // namespace kpz
