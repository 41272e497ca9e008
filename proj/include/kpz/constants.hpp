#pragma once
#include <cstdint>
#include <string>
#include <vector>
#include "kpz/bridge.hpp"
#include "kpz/estimate.hpp"

namespace kpz {

// Closed form gamma(beta) = beta^2/2 + beta^4/24.
double gamma_exact(double beta);

// Small-beta expansions: sigma2 = 1 + beta^4/360, Sigma2 = beta^2 + beta^4/12
// - beta^6/360.  Reference values only; they degrade as beta grows.
struct SeriesReference {
  double sigma2_series;
  double big_sigma2_series;
};
SeriesReference series_reference(double beta);

// gamma(beta) = (beta^2/2) E[ T(W,beta)^-2 ] over Brownian bridges W, with
// antithetic pairing (W, -W) and a control-variate regression on three
// functionals of the bridge area whose means are known exactly.  The controls
// do not change the estimand; they exist to meet the standard-error budget at
// beta = 2.
Estimate estimate_gamma(double beta, int64_t n_outer, int n_grid,
                        uint64_t seed, int workers = 0);

// Sigma2(beta) = beta^2 E_W1[ (E_W2[ 1/T(W1+W2,beta) ])^2 ]; the inner square
// is estimated without bias by the product of two independent W2 draws.
Estimate estimate_big_sigma2(double beta, int64_t n_outer, int n_grid,
                             uint64_t seed, int workers = 0);

// sigma2(beta) = 1 + beta^2 E_W1[ (E_{W2,W3}[ amplitude ])^2 ], estimated by
// the product of two independent inner (W2, W3) pairs sharing W1.  Antithetic
// pairing is off by default (it interacts with the product structure).
Estimate estimate_sigma2(double beta, int64_t n_outer, int n_grid,
                         uint64_t seed, int workers = 0,
                         bool antithetic = false);

// Two-replica overlap profile for one inner sample:
// values[j] = e^{beta (W2-W1)(y_j)} / T(W2-W1, beta)^2.  Strictly positive.
struct XiProfile {
  std::vector<double> values;
};
XiProfile xi_profile(double beta, const BridgePath& w1, const BridgePath& w2);

// One inner sample of the winding amplitude:
//   A = int_0^1 Xi(y) (F13(y) - y) dy,
// where Xi comes from (w1, w2) as above and F13 is the cumulative of the
// normalized density e^{beta (W1+W3)} / T(W1+W3, beta).
double winding_amplitude_sample(double beta, const BridgePath& w1,
                                const BridgePath& w2, const BridgePath& w3);

struct EstimatorConfig {
  int64_t n_outer = 100000;
  int n_grid = 1024;
  uint64_t seed = 0;
  int workers = 0;  // 0 = available_workers()
};

// Brunet relation right-hand side: -(beta^3/2) d/dbeta [Sigma2(beta)/beta^4],
// estimated as a single Monte Carlo average of the per-sample central
// difference quotient under common random numbers.  The (h, h/2) pair exposes
// the O(h^2) discretization term.
Estimate brunet_rhs(double beta, double h, const EstimatorConfig& cfg);
struct BrunetPair {
  Estimate at_h;
  Estimate at_half_h;
  double h;
};
BrunetPair brunet_rhs_pair(double beta, double h, const EstimatorConfig& cfg);

// Scaling map between the unit torus and a torus of size L:
// Sigma2(beta, 1) = L^2 Sigma2(beta/sqrt(L), L), sigma2(beta,1) =
// sigma2(beta/sqrt(L), L).
struct RescaleMap {
  double beta_L;
  std::string sigma2_relation;
  std::string big_sigma2_relation;
};
RescaleMap rescale(double beta, double L);

// Quadrature refinement check: gamma estimated on coupled grids (n_coarse and
// 2 n_coarse) where the coarse bridge is the even-index restriction of the
// fine one, so the discrepancy isolates quadrature error from sampling noise.
struct RefinementCheck {
  Estimate coarse, fine;
};
RefinementCheck gamma_refinement(double beta, int64_t n_outer, int n_coarse,
                                 uint64_t seed, int workers = 0);

// Finishes a pooled control-variate accumulator into a gamma estimate; shared
// by estimate_gamma and merge so refolds reproduce values bit for bit.
Estimate finish_gamma_cv(std::vector<BlockCoMoments<4>> blocks, uint64_t seed,
                         double beta, std::string label);

}  // namespace kpz
