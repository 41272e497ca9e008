#include "kpz/constants.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <algorithm>

#include "kpz/fastexp.hpp"
#include "kpz/parallel.hpp"

namespace kpz {

double gamma_exact(double beta) {
  double b2 = beta * beta;
  return 0.5 * b2 + b2 * b2 / 24.0;
}

SeriesReference series_reference(double beta) {
  double b2 = beta * beta, b4 = b2 * b2, b6 = b4 * b2;
  return {1.0 + b4 / 360.0, b2 + b4 / 12.0 - b6 / 360.0};
}

RescaleMap rescale(double beta, double L) {
  if (!(L > 0.0)) throw std::invalid_argument("rescale: L must be positive");
  RescaleMap m;
  m.beta_L = beta / std::sqrt(L);
  char buf[160];
  std::snprintf(buf, sizeof buf, "Sigma2(%.17g, 1) = %.17g * Sigma2(%.17g, %.17g)",
                beta, L * L, m.beta_L, L);
  m.big_sigma2_relation = buf;
  std::snprintf(buf, sizeof buf, "sigma2(%.17g, 1) = sigma2(%.17g, %.17g)",
                beta, m.beta_L, L);
  m.sigma2_relation = buf;
  return m;
}

namespace {

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

void require_grid(int n_grid) {
  if (n_grid < 2 || !is_pow2(n_grid))
    throw std::invalid_argument("estimator: n_grid must be a power of two >= 2");
}

void require_outer(int64_t n_outer) {
  if (n_outer < 1) throw std::invalid_argument("estimator: n_outer must be >= 1");
}

// trapezoid over n+1 samples of an exp-shifted array already divided by n
double trapz(const double* f, int n) {
  double acc = 0.5 * f[0];
  for (int j = 1; j < n; ++j) acc += f[j];
  acc += 0.5 * f[n];
  return acc / n;
}

// log of the trapezoid rule applied to exp(beta*w), max-shifted so that large
// beta cannot overflow; e is scratch of length n+1
double log_trapz_exp(const double* w, int n, double beta, double* e) {
  double m = beta * w[0];
  for (int j = 1; j <= n; ++j) m = std::max(m, beta * w[j]);
  for (int j = 0; j <= n; ++j) e[j] = exp_one(beta * w[j] - m);
  return m + std::log(trapz(e, n));
}

// same for a pre-formed argument array a (no beta scaling)
double log_trapz_exp_arg(const double* a, int n, double* e) {
  double m = a[0];
  for (int j = 1; j <= n; ++j) m = std::max(m, a[j]);
  for (int j = 0; j <= n; ++j) e[j] = exp_one(a[j] - m);
  return m + std::log(trapz(e, n));
}

struct GridScratch {
  std::vector<double> xi, w1, w2, w3, w2b, w3b, a, b, e, e2, u1, u2;
  void resize(int n) {
    xi.resize(n);
    for (auto* v : {&w1, &w2, &w3, &w2b, &w3b, &a, &b, &e, &e2, &u1, &u2})
      v->resize(n + 1);
  }
};

// Winding amplitude for one inner sample; sign = -1 evaluates the antithetic
// image (all paths negated).  xi_out, when given, receives the overlap
// profile.  a, e, e2 are scratch of length n+1.
double amplitude_core(double beta, const double* w1, const double* w2,
                      const double* w3, int n, int sign, double* a, double* e,
                      double* e2, double* xi_out) {
  const double sb = sign < 0 ? -beta : beta;
  // overlap profile from (w1, w2): xi_j = e^{sb (w2-w1)_j} / T^2
  for (int j = 0; j <= n; ++j) a[j] = sb * (w2[j] - w1[j]);
  double m = a[0];
  for (int j = 1; j <= n; ++j) m = std::max(m, a[j]);
  for (int j = 0; j <= n; ++j) e[j] = exp_one(a[j] - m);
  double s = trapz(e, n);
  double c = std::exp(-m - 2.0 * std::log(s));  // xi_j = e_j * c
  if (xi_out)
    for (int j = 0; j <= n; ++j) xi_out[j] = e[j] * c;
  // forward density from (w1, w3): rho_j = e2_j / (n * s2n); shift cancels
  for (int j = 0; j <= n; ++j) a[j] = sb * (w1[j] + w3[j]);
  double m2 = a[0];
  for (int j = 1; j <= n; ++j) m2 = std::max(m2, a[j]);
  for (int j = 0; j <= n; ++j) e2[j] = exp_one(a[j] - m2);
  double s2 = trapz(e2, n);
  // cumulative trapezoid of rho and final integral in one pass
  const double cuminv = 1.0 / (2.0 * n * s2);
  double f = 0.0;
  double acc = 0.0;  // integrand at j=0 is xi_0 * (0 - 0) = 0
  for (int j = 1; j <= n; ++j) {
    f += (e2[j - 1] + e2[j]) * cuminv;
    double g = (e[j] * c) * (f - static_cast<double>(j) / n);
    acc += (j < n) ? g : 0.5 * g;
  }
  return acc / n;
}

}  // namespace

XiProfile xi_profile(double beta, const BridgePath& w1, const BridgePath& w2) {
  const int n = w1.n();
  if (w2.n() != n)
    throw std::invalid_argument("xi_profile: paths on different grids");
  XiProfile out;
  out.values.resize(n + 1);
  std::vector<double> a(n + 1), e(n + 1);
  for (int j = 0; j <= n; ++j) a[j] = beta * (w2.values[j] - w1.values[j]);
  double m = a[0];
  for (int j = 1; j <= n; ++j) m = std::max(m, a[j]);
  for (int j = 0; j <= n; ++j) e[j] = exp_one(a[j] - m);
  double s = trapz(e.data(), n);
  double c = std::exp(-m - 2.0 * std::log(s));
  for (int j = 0; j <= n; ++j) out.values[j] = e[j] * c;
  return out;
}

double winding_amplitude_sample(double beta, const BridgePath& w1,
                                const BridgePath& w2, const BridgePath& w3) {
  const int n = w1.n();
  if (w2.n() != n || w3.n() != n)
    throw std::invalid_argument("winding_amplitude_sample: paths on different grids");
  std::vector<double> a(n + 1), e(n + 1), e2(n + 1);
  return amplitude_core(beta, w1.values.data(), w2.values.data(),
                        w3.values.data(), n, +1, a.data(), e.data(), e2.data(),
                        nullptr);
}

// ---------------------------------------------------------------------------
// gamma

namespace {

// regression coefficients chat solving (H + ridge I) chat = cg, where H is the
// control co-moment block and cg the cross co-moments with the integrand
void solve_controls(const BlockCoMoments<4>& t, double* chat) {
  double H[9], cg[3];
  for (int i = 0; i < 3; ++i) {
    cg[i] = t.c[0 * 4 + (i + 1)];
    for (int j = 0; j < 3; ++j) H[i * 3 + j] = t.c[(i + 1) * 4 + (j + 1)];
  }
  double ridge = (H[0] + H[4] + H[8]) * (1e-12 / 3.0) + 1e-300;
  H[0] += ridge; H[4] += ridge; H[8] += ridge;
  double L00 = std::sqrt(H[0]);
  double L10 = H[3] / L00, L20 = H[6] / L00;
  double L11 = std::sqrt(std::max(H[4] - L10 * L10, 1e-300));
  double L21 = (H[7] - L20 * L10) / L11;
  double L22 = std::sqrt(std::max(H[8] - L20 * L20 - L21 * L21, 1e-300));
  double y0 = cg[0] / L00;
  double y1 = (cg[1] - L10 * y0) / L11;
  double y2 = (cg[2] - L20 * y0 - L21 * y1) / L22;
  chat[2] = y2 / L22;
  chat[1] = (y1 - L21 * chat[2]) / L11;
  chat[0] = (y0 - L10 * chat[1] - L20 * chat[2]) / L00;
}

double corrected_mean(const BlockCoMoments<4>& t, const double* chat) {
  // controls are pre-centered by their exact means, so the correction is
  // just -chat . mean(h)
  return t.mean[0] - (chat[0] * t.mean[1] + chat[1] * t.mean[2] +
                      chat[2] * t.mean[3]);
}

}  // namespace

Estimate finish_gamma_cv(std::vector<BlockCoMoments<4>> blocks, uint64_t seed,
                         double beta, std::string label) {
  std::sort(blocks.begin(), blocks.end(),
            [](const BlockCoMoments<4>& a, const BlockCoMoments<4>& b) {
              return a.first_stream < b.first_stream;
            });
  BlockCoMoments<4> t;
  for (const auto& b : blocks) t.absorb(b);
  const int64_t n = t.n;
  Estimate e;
  e.n_samples = n;
  e.seed = seed;
  e.beta = beta;
  e.label = std::move(label);
  e.finisher = Estimate::Finisher::gamma_controls;
  const double c00 = t.c[0];
  if (n < 2048 || blocks.size() < 2) {
    // too few samples for a stable regression; plain antithetic mean
    e.value = t.mean[0];
    e.std_error = n > 1 ? std::sqrt(c00 / (static_cast<double>(n) * (n - 1))) : 0.0;
    e.cv_blocks = std::move(blocks);
    return e;
  }
  // Cross-fit by block parity: coefficients learned on one half correct the
  // other half's mean, which removes the plug-in bias of regressing and
  // averaging on the same samples.
  BlockCoMoments<4> ta, tb;
  for (size_t i = 0; i < blocks.size(); ++i)
    ((i & 1) ? tb : ta).absorb(blocks[i]);
  double ca[3], cb[3], cp[3];
  solve_controls(ta, ca);
  solve_controls(tb, cb);
  double na = static_cast<double>(ta.n), nb = static_cast<double>(tb.n);
  e.value = (nb * corrected_mean(tb, ca) + na * corrected_mean(ta, cb)) /
            (na + nb);
  // SE from the pooled regression residual; the cross-fit value has the same
  // leading-order variance
  solve_controls(t, cp);
  double resid = c00 - (cp[0] * t.c[1] + cp[1] * t.c[2] + cp[2] * t.c[3]);
  resid = std::max(resid, 0.0);
  e.std_error = std::sqrt(resid / (static_cast<double>(n) * (n - 1)));
  e.cv_blocks = std::move(blocks);
  return e;
}

Estimate estimate_gamma(double beta, int64_t n_outer, int n_grid,
                        uint64_t seed, int workers) {
  require_grid(n_grid);
  require_outer(n_outer);
  if (beta == 0.0) {
    // integrand is identically zero
    BlockMoments z;
    z.first_stream = salt::gamma_outer;
    z.n = n_outer;
    return Estimate::from_blocks({z}, seed, beta, "gamma");
  }
  const int n = n_grid;
  const int wk = workers > 0 ? workers : available_workers();
  // exact control means for the discrete bridge area A = (1/n) sum W_j:
  // Var A = (1 - 1/n^2)/12, and W_j - psi_j A is orthogonal to A with
  // psi_j = y_j(1-y_j)/(2 Var A)
  const double vA = (1.0 - 1.0 / (static_cast<double>(n) * n)) / 12.0;
  const double eh1 = std::exp(2.0 * beta * beta * vA);
  const double eh2 = 2.0 * beta * vA * eh1;
  std::vector<double> psi(n + 1);
  double muV = 0.0;
  for (int j = 0; j <= n; ++j) {
    double y = static_cast<double>(j) / n;
    double cj = 0.5 * y * (1.0 - y);
    psi[j] = cj / vA;
    if (j >= 1 && j < n) muV += y * (1.0 - y) - cj * cj / vA;
  }
  muV /= n;  // exact mean of (1/n) sum (W_j - psi_j A)^2
  const int64_t n_blocks = (n_outer + kBlockSamples - 1) / kBlockSamples;
  std::vector<BlockCoMoments<4>> blocks(n_blocks);
  const double half_b2 = 0.5 * beta * beta;
  run_blocks(n_blocks, wk, [&](int64_t bi) {
    thread_local GridScratch s;
    s.resize(n);
    BlockCoMoments<4> acc;
    const int64_t lo = bi * kBlockSamples;
    const int64_t hi = std::min<int64_t>(n_outer, lo + kBlockSamples);
    acc.first_stream = salt::gamma_outer ^ static_cast<uint64_t>(lo);
    for (int64_t i = lo; i < hi; ++i) {
      RngStream st(seed, salt::gamma_outer ^ static_cast<uint64_t>(i));
      sample_bridge_values(n, st, s.w1.data(), s.xi.data());
      const double* w = s.w1.data();
      double ltp = log_trapz_exp(w, n, beta, s.e.data());
      double ltm = log_trapz_exp(w, n, -beta, s.e.data());
      double g = 0.5 * (half_b2 * std::exp(-2.0 * ltp) +
                        half_b2 * std::exp(-2.0 * ltm));
      double A = 0.0;
      for (int j = 1; j < n; ++j) A += w[j];
      A /= n;
      double iv2 = 0.0;
      for (int j = 1; j < n; ++j) {
        double v = w[j] - psi[j] * A;
        iv2 += v * v;
      }
      iv2 /= n;
      double h1 = std::cosh(2.0 * beta * A);
      double h2 = A * std::sinh(2.0 * beta * A);
      acc.add({g, h1 - eh1, h2 - eh2, h1 * (iv2 - muV)});
    }
    blocks[bi] = acc;
  });
  return finish_gamma_cv(std::move(blocks), seed, beta, "gamma");
}

RefinementCheck gamma_refinement(double beta, int64_t n_outer, int n_coarse,
                                 uint64_t seed, int workers) {
  require_grid(n_coarse);
  require_outer(n_outer);
  const int n = n_coarse, n2 = 2 * n_coarse;
  const int wk = workers > 0 ? workers : available_workers();
  const int64_t n_blocks = (n_outer + kBlockSamples - 1) / kBlockSamples;
  std::vector<BlockMoments> bc(n_blocks), bf(n_blocks);
  const double half_b2 = 0.5 * beta * beta;
  run_blocks(n_blocks, wk, [&](int64_t bi) {
    thread_local std::vector<double> xi, wf, wc, e;
    xi.resize(n2);
    wf.resize(n2 + 1);
    wc.resize(n + 1);
    e.resize(n2 + 1);
    BlockMoments ac, af;
    const int64_t lo = bi * kBlockSamples;
    const int64_t hi = std::min<int64_t>(n_outer, lo + kBlockSamples);
    ac.first_stream = af.first_stream =
        salt::gamma_refine ^ static_cast<uint64_t>(lo);
    for (int64_t i = lo; i < hi; ++i) {
      RngStream st(seed, salt::gamma_refine ^ static_cast<uint64_t>(i));
      sample_bridge_values(n2, st, wf.data(), xi.data());
      for (int j = 0; j <= n; ++j) wc[j] = wf[2 * j];  // dyadic restriction
      double gf = 0.5 * (half_b2 * std::exp(-2.0 * log_trapz_exp(wf.data(), n2, beta, e.data())) +
                         half_b2 * std::exp(-2.0 * log_trapz_exp(wf.data(), n2, -beta, e.data())));
      double gc = 0.5 * (half_b2 * std::exp(-2.0 * log_trapz_exp(wc.data(), n, beta, e.data())) +
                         half_b2 * std::exp(-2.0 * log_trapz_exp(wc.data(), n, -beta, e.data())));
      af.add(gf);
      ac.add(gc);
    }
    bc[bi] = ac;
    bf[bi] = af;
  });
  RefinementCheck out;
  out.coarse = Estimate::from_blocks(std::move(bc), seed, beta, "gamma_coarse");
  out.fine = Estimate::from_blocks(std::move(bf), seed, beta, "gamma_fine");
  return out;
}

// ---------------------------------------------------------------------------
// Sigma2

Estimate estimate_big_sigma2(double beta, int64_t n_outer, int n_grid,
                             uint64_t seed, int workers) {
  require_grid(n_grid);
  require_outer(n_outer);
  if (beta == 0.0) {
    BlockMoments z;
    z.first_stream = salt::big_sigma;
    z.n = n_outer;
    return Estimate::from_blocks({z}, seed, beta, "big_sigma2");
  }
  const int n = n_grid;
  const int wk = workers > 0 ? workers : available_workers();
  const int64_t n_blocks = (n_outer + kBlockSamples - 1) / kBlockSamples;
  std::vector<BlockMoments> blocks(n_blocks);
  const double b2 = beta * beta;
  run_blocks(n_blocks, wk, [&](int64_t bi) {
    thread_local GridScratch s;
    s.resize(n);
    BlockMoments acc;
    const int64_t lo = bi * kBlockSamples;
    const int64_t hi = std::min<int64_t>(n_outer, lo + kBlockSamples);
    acc.first_stream = salt::big_sigma ^ static_cast<uint64_t>(lo);
    for (int64_t i = lo; i < hi; ++i) {
      RngStream st(seed, salt::big_sigma ^ static_cast<uint64_t>(i));
      sample_bridge_values(n, st, s.w1.data(), s.xi.data());
      sample_bridge_values(n, st, s.w2.data(), s.xi.data());
      sample_bridge_values(n, st, s.w2b.data(), s.xi.data());
      for (int j = 0; j <= n; ++j) {
        s.u1[j] = beta * (s.w1[j] + s.w2[j]);
        s.u2[j] = beta * (s.w1[j] + s.w2b[j]);
      }
      double lt1 = log_trapz_exp_arg(s.u1.data(), n, s.e.data());
      double lt2 = log_trapz_exp_arg(s.u2.data(), n, s.e.data());
      acc.add(b2 * std::exp(-(lt1 + lt2)));
    }
    blocks[bi] = acc;
  });
  return Estimate::from_blocks(std::move(blocks), seed, beta, "big_sigma2");
}

// ---------------------------------------------------------------------------
// sigma2

Estimate estimate_sigma2(double beta, int64_t n_outer, int n_grid,
                         uint64_t seed, int workers, bool antithetic) {
  require_grid(n_grid);
  require_outer(n_outer);
  if (beta == 0.0) {
    BlockMoments z;
    z.first_stream = salt::sigma_outer;
    z.n = n_outer;
    z.mean = 1.0;  // amplitude vanishes identically at beta = 0
    return Estimate::from_blocks({z}, seed, beta, "sigma2");
  }
  const int n = n_grid;
  const int wk = workers > 0 ? workers : available_workers();
  const int64_t n_blocks = (n_outer + kBlockSamples - 1) / kBlockSamples;
  std::vector<BlockMoments> blocks(n_blocks);
  const double b2 = beta * beta;
  run_blocks(n_blocks, wk, [&](int64_t bi) {
    thread_local GridScratch s;
    s.resize(n);
    BlockMoments acc;
    const int64_t lo = bi * kBlockSamples;
    const int64_t hi = std::min<int64_t>(n_outer, lo + kBlockSamples);
    acc.first_stream = salt::sigma_outer ^ static_cast<uint64_t>(lo);
    for (int64_t i = lo; i < hi; ++i) {
      RngStream st(seed, salt::sigma_outer ^ static_cast<uint64_t>(i));
      sample_bridge_values(n, st, s.w1.data(), s.xi.data());
      sample_bridge_values(n, st, s.w2.data(), s.xi.data());
      sample_bridge_values(n, st, s.w3.data(), s.xi.data());
      sample_bridge_values(n, st, s.w2b.data(), s.xi.data());
      sample_bridge_values(n, st, s.w3b.data(), s.xi.data());
      double a1 = amplitude_core(beta, s.w1.data(), s.w2.data(), s.w3.data(),
                                 n, +1, s.a.data(), s.e.data(), s.e2.data(), nullptr);
      double a2 = amplitude_core(beta, s.w1.data(), s.w2b.data(), s.w3b.data(),
                                 n, +1, s.a.data(), s.e.data(), s.e2.data(), nullptr);
      double v = 1.0 + b2 * a1 * a2;
      if (antithetic) {
        double a1m = amplitude_core(beta, s.w1.data(), s.w2.data(), s.w3.data(),
                                    n, -1, s.a.data(), s.e.data(), s.e2.data(), nullptr);
        double a2m = amplitude_core(beta, s.w1.data(), s.w2b.data(), s.w3b.data(),
                                    n, -1, s.a.data(), s.e.data(), s.e2.data(), nullptr);
        v = 0.5 * (v + 1.0 + b2 * a1m * a2m);
      }
      acc.add(v);
    }
    blocks[bi] = acc;
  });
  return Estimate::from_blocks(std::move(blocks), seed, beta, "sigma2");
}

// ---------------------------------------------------------------------------
// Brunet relation

static BrunetPair brunet_impl(double beta, double h, const EstimatorConfig& cfg) {
  if (!(beta > 0.0)) throw std::invalid_argument("brunet_rhs: beta must be > 0");
  if (!(h > 0.0 && h < beta / 2.0))
    throw std::invalid_argument("brunet_rhs: h must satisfy 0 < h < beta/2");
  require_grid(cfg.n_grid);
  require_outer(cfg.n_outer);
  const int n = cfg.n_grid;
  const int wk = cfg.workers > 0 ? cfg.workers : available_workers();
  const int64_t n_blocks = (cfg.n_outer + kBlockSamples - 1) / kBlockSamples;
  std::vector<BlockMoments> bh(n_blocks), bh2(n_blocks);
  const double betas[4] = {beta + h, beta - h, beta + 0.5 * h, beta - 0.5 * h};
  const double pref = -0.5 * beta * beta * beta;
  run_blocks(n_blocks, wk, [&](int64_t bi) {
    thread_local GridScratch s;
    s.resize(n);
    BlockMoments ah, ah2;
    const int64_t lo = bi * kBlockSamples;
    const int64_t hi = std::min<int64_t>(cfg.n_outer, lo + kBlockSamples);
    ah.first_stream = ah2.first_stream = salt::brunet ^ static_cast<uint64_t>(lo);
    for (int64_t i = lo; i < hi; ++i) {
      RngStream st(cfg.seed, salt::brunet ^ static_cast<uint64_t>(i));
      sample_bridge_values(n, st, s.w1.data(), s.xi.data());
      sample_bridge_values(n, st, s.w2.data(), s.xi.data());
      sample_bridge_values(n, st, s.w2b.data(), s.xi.data());
      for (int j = 0; j <= n; ++j) {
        s.u1[j] = s.w1[j] + s.w2[j];
        s.u2[j] = s.w1[j] + s.w2b[j];
      }
      // q(b) = Sigma2-sample(b) / b^4 = F(b) F'(b) / b^2 under common paths
      double q[4];
      for (int k = 0; k < 4; ++k) {
        double b = betas[k];
        double lt1 = log_trapz_exp(s.u1.data(), n, b, s.e.data());
        double lt2 = log_trapz_exp(s.u2.data(), n, b, s.e.data());
        q[k] = std::exp(-(lt1 + lt2)) / (b * b);
      }
      ah.add(pref * (q[0] - q[1]) / (2.0 * h));
      ah2.add(pref * (q[2] - q[3]) / h);
    }
    bh[bi] = ah;
    bh2[bi] = ah2;
  });
  BrunetPair out;
  out.h = h;
  out.at_h = Estimate::from_blocks(std::move(bh), cfg.seed, beta, "brunet_rhs");
  out.at_half_h =
      Estimate::from_blocks(std::move(bh2), cfg.seed, beta, "brunet_rhs_h2");
  return out;
}

Estimate brunet_rhs(double beta, double h, const EstimatorConfig& cfg) {
  return brunet_impl(beta, h, cfg).at_h;
}

BrunetPair brunet_rhs_pair(double beta, double h, const EstimatorConfig& cfg) {
  return brunet_impl(beta, h, cfg);
}

}  // namespace kpz
