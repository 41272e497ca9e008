#include "kpz/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "kpz/bridge.hpp"
#include "kpz/parallel.hpp"
#include "kpz/rng.hpp"
#include "kpz/stats.hpp"

namespace kpz {

namespace {

constexpr double kFitFloor = 1e-15;

int unit_steps(double dt) {
  int spu = static_cast<int>(std::lround(1.0 / dt));
  if (spu < 1 || std::fabs(spu * dt - 1.0) > 1e-9)
    throw std::invalid_argument("diagnostics: dt must divide the unit time interval");
  return spu;
}

std::vector<int> probe_sites(const std::vector<double>& probe_points, int n) {
  if (probe_points.empty())
    throw std::invalid_argument("diagnostics: need at least one probe point");
  std::vector<int> sites;
  sites.reserve(probe_points.size());
  for (double p : probe_points) {
    if (!(p >= 0.0) || !(p < 1.0))
      throw std::invalid_argument("diagnostics: probe points must lie in [0, 1)");
    sites.push_back(static_cast<int>(std::lround(p * n)) % n);
  }
  return sites;
}

}  // namespace

DecayFit mixing_rate(double beta, const Density& nu1, const Density& nu2,
                     double t_max, int n_disorder, const CylinderConfig& cfg) {
  const int n = nu1.n();
  if (nu2.n() != n) throw std::invalid_argument("mixing_rate: density sizes differ");
  if (!(t_max >= 4.0)) throw std::invalid_argument("mixing_rate: t_max must be >= 4");
  if (n_disorder < 1) throw std::invalid_argument("mixing_rate: need n_disorder >= 1");
  const int spu = unit_steps(cfg.dt);
  const int n_units = static_cast<int>(std::lround(t_max));

  const int kDrawsPerBlock = 8;
  const int n_blocks = (n_disorder + kDrawsPerBlock - 1) / kDrawsPerBlock;
  std::vector<std::vector<double>> partial(
      static_cast<size_t>(n_blocks),
      std::vector<double>(static_cast<size_t>(n_units) + 1, 0.0));

  run_blocks(n_blocks, cfg.workers, [&](int b) {
    const int lo = b * kDrawsPerBlock;
    const int hi = std::min(n_disorder, lo + kDrawsPerBlock);
    std::vector<double>& acc = partial[static_cast<size_t>(b)];
    for (int r = lo; r < hi; ++r) {
      const uint64_t seed_r = realization_seed(cfg.seed, static_cast<uint64_t>(r));
      LatticeDisorder d = make_disorder(n_units * spu, n, cfg.dt, beta, seed_r);
      Density a = nu1, bdens = nu2;
      double sup0 = 0.0;
      for (int x = 0; x < n; ++x)
        sup0 = std::max(sup0, std::fabs(a.weights[x] - bdens.weights[x]));
      acc[0] += sup0;
      for (int u = 0; u < n_units; ++u) {
        a = evolve_density(a, d, u * spu, (u + 1) * spu);
        bdens = evolve_density(bdens, d, u * spu, (u + 1) * spu);
        double sup = 0.0;
        for (int x = 0; x < n; ++x)
          sup = std::max(sup, std::fabs(a.weights[x] - bdens.weights[x]));
        acc[static_cast<size_t>(u) + 1] += sup;
      }
    }
  });

  std::vector<double> mean(static_cast<size_t>(n_units) + 1, 0.0);
  for (const auto& acc : partial)
    for (size_t k = 0; k < mean.size(); ++k) mean[k] += acc[k];
  for (double& v : mean) v /= n_disorder;

  std::vector<double> ts, logs;
  for (size_t k = 0; k < mean.size(); ++k) {
    if (!(mean[k] > kFitFloor)) break;  // machine floor reached
    ts.push_back(static_cast<double>(k));
    logs.push_back(std::log(mean[k]));
  }
  if (ts.size() < 2)
    throw std::runtime_error(
        "mixing_rate: degenerate fit, fewer than two difference points above "
        "the machine floor");
  LinearFit lf = least_squares(ts, logs);
  DecayFit fit;
  fit.rate = -lf.slope;
  fit.intercept = lf.intercept;
  fit.r_squared = lf.r_squared;
  fit.s_range = {ts.front(), ts.back()};
  return fit;
}

namespace {

// height increments at the probe sites after `steps` transfer steps, starting
// either from the stationary initial weight exp(beta W) with a fresh bridge or
// from a flat profile
std::vector<double> increment_row(double beta, int steps, int n,
                                  const CylinderConfig& cfg, uint64_t seed_r,
                                  bool stationary, const std::vector<int>& sites) {
  BridgePath w1;
  if (stationary) {
    RngStream bs(seed_r, salt::init_bridge);
    w1 = sample_bridge(n, bs);
  } else {
    w1.values.assign(static_cast<size_t>(n) + 1, 0.0);
  }
  LatticeDisorder d = make_disorder(steps, n, cfg.dt, beta, seed_r);
  HeightField hf = stationary_height(w1, d, steps);
  std::vector<double> row;
  row.reserve(sites.size());
  for (int s : sites) row.push_back(hf.increments[static_cast<size_t>(s)]);
  return row;
}

}  // namespace

TwoSampleReport reversal_statistic(double beta, int t_steps, int n_disorder,
                                   const std::vector<double>& probe_points,
                                   const CylinderConfig& cfg,
                                   bool stationary_start, int s_step) {
  if (t_steps < 2) throw std::invalid_argument("reversal_statistic: need t_steps >= 2");
  if (n_disorder < 2)
    throw std::invalid_argument("reversal_statistic: need n_disorder >= 2");
  if (s_step < 0) s_step = t_steps / 2;
  if (s_step < 1 || s_step >= t_steps)
    throw std::invalid_argument("reversal_statistic: s_step outside (0, t_steps)");
  const int n = cfg.n_sites;
  const std::vector<int> sites = probe_sites(probe_points, n);

  std::vector<std::vector<double>> a(static_cast<size_t>(n_disorder)),
      b(static_cast<size_t>(n_disorder));
  const int kDrawsPerBlock = 16;
  const int total = 2 * n_disorder;
  const int n_blocks = (total + kDrawsPerBlock - 1) / kDrawsPerBlock;
  run_blocks(n_blocks, cfg.workers, [&](int blk) {
    const int lo = blk * kDrawsPerBlock;
    const int hi = std::min(total, lo + kDrawsPerBlock);
    for (int r = lo; r < hi; ++r) {
      const uint64_t seed_r = realization_seed(cfg.seed, static_cast<uint64_t>(r));
      if (r < n_disorder) {
        a[static_cast<size_t>(r)] =
            increment_row(beta, s_step, n, cfg, seed_r, stationary_start, sites);
      } else {
        std::vector<double> row = increment_row(beta, t_steps - s_step, n, cfg,
                                                seed_r, stationary_start, sites);
        for (double& v : row) v = -v;
        b[static_cast<size_t>(r - n_disorder)] = std::move(row);
      }
    }
  });

  EnergyResult er = energy_permutation_test(a, b, cfg.n_permutations, cfg.seed);
  TwoSampleReport rep;
  rep.statistic = er.statistic;
  rep.p_value = er.p;
  rep.n1 = n_disorder;
  rep.n2 = n_disorder;
  return rep;
}

JointSamples collect_joint_samples(double beta, int t_steps, int n_disorder,
                                   const std::vector<double>& probe_points,
                                   const CylinderConfig& cfg) {
  if (t_steps < 1)
    throw std::invalid_argument("collect_joint_samples: need t_steps >= 1");
  if (n_disorder < 2)
    throw std::invalid_argument("collect_joint_samples: need n_disorder >= 2");
  const int n = cfg.n_sites;
  const std::vector<int> sites = probe_sites(probe_points, n);
  const int m = static_cast<int>(sites.size());

  JointSamples js;
  js.probe_sites = sites;
  js.forward.assign(static_cast<size_t>(n_disorder), {});
  js.reference.assign(static_cast<size_t>(n_disorder), {});

  const int kDrawsPerBlock = 8;
  const int total = 2 * n_disorder;
  const int n_blocks = (total + kDrawsPerBlock - 1) / kDrawsPerBlock;
  run_blocks(n_blocks, cfg.workers, [&](int blk) {
    const int lo = blk * kDrawsPerBlock;
    const int hi = std::min(total, lo + kDrawsPerBlock);
    for (int r = lo; r < hi; ++r) {
      const uint64_t seed_r = realization_seed(cfg.seed, static_cast<uint64_t>(r));
      RngStream bs(seed_r, salt::init_bridge);
      BridgePath w1 = sample_bridge(n, bs);
      LatticeDisorder d = make_disorder(t_steps, n, cfg.dt, beta, seed_r);
      std::vector<double> row(static_cast<size_t>(2 * m));
      if (r < n_disorder) {
        HeightField hf = stationary_height(w1, d, t_steps);
        std::vector<double> prof = phi_profiles(d, w1, {t_steps})[0];
        for (int k = 0; k < m; ++k) {
          row[static_cast<size_t>(k)] = hf.increments[static_cast<size_t>(sites[k])];
          row[static_cast<size_t>(m + k)] =
              prof[static_cast<size_t>(sites[k])] - prof[0];
        }
        js.forward[static_cast<size_t>(r)] = std::move(row);
      } else {
        Density g = tilde_g(d, w1, t_steps);
        std::vector<double> ph = tilde_phi(g);
        for (int k = 0; k < m; ++k) {
          row[static_cast<size_t>(k)] = -beta * w1.values[static_cast<size_t>(sites[k])];
          row[static_cast<size_t>(m + k)] = ph[static_cast<size_t>(sites[k])];
        }
        js.reference[static_cast<size_t>(r - n_disorder)] = std::move(row);
      }
    }
  });
  return js;
}

TwoSampleReport joint_law_check(const JointSamples& js, int n_permutations,
                                uint64_t seed) {
  TwoSampleReport rep;
  rep.n1 = static_cast<int>(js.forward.size());
  rep.n2 = static_cast<int>(js.reference.size());
  EnergyResult er =
      energy_permutation_test(js.forward, js.reference, n_permutations, seed);
  rep.statistic = er.statistic;
  // two point masses within rounding of each other (the beta=0 case) are one
  // law, not a detectable difference
  rep.p_value = er.statistic <= 1e-12 ? 1.0 : er.p;
  return rep;
}

TwoSampleReport joint_law_check(double beta, int t_steps, int n_disorder,
                                const std::vector<double>& probe_points,
                                const CylinderConfig& cfg) {
  JointSamples js = collect_joint_samples(beta, t_steps, n_disorder, probe_points, cfg);
  return joint_law_check(js, cfg.n_permutations, cfg.seed);
}

TwoSampleReport gaussian_test(const std::vector<double>& endpoint_samples,
                              double t, double sigma2_ref) {
  if (endpoint_samples.size() < 200)
    throw std::invalid_argument("gaussian_test: need at least 200 samples");
  if (!(t > 0.0) || !(sigma2_ref > 0.0))
    throw std::invalid_argument("gaussian_test: need positive t and sigma2_ref");
  const double scale = 1.0 / std::sqrt(t * sigma2_ref);
  std::vector<double> z;
  z.reserve(endpoint_samples.size());
  for (double x : endpoint_samples) z.push_back(x * scale);
  KsResult ks = ks_test_normal(z);
  TwoSampleReport rep;
  rep.statistic = ks.d;
  rep.p_value = ks.p;
  rep.n1 = ks.n;
  rep.n2 = 0;
  return rep;
}

Estimate quenched_variance_identity(double beta, int t_steps, int n_disorder,
                                    const CylinderConfig& cfg) {
  CylinderConfig c = cfg;
  c.n_thermal = 0;
  AnnealedStats st = annealed_stats(beta, t_steps, n_disorder, c);
  const int kPerBlock = 64;
  std::vector<BlockMoments> blocks;
  for (size_t i = 0; i < st.qvar_samples.size(); ++i) {
    if (i % kPerBlock == 0) {
      blocks.emplace_back();
      blocks.back().first_stream = salt::disorder ^ static_cast<uint64_t>(i);
    }
    blocks.back().add(st.qvar_samples[i]);
  }
  if (blocks.empty())
    throw std::runtime_error("quenched_variance_identity: no usable draws");
  return Estimate::from_blocks(blocks, cfg.seed, beta, "quenched_variance_mean");
}

}  // namespace kpz
