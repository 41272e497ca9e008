#include "kpz/lattice.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "kpz/convolve.hpp"
#include "kpz/fastexp.hpp"
#include "kpz/rng.hpp"

namespace kpz {

StepKernelTaps make_step_taps(double dt, double dx) {
  if (!(dt > 0.0) || !(dx > 0.0))
    throw std::invalid_argument("make_step_taps: dt and dx must be positive");
  // tail mass beyond 7.8 sigma is below 1e-14; +1 tap of margin
  double sigma = std::sqrt(dt);
  int radius = static_cast<int>(std::ceil(7.8 * sigma / dx)) + 1;
  StepKernelTaps k;
  k.radius = radius;
  k.dt = dt;
  k.dx = dx;
  k.taps.resize(static_cast<size_t>(2 * radius + 1));
  const double inv2t = 1.0 / (2.0 * dt);
  for (int j = -radius; j <= radius; ++j) {
    double x = j * dx;
    k.taps[static_cast<size_t>(j + radius)] = std::exp(-x * x * inv2t);
  }
  double total = 0.0;
  for (double v : k.taps) total += v;
  for (double& v : k.taps) v /= total;
  return k;
}

FoldedKernels fold_taps(const StepKernelTaps& taps, int n_sites) {
  if (n_sites < 2) throw std::invalid_argument("fold_taps: n_sites must be >= 2");
  FoldedKernels f;
  f.n_sites = n_sites;
  f.mass.assign(static_cast<size_t>(n_sites), 0.0);
  f.disp1.assign(static_cast<size_t>(n_sites), 0.0);
  f.disp2.assign(static_cast<size_t>(n_sites), 0.0);
  for (int j = -taps.radius; j <= taps.radius; ++j) {
    int o = ((j % n_sites) + n_sites) % n_sites;
    double t = taps.tap(j);
    double d = j * taps.dx;
    f.mass[o] += t;
    f.disp1[o] += d * t;
    f.disp2[o] += d * d * t;
  }
  // pin the in-order sum of the mass row to exactly 1: the last entry picks
  // up the rounding residual (a few ulps against an O(1/n) entry)
  double partial = 0.0;
  for (int o = 0; o + 1 < n_sites; ++o) partial += f.mass[o];
  f.mass[static_cast<size_t>(n_sites - 1)] = 1.0 - partial;
  return f;
}

LatticeDisorder make_disorder(int n_steps, int n_sites, double dt, double beta,
                              uint64_t seed) {
  if (n_steps < 0) throw std::invalid_argument("make_disorder: n_steps must be >= 0");
  if (n_sites < 2) throw std::invalid_argument("make_disorder: n_sites must be >= 2");
  if (!(dt > 0.0)) throw std::invalid_argument("make_disorder: dt must be positive");
  LatticeDisorder d;
  d.n_steps = n_steps;
  d.n_sites = n_sites;
  d.dt = dt;
  d.dx = 1.0 / n_sites;
  d.beta = beta;
  d.seed = seed;
  d.gaussians.resize(static_cast<size_t>(n_steps) * n_sites);
  for (int k = 0; k < n_steps; ++k) {
    RngStream s(seed, salt::disorder ^ static_cast<uint64_t>(k));
    s.fill_normals(d.gaussians.data() + static_cast<size_t>(k) * n_sites, n_sites);
  }
  return d;
}

uint64_t realization_seed(uint64_t base_seed, uint64_t index) {
  return RngStream(base_seed, salt::disorder ^ index).next_u64();
}

void weight_row(const LatticeDisorder& d, int step, double* w) {
  if (step < 0 || step >= d.n_steps)
    throw std::out_of_range("weight_row: step " + std::to_string(step) +
                            " outside disorder shape");
  const double scale = d.beta * std::sqrt(d.dt / d.dx);
  const double shift = -d.beta * d.beta * d.dt / (2.0 * d.dx);
  const double* g = d.row(step);
  const int n = d.n_sites;
  for (int i = 0; i < n; ++i) w[i] = exp_one(scale * g[i] + shift);
}

Density uniform_density(int n) {
  // 1/(n*dx) = 1 for dx = 1/n
  Density d;
  d.weights.assign(static_cast<size_t>(n), 1.0);
  return d;
}

Density delta_density(int n, int site) {
  if (site < 0 || site >= n) throw std::out_of_range("delta_density: site outside lattice");
  Density d;
  d.weights.assign(static_cast<size_t>(n), 0.0);
  d.weights[static_cast<size_t>(site)] = static_cast<double>(n);  // 1/dx
  return d;
}

Density bridge_density(double beta, const BridgePath& w) {
  int n = w.n();
  Density d;
  d.weights.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) d.weights[i] = std::exp(beta * w.values[i]);
  renormalize(d, 1.0 / n);
  return d;
}

void renormalize(Density& d, double dx) {
  double total = 0.0;
  for (double v : d.weights) total += v;
  total *= dx;
  if (!(total > 1e-300) || !std::isfinite(total))
    throw std::runtime_error("renormalize: density mass vanished or diverged");
  double inv = 1.0 / total;
  for (double& v : d.weights) v *= inv;
}

namespace {

// out[x] = sum_o mass[o] * in[(x-o) mod n].  When the raw tap band is
// narrower than the torus it stays a band (cost n*width); otherwise the
// torus-folded mass row is used as a dense circular row (cost n^2).  Both
// run as contiguous dots or AXPYs over a duplicated input buffer.
struct TransferPlan {
  std::vector<double> row;   // reversed taps (sparse) or reversed mass row
  std::vector<double> rowt;  // the same rows unreversed, for the transpose
  std::vector<double> w, buf, tmp;
  int n = 0;
  int width = 0;
  int radius = 0;
  bool sparse = false;

  TransferPlan(const LatticeDisorder& d) {
    n = d.n_sites;
    StepKernelTaps taps = make_step_taps(d.dt, d.dx);
    sparse = taps.width() < n;
    if (sparse) {
      width = taps.width();
      radius = taps.radius;
      row.assign(taps.taps.rbegin(), taps.taps.rend());
      rowt.assign(taps.taps.begin(), taps.taps.end());
      buf.resize(static_cast<size_t>(n + width - 1));
    } else {
      FoldedKernels fk = fold_taps(taps, n);
      width = n;
      row.resize(static_cast<size_t>(n));
      for (int k = 0; k < n; ++k) row[k] = fk.mass[static_cast<size_t>(n - 1 - k)];
      rowt = fk.mass;
      buf.resize(static_cast<size_t>(2 * n));
    }
    w.resize(static_cast<size_t>(n));
    tmp.resize(static_cast<size_t>(n));
  }

  // buf[u] = in[(u - radius) mod n], u in [0, n + width - 1)
  void fill_band(const double* in) {
    std::memcpy(buf.data(), in + (n - radius), sizeof(double) * radius);
    std::memcpy(buf.data() + radius, in, sizeof(double) * n);
    std::memcpy(buf.data() + radius + n, in, sizeof(double) * (width - 1 - radius));
  }

  // in and out may alias; in is the pre-weighted field
  void convolve(const double* in, double* out) {
    if (sparse) {
      fill_band(in);
      std::memset(out, 0, sizeof(double) * n);
      band_convolve(row.data(), width, buf.data(), out, n);
      return;
    }
    std::memcpy(buf.data(), in, sizeof(double) * n);
    std::memcpy(buf.data() + n, in, sizeof(double) * n);
    const double* m = row.data();
    for (int x = 0; x < n; ++x) {
      const double* b = buf.data() + x + 1;
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += b[k] * m[k];
      out[x] = acc;
    }
  }

  // exact transpose: out[x] = sum_o mass[o] * in[(x+o) mod n]
  void convolve_t(const double* in, double* out) {
    if (sparse) {
      fill_band(in);
      std::memset(out, 0, sizeof(double) * n);
      band_convolve(rowt.data(), width, buf.data(), out, n);
      return;
    }
    std::memcpy(buf.data(), in, sizeof(double) * n);
    std::memcpy(buf.data() + n, in, sizeof(double) * n);
    const double* m = rowt.data();
    for (int x = 0; x < n; ++x) {
      const double* b = buf.data() + x;
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += b[k] * m[k];
      out[x] = acc;
    }
  }

  void step(const LatticeDisorder& d, int k, double* z) {
    weight_row(d, k, w.data());
    for (int i = 0; i < n; ++i) tmp[i] = w[i] * z[i];
    convolve(tmp.data(), z);
  }

  // transposed step: convolve first, then weight
  void step_t(const LatticeDisorder& d, int k, double* z) {
    weight_row(d, k, w.data());
    convolve_t(z, tmp.data());
    for (int i = 0; i < n; ++i) z[i] = w[i] * tmp[i];
  }
};

void check_range(const LatticeDisorder& d, int from, int to, const char* who) {
  if (from < 0 || to > d.n_steps || from > to)
    throw std::out_of_range(std::string(who) + ": step range [" +
                            std::to_string(from) + ", " + std::to_string(to) +
                            ") outside disorder shape");
}

}  // namespace

ScaledField evolve_field(std::vector<double> z0, const LatticeDisorder& d,
                         int from_step, int to_step) {
  check_range(d, from_step, to_step, "evolve_field");
  if (static_cast<int>(z0.size()) != d.n_sites)
    throw std::invalid_argument("evolve_field: field size != n_sites");
  ScaledField f;
  f.values = std::move(z0);
  f.exponent = 0;
  TransferPlan plan(d);
  for (int k = from_step; k < to_step; ++k) {
    plan.step(d, k, f.values.data());
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::fabs(v));
    if (m > 0x1p+512 || (m > 0.0 && m < 0x1p-512)) {
      int e = std::ilogb(m);
      for (double& v : f.values) v = std::ldexp(v, -e);
      f.exponent += e;
    }
  }
  return f;
}

Density evolve_density(const Density& init, const LatticeDisorder& d,
                       int from_step, int to_step) {
  check_range(d, from_step, to_step, "evolve_density");
  if (init.n() != d.n_sites)
    throw std::invalid_argument("evolve_density: density size != n_sites");
  Density out = init;
  TransferPlan plan(d);
  for (int k = from_step; k < to_step; ++k) {
    plan.step(d, k, out.weights.data());
    renormalize(out, d.dx);
  }
  return out;
}

ScaledField evolve_adjoint(std::vector<double> v, const LatticeDisorder& d,
                           int from_step, int to_step) {
  check_range(d, from_step, to_step, "evolve_adjoint");
  if (static_cast<int>(v.size()) != d.n_sites)
    throw std::invalid_argument("evolve_adjoint: field size != n_sites");
  ScaledField f;
  f.values = std::move(v);
  f.exponent = 0;
  TransferPlan plan(d);
  for (int k = to_step - 1; k >= from_step; --k) {
    plan.step_t(d, k, f.values.data());
    double m = 0.0;
    for (double x : f.values) m = std::max(m, std::fabs(x));
    if (m > 0x1p+512 || (m > 0.0 && m < 0x1p-512)) {
      int e = std::ilogb(m);
      for (double& x : f.values) x = std::ldexp(x, -e);
      f.exponent += e;
    }
  }
  return f;
}

PropagatorMatrix step_kernel(double dt, int n_sites) {
  FoldedKernels fk = fold_taps(make_step_taps(dt, 1.0 / n_sites), n_sites);
  PropagatorMatrix p;
  p.n_sites = n_sites;
  p.t_from = 0;
  p.t_to = 1;
  p.entries.resize(static_cast<size_t>(n_sites) * n_sites);
  for (int y = 0; y < n_sites; ++y) {
    double* row = p.entries.data() + static_cast<size_t>(y) * n_sites;
    for (int x = 0; x < n_sites; ++x)
      row[x] = fk.mass[static_cast<size_t>(((x - y) % n_sites + n_sites) % n_sites)];
    // each row's in-order sum is pinned to exactly 1 through its last entry
    double partial = 0.0;
    for (int x = 0; x + 1 < n_sites; ++x) partial += row[x];
    row[n_sites - 1] = 1.0 - partial;
  }
  return p;
}

PropagatorMatrix propagator(const LatticeDisorder& d, int s_step, int t_step) {
  check_range(d, s_step, t_step, "propagator");
  const int n = d.n_sites;
  PropagatorMatrix p;
  p.n_sites = n;
  p.t_from = s_step;
  p.t_to = t_step;
  p.entries.assign(static_cast<size_t>(n) * n, 0.0);
  const double inv_dx = static_cast<double>(n);
  for (int y = 0; y < n; ++y) p.at(y, y) = inv_dx;
  TransferPlan plan(d);
  for (int k = s_step; k < t_step; ++k) {
    weight_row(d, k, plan.w.data());
    for (int y = 0; y < n; ++y) {
      double* row = p.entries.data() + static_cast<size_t>(y) * n;
      for (int q = 0; q < n; ++q) plan.tmp[q] = plan.w[q] * row[q];
      plan.convolve(plan.tmp.data(), row);
    }
  }
  return p;
}

Density endpoint_density(const PropagatorMatrix& prop, const Density& init,
                         Direction direction) {
  const int n = prop.n_sites;
  if (init.n() != n)
    throw std::invalid_argument("endpoint_density: density size != n_sites");
  Density out;
  out.weights.assign(static_cast<size_t>(n), 0.0);
  const double dx = 1.0 / n;
  if (direction == Direction::forward) {
    for (int y = 0; y < n; ++y) {
      double a = init.weights[y] * dx;
      if (a == 0.0) continue;
      const double* row = prop.entries.data() + static_cast<size_t>(y) * n;
      for (int x = 0; x < n; ++x) out.weights[x] += a * row[x];
    }
  } else {
    for (int y = 0; y < n; ++y) {
      const double* row = prop.entries.data() + static_cast<size_t>(y) * n;
      double acc = 0.0;
      for (int x = 0; x < n; ++x) acc += row[x] * init.weights[x];
      out.weights[y] = acc * dx;
    }
  }
  double total = 0.0;
  for (double v : out.weights) total += v;
  if (!(total * dx > 1e-300) || !std::isfinite(total))
    throw std::runtime_error("endpoint_density: degenerate propagator mass");
  double inv = 1.0 / (total * dx);
  for (double& v : out.weights) v *= inv;
  return out;
}

Density midpoint_density(const LatticeDisorder& d, int t_step, int s_step,
                         const Density& terminal, const Density& initial) {
  if (s_step < 0 || s_step > t_step)
    throw std::out_of_range("midpoint_density: need 0 <= s_step <= t_step");
  check_range(d, 0, t_step, "midpoint_density");
  PropagatorMatrix front = propagator(d, 0, s_step);
  PropagatorMatrix back = propagator(d, s_step, t_step);
  Density rho_f = endpoint_density(front, initial, Direction::forward);
  Density rho_b = endpoint_density(back, terminal, Direction::backward);
  Density out;
  out.weights.resize(static_cast<size_t>(d.n_sites));
  for (int y = 0; y < d.n_sites; ++y)
    out.weights[y] = rho_b.weights[y] * rho_f.weights[y];
  renormalize(out, d.dx);
  return out;
}

HeightField stationary_height(const BridgePath& w1, const LatticeDisorder& d,
                              int t_step) {
  const int n = d.n_sites;
  if (w1.n() != n)
    throw std::invalid_argument("stationary_height: bridge grid != n_sites");
  check_range(d, 0, t_step, "stationary_height");
  HeightField hf;
  hf.h.resize(static_cast<size_t>(n));
  hf.increments.resize(static_cast<size_t>(n));
  if (t_step == 0) {
    for (int i = 0; i < n; ++i) hf.h[i] = d.beta * w1.values[i];
    for (int i = 0; i < n; ++i) hf.increments[i] = hf.h[i] - hf.h[0];
    return hf;
  }
  std::vector<double> z0(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) z0[i] = std::exp(d.beta * w1.values[i]);
  ScaledField f = evolve_field(std::move(z0), d, 0, t_step);
  const double ln2 = 0.6931471805599453094;
  for (int i = 0; i < n; ++i) hf.h[i] = std::log(f.values[i]) + f.exponent * ln2;
  double h0 = std::log(f.values[0]);
  for (int i = 0; i < n; ++i) hf.increments[i] = std::log(f.values[i]) - h0;
  hf.increments[0] = 0.0;
  return hf;
}

}  // namespace kpz
