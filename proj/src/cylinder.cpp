#include "kpz/cylinder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

#include "kpz/convolve.hpp"
#include "kpz/fastexp.hpp"
#include "kpz/parallel.hpp"
#include "kpz/rng.hpp"

namespace kpz {

namespace {

constexpr double kLeakBudget = 1e-8;

int steps_per_unit(const LatticeDisorder& d) {
  int spu = static_cast<int>(std::lround(1.0 / d.dt));
  if (spu < 1 || std::fabs(spu * d.dt - 1.0) > 1e-9)
    throw std::invalid_argument(
        "winding chain: dt must divide the unit time interval");
  return spu;
}

struct LineWork {
  std::vector<double> trev;  // reversed taps
  std::vector<double> buf;   // padded weighted state, length len + 2*radius
  std::vector<double> out;
  std::vector<double> w;
  int tap_radius = 0;
  int len = 0;

  LineWork(const StepKernelTaps& taps, int length, int n_sites)
      : trev(taps.taps.rbegin(), taps.taps.rend()),
        buf(static_cast<size_t>(length + taps.width() - 1), 0.0),
        out(static_cast<size_t>(length), 0.0),
        w(static_cast<size_t>(n_sites)),
        tap_radius(taps.radius),
        len(length) {}

  // weight by w per torus site, spread along the line.  renorm=true rescales
  // survivors so total + leak stays exactly constant (probability evolution);
  // renorm=false keeps raw transition masses and charges only the truncated
  // tail to leak (kernel construction, where per-start scale factors must not
  // differ).
  void step(const LatticeDisorder& d, int k, std::vector<double>& state,
            double& total_mass, double& leak, bool renorm) {
    const int n = d.n_sites;
    weight_row(d, k, w.data());
    double* b = buf.data() + tap_radius;
    double sw_raw = 0.0;
    for (int p = 0; p < len; p += n) {
      const double* s = state.data() + p;
      double* bp = b + p;
      for (int x = 0; x < n; ++x) {
        double v = w[x] * s[x];
        bp[x] = v;
        sw_raw += v;
      }
    }
    const double s_w = sw_raw * d.dx;
    if (!(s_w > 0.0) || !std::isfinite(s_w))
      throw std::runtime_error("evolve_winding: mass vanished or diverged");
    std::memset(out.data(), 0, sizeof(double) * out.size());
    band_convolve(trev.data(), 2 * tap_radius + 1, buf.data(), out.data(), len);
    const double c = renorm ? total_mass / s_w : 1.0;
    double new_raw = 0.0;
    for (int p = 0; p < len; ++p) {
      double v = c * out[p];
      state[p] = v;
      new_raw += v;
    }
    const double new_total = new_raw * d.dx;
    leak += (renorm ? total_mass : s_w) - new_total;
    total_mass = new_total;
  }
};

}  // namespace

std::vector<double> WindingDensity::fold() const {
  std::vector<double> m(static_cast<size_t>(n_sites), 0.0);
  for (int k = -radius; k <= radius; ++k) {
    const double* row = weights.data() + static_cast<size_t>(k + radius) * n_sites;
    for (int x = 0; x < n_sites; ++x) m[x] += row[x];
  }
  return m;
}

std::vector<double> WindingDensity::winding_marginal() const {
  std::vector<double> m(static_cast<size_t>(2 * radius + 1), 0.0);
  const double dx = 1.0 / n_sites;
  for (int k = -radius; k <= radius; ++k) {
    const double* row = weights.data() + static_cast<size_t>(k + radius) * n_sites;
    double acc = 0.0;
    for (int x = 0; x < n_sites; ++x) acc += row[x];
    m[static_cast<size_t>(k + radius)] = acc * dx / total_mass;
  }
  return m;
}

int winding_radius(double total_time) {
  if (!(total_time > 0.0))
    throw std::invalid_argument("winding_radius: total_time must be positive");
  return static_cast<int>(std::ceil(2.0 * (6.1 * std::sqrt(total_time) + 1.0)));
}

WindingDensity delta_winding(int n_sites, int site, int radius) {
  if (n_sites < 2) throw std::invalid_argument("delta_winding: n_sites must be >= 2");
  if (site < 0 || site >= n_sites)
    throw std::out_of_range("delta_winding: site outside lattice");
  if (radius < 1) throw std::invalid_argument("delta_winding: radius must be >= 1");
  WindingDensity s;
  s.n_sites = n_sites;
  s.radius = radius;
  s.weights.assign(static_cast<size_t>(2 * radius + 1) * n_sites, 0.0);
  s.weights[static_cast<size_t>(radius) * n_sites + site] = static_cast<double>(n_sites);
  s.total_mass = 1.0;
  s.leak = 0.0;
  return s;
}

void evolve_winding(WindingDensity& state, const LatticeDisorder& d,
                    int from_step, int to_step) {
  if (state.n_sites != d.n_sites)
    throw std::invalid_argument("evolve_winding: state size != n_sites");
  if (from_step < 0 || to_step > d.n_steps || from_step > to_step)
    throw std::out_of_range("evolve_winding: step range [" +
                            std::to_string(from_step) + ", " +
                            std::to_string(to_step) + ") outside disorder shape");
  const int len = (2 * state.radius + 1) * d.n_sites;
  LineWork work(make_step_taps(d.dt, d.dx), len, d.n_sites);
  for (int k = from_step; k < to_step; ++k) {
    work.step(d, k, state.weights, state.total_mass, state.leak, true);
    if (state.leak > kLeakBudget)
      throw std::runtime_error(
          "evolve_winding: truncated winding mass " + std::to_string(state.leak) +
          " exceeds budget 1e-8; enlarge the winding radius");
  }
}

QuenchedMoments quenched_moments(const WindingDensity& state) {
  const double dx = 1.0 / state.n_sites;
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int k = -state.radius; k <= state.radius; ++k) {
    const double* row =
        state.weights.data() + static_cast<size_t>(k + state.radius) * state.n_sites;
    for (int x = 0; x < state.n_sites; ++x) {
      const double pos = k + x * dx;
      const double w = row[x];
      m0 += w;
      m1 += w * pos;
      m2 += w * pos * pos;
    }
  }
  if (!(m0 > 0.0)) throw std::runtime_error("quenched_moments: empty state");
  QuenchedMoments out;
  out.x = m1 / m0;
  out.v = std::max(0.0, m2 / m0 - out.x * out.x);
  return out;
}

namespace {

// forward sweep of the per-site mass m and accumulated-displacement moment a:
// m' = K(w m), a' = K(w a) + D1(w m); profiles are -a/m, the mean unwrapped
// displacement of the time-0 representative relative to the endpoint
std::vector<std::vector<double>> displacement_profiles(
    const LatticeDisorder& d, std::vector<double> m,
    const std::vector<int>& s_steps, const char* who) {
  const int n = d.n_sites;
  if (s_steps.empty()) return {};
  for (size_t i = 0; i < s_steps.size(); ++i) {
    if (s_steps[i] < 1 || s_steps[i] > d.n_steps)
      throw std::out_of_range(std::string(who) + ": snapshot step outside disorder shape");
    if (i > 0 && s_steps[i] <= s_steps[i - 1])
      throw std::invalid_argument(std::string(who) + ": snapshot steps must ascend");
  }
  StepKernelTaps taps = make_step_taps(d.dt, d.dx);
  const bool sparse = taps.width() < n;
  const int W = sparse ? taps.width() : n;
  const int R = sparse ? taps.radius : 0;
  std::vector<double> mrev(W), drev(W);
  if (sparse) {
    // band rows over the raw taps; displacement for reversed index i is R-i
    for (int i = 0; i < W; ++i) {
      mrev[i] = taps.taps[static_cast<size_t>(W - 1 - i)];
      drev[i] = mrev[i] * ((R - i) * d.dx);
    }
  } else {
    FoldedKernels fk = fold_taps(taps, n);
    for (int k = 0; k < n; ++k) {
      mrev[k] = fk.mass[static_cast<size_t>(n - 1 - k)];
      drev[k] = fk.disp1[static_cast<size_t>(n - 1 - k)];
    }
  }
  const size_t blen = static_cast<size_t>(sparse ? n + W - 1 : 2 * n);
  std::vector<double> a(static_cast<size_t>(n), 0.0);
  std::vector<double> w(n), wm(n), wa(n), bufm(blen), bufa(blen), nm(n), na(n);
  // buf[u] = src[(u - R) mod n] in the band case, plain duplication otherwise
  // (the dense row is consumed at offset +1, matching its reversal)
  auto fill = [&](const double* src, double* buf) {
    if (sparse) {
      std::memcpy(buf, src + (n - R), sizeof(double) * R);
      std::memcpy(buf + R, src, sizeof(double) * n);
      std::memcpy(buf + R + n, src, sizeof(double) * (W - 1 - R));
    } else {
      std::memcpy(buf, src, sizeof(double) * n);
      std::memcpy(buf + n, src, sizeof(double) * n);
    }
  };
  const int boff = sparse ? 0 : 1;
  std::vector<std::vector<double>> out;
  out.reserve(s_steps.size());
  size_t next = 0;
  for (int k = 0; k < s_steps.back(); ++k) {
    weight_row(d, k, w.data());
    for (int x = 0; x < n; ++x) {
      wm[x] = w[x] * m[x];
      wa[x] = w[x] * a[x];
    }
    fill(wm.data(), bufm.data());
    fill(wa.data(), bufa.data());
    std::fill(nm.begin(), nm.end(), 0.0);
    std::fill(na.begin(), na.end(), 0.0);
    band_convolve(mrev.data(), W, bufm.data() + boff, nm.data(), n);
    band_convolve(mrev.data(), W, bufa.data() + boff, na.data(), n);
    band_convolve(drev.data(), W, bufm.data() + boff, na.data(), n);
    double total = 0.0;
    for (int x = 0; x < n; ++x) total += nm[x];
    if (!(total > 0.0) || !std::isfinite(total))
      throw std::runtime_error(std::string(who) + ": mass vanished or diverged");
    const double c = 1.0 / total;
    for (int x = 0; x < n; ++x) {
      m[x] = c * nm[x];
      a[x] = c * na[x];
    }
    if (next < s_steps.size() && k + 1 == s_steps[next]) {
      std::vector<double> prof(static_cast<size_t>(n));
      for (int x = 0; x < n; ++x) {
        if (m[x] < 1e-14)
          throw std::runtime_error(std::string(who) +
                                   ": conditioning mass below 1e-14 at site " +
                                   std::to_string(x));
        prof[x] = -a[x] / m[x];
      }
      out.push_back(std::move(prof));
      ++next;
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> psi_profiles(const LatticeDisorder& d,
                                              const std::vector<int>& s_steps) {
  std::vector<double> m(static_cast<size_t>(d.n_sites), 0.0);
  m[0] = 1.0;
  return displacement_profiles(d, std::move(m), s_steps, "psi");
}

std::vector<std::vector<double>> phi_profiles(const LatticeDisorder& d,
                                              const BridgePath& w1,
                                              const std::vector<int>& s_steps) {
  if (w1.n() != d.n_sites)
    throw std::invalid_argument("phi: bridge grid != n_sites");
  Density rho = bridge_density(d.beta, w1);
  std::vector<double> m(static_cast<size_t>(d.n_sites));
  for (int x = 0; x < d.n_sites; ++x) m[x] = rho.weights[x] * d.dx;
  return displacement_profiles(d, std::move(m), s_steps, "phi");
}

double psi(const LatticeDisorder& d, int s_step, int y_site) {
  if (y_site < 0 || y_site >= d.n_sites)
    throw std::out_of_range("psi: site outside lattice");
  return psi_profiles(d, {s_step})[0][static_cast<size_t>(y_site)];
}

double phi(const LatticeDisorder& d, const BridgePath& w1, int s_step, int y_site) {
  if (y_site < 0 || y_site >= d.n_sites)
    throw std::out_of_range("phi: site outside lattice");
  return phi_profiles(d, w1, {s_step})[0][static_cast<size_t>(y_site)];
}

double WindingKernel::mass(int x_prev, int x) const {
  const double* v = t.data() +
                    (static_cast<size_t>(x_prev) * n_sites + x) * (2 * j_radius + 1);
  double acc = 0.0;
  for (int j = 0; j < 2 * j_radius + 1; ++j) acc += v[j];
  return acc;
}

double WindingKernel::moment1(int x_prev, int x) const {
  const double* v = t.data() +
                    (static_cast<size_t>(x_prev) * n_sites + x) * (2 * j_radius + 1);
  double acc = 0.0;
  for (int j = 0; j < 2 * j_radius + 1; ++j) acc += (j - j_radius) * v[j];
  return acc;
}

WindingKernel unit_winding_kernel(const LatticeDisorder& d, int window_index) {
  const int spu = steps_per_unit(d);
  const int from = window_index * spu, to = from + spu;
  if (window_index < 0 || to > d.n_steps)
    throw std::out_of_range("unit_winding_kernel: window outside disorder shape");
  const int n = d.n_sites;
  const int jr = winding_radius(1.0);
  const int width = 2 * jr + 1;
  WindingKernel ker;
  ker.n_sites = n;
  ker.j_radius = jr;
  ker.t.assign(static_cast<size_t>(n) * n * width, 0.0);
  const int len = width * n;
  StepKernelTaps taps = make_step_taps(d.dt, d.dx);
  LineWork work(taps, len, n);
  std::vector<double> state(static_cast<size_t>(len));
  for (int a = 0; a < n; ++a) {
    std::fill(state.begin(), state.end(), 0.0);
    state[static_cast<size_t>(jr) * n + a] = 1.0;
    double total = d.dx, leak = 0.0;
    for (int k = from; k < to; ++k) work.step(d, k, state, total, leak, false);
    ker.leak = std::max(ker.leak, leak / (total + leak));
    for (int j = -jr; j <= jr; ++j)
      for (int x = 0; x < n; ++x)
        ker.t[(static_cast<size_t>(a) * n + x) * width + (j + jr)] =
            state[static_cast<size_t>(j + jr) * n + x];
  }
  return ker;
}

std::vector<WindingKernel> winding_chain(const LatticeDisorder& d, int n_windows) {
  std::vector<WindingKernel> chain;
  chain.reserve(static_cast<size_t>(n_windows));
  for (int w = 0; w < n_windows; ++w) chain.push_back(unit_winding_kernel(d, w));
  return chain;
}

std::vector<double> eta_law(const WindingKernel& k, int x_prev_site, int x_site) {
  if (x_prev_site < 0 || x_prev_site >= k.n_sites || x_site < 0 || x_site >= k.n_sites)
    throw std::out_of_range("eta_law: site outside lattice");
  const int width = 2 * k.j_radius + 1;
  const double* v = k.t.data() +
                    (static_cast<size_t>(x_prev_site) * k.n_sites + x_site) * width;
  double total = 0.0;
  for (int j = 0; j < width; ++j) total += v[j];
  if (!(total > 0.0)) throw std::runtime_error("eta_law: zero transition mass");
  std::vector<double> law(static_cast<size_t>(width));
  for (int j = 0; j < width; ++j) law[j] = v[j] / total;
  return law;
}

namespace {

void rescale_pow2(std::vector<double>& v) {
  double mx = 0.0;
  for (double x : v) mx = std::max(mx, std::fabs(x));
  if (!(mx > 0.0)) return;
  int e = std::ilogb(mx);
  if (e == 0) return;
  for (double& x : v) x = std::ldexp(x, -e);
}

}  // namespace

double winding_number(const std::vector<WindingKernel>& chain, const Density& mu,
                      const Density& nu) {
  if (chain.empty()) throw std::invalid_argument("winding_number: empty chain");
  const int n = chain.front().n_sites;
  if (mu.n() != n || nu.n() != n)
    throw std::invalid_argument("winding_number: measure size != n_sites");
  const int nw = static_cast<int>(chain.size());
  const double dx = 1.0 / n;
  // dense per-window mass and first-moment matrices
  std::vector<std::vector<double>> M(nw), D1(nw);
  for (int w = 0; w < nw; ++w) {
    M[w].resize(static_cast<size_t>(n) * n);
    D1[w].resize(static_cast<size_t>(n) * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        M[w][static_cast<size_t>(a) * n + b] = chain[w].mass(a, b);
        D1[w][static_cast<size_t>(a) * n + b] = chain[w].moment1(a, b);
      }
  }
  // forward vectors from nu (time 0), backward vectors from mu (time s)
  std::vector<std::vector<double>> f(static_cast<size_t>(nw) + 1),
      g(static_cast<size_t>(nw) + 1);
  f[0].resize(static_cast<size_t>(n));
  g[static_cast<size_t>(nw)].resize(static_cast<size_t>(n));
  for (int x = 0; x < n; ++x) {
    f[0][x] = nu.weights[x] * dx;
    g[static_cast<size_t>(nw)][x] = mu.weights[x] * dx;
  }
  for (int w = 0; w < nw; ++w) {
    f[w + 1].assign(static_cast<size_t>(n), 0.0);
    for (int a = 0; a < n; ++a) {
      const double fa = f[w][a];
      if (fa == 0.0) continue;
      const double* row = M[w].data() + static_cast<size_t>(a) * n;
      for (int b = 0; b < n; ++b) f[w + 1][b] += fa * row[b];
    }
    rescale_pow2(f[w + 1]);
  }
  for (int w = nw - 1; w >= 0; --w) {
    g[w].assign(static_cast<size_t>(n), 0.0);
    for (int a = 0; a < n; ++a) {
      const double* row = M[w].data() + static_cast<size_t>(a) * n;
      double acc = 0.0;
      for (int b = 0; b < n; ++b) acc += row[b] * g[w + 1][b];
      g[w][a] = acc;
    }
    rescale_pow2(g[w]);
  }
  auto site_mean = [&](const std::vector<double>& fw, const std::vector<double>& gw) {
    double num = 0.0, den = 0.0;
    for (int x = 0; x < n; ++x) {
      const double p = fw[x] * gw[x];
      num += p * (x * dx);
      den += p;
    }
    if (!(den > 0.0)) throw std::runtime_error("winding_number: degenerate chain mass");
    return num / den;
  };
  const double start_mean = site_mean(f[0], g[0]);
  const double end_mean = site_mean(f[static_cast<size_t>(nw)], g[static_cast<size_t>(nw)]);
  double eta_sum = 0.0;
  for (int w = 0; w < nw; ++w) {
    double num = 0.0, den = 0.0;
    for (int a = 0; a < n; ++a) {
      const double fa = f[w][a];
      if (fa == 0.0) continue;
      const double* mrow = M[w].data() + static_cast<size_t>(a) * n;
      const double* drow = D1[w].data() + static_cast<size_t>(a) * n;
      double accm = 0.0, accd = 0.0;
      for (int b = 0; b < n; ++b) {
        accm += mrow[b] * g[w + 1][b];
        accd += drow[b] * g[w + 1][b];
      }
      num += fa * accd;
      den += fa * accm;
    }
    if (!(den > 0.0)) throw std::runtime_error("winding_number: degenerate chain mass");
    eta_sum += num / den;
  }
  return start_mean - end_mean - eta_sum;
}

double winding_number(const LatticeDisorder& d, int s_step, const Density& mu,
                      const Density& nu) {
  const int spu = steps_per_unit(d);
  if (s_step < spu || s_step % spu != 0)
    throw std::invalid_argument(
        "winding_number: s_step must be a positive multiple of the unit window");
  return winding_number(winding_chain(d, s_step / spu), mu, nu);
}

Density tilde_g(const LatticeDisorder& d, const BridgePath& w1, int t_step) {
  const int n = d.n_sites;
  if (w1.n() != n) throw std::invalid_argument("tilde_g: bridge grid != n_sites");
  std::vector<double> ew(static_cast<size_t>(n));
  for (int y = 0; y < n; ++y) ew[y] = std::exp(d.beta * w1.values[y]);
  // forward pass: mass of the weighted time-0 marginal at each endpoint
  ScaledField den = evolve_field(ew, d, 0, t_step);
  std::vector<double> rec(static_cast<size_t>(n));
  for (int x = 0; x < n; ++x) {
    if (!(den.values[x] > 0.0) || !std::isfinite(den.values[x]))
      throw std::runtime_error("tilde_g: degenerate endpoint mass");
    rec[x] = 1.0 / den.values[x];
  }
  // backward pass: the adjoint evolution turns the per-start sum over all
  // endpoints into one sweep; g(y) = e^{beta W(y)} dx * sum_x Z(x,y)/den(x)
  ScaledField back = evolve_adjoint(std::move(rec), d, 0, t_step);
  Density g;
  g.weights.resize(static_cast<size_t>(n));
  double s = 0.0;
  for (int y = 0; y < n; ++y) {
    g.weights[y] = ew[y] * back.values[y];
    s += g.weights[y];
  }
  // the lattice identity sum(g)*dx == 1 is exact in exact arithmetic; verify
  // it before renormalizing away the accumulated rounding
  const double mass = std::ldexp(s * d.dx, back.exponent - den.exponent);
  if (!(std::fabs(mass - 1.0) < 1e-6))
    throw std::runtime_error("tilde_g: endpoint mass identity violated");
  renormalize(g, d.dx);
  return g;
}

std::vector<double> tilde_phi(const Density& g) {
  const int n = g.n();
  const double dx = 1.0 / n;
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int y = 1; y < n; ++y)
    out[y] = out[y - 1] + (g.weights[y - 1] - 1.0) * dx;
  return out;
}

AnnealedStats annealed_stats(double beta, int t_steps, int n_disorder,
                             const CylinderConfig& cfg) {
  if (n_disorder < 2)
    throw std::invalid_argument("annealed_stats: need n_disorder >= 2");
  if (t_steps < 1) throw std::invalid_argument("annealed_stats: need t_steps >= 1");
  if (cfg.n_thermal < 0)
    throw std::invalid_argument("annealed_stats: n_thermal must be >= 0");
  const double t_phys = t_steps * cfg.dt;
  const int radius = winding_radius(t_phys);
  const int kDrawsPerBlock = 64;
  const int n_blocks = (n_disorder + kDrawsPerBlock - 1) / kDrawsPerBlock;

  std::vector<BlockMoments> blocks(static_cast<size_t>(n_blocks));
  std::vector<double> xs(static_cast<size_t>(n_disorder),
                         std::numeric_limits<double>::quiet_NaN());
  std::vector<double> qv(static_cast<size_t>(n_disorder),
                         std::numeric_limits<double>::quiet_NaN());
  std::vector<double> ep(static_cast<size_t>(n_disorder) * std::max(1, cfg.n_thermal),
                         std::numeric_limits<double>::quiet_NaN());

  run_blocks(n_blocks, cfg.workers, [&](int b) {
    const int lo = b * kDrawsPerBlock;
    const int hi = std::min(n_disorder, lo + kDrawsPerBlock);
    BlockMoments& acc = blocks[static_cast<size_t>(b)];
    acc.first_stream = salt::disorder ^ static_cast<uint64_t>(lo);
    for (int r = lo; r < hi; ++r) {
      const uint64_t seed_r = realization_seed(cfg.seed, static_cast<uint64_t>(r));
      LatticeDisorder d = make_disorder(t_steps, cfg.n_sites, cfg.dt, beta, seed_r);
      WindingDensity state = delta_winding(cfg.n_sites, 0, radius);
      try {
        evolve_winding(state, d, 0, t_steps);
      } catch (const std::runtime_error&) {
        continue;  // leak budget exceeded: draw excluded, reported via count
      }
      QuenchedMoments qm = quenched_moments(state);
      xs[static_cast<size_t>(r)] = qm.x;
      qv[static_cast<size_t>(r)] = qm.v;
      acc.add((qm.x * qm.x + qm.v) / t_phys);
      if (cfg.n_thermal > 0) {
        RngStream ts(seed_r, salt::thermal);
        const double dx = d.dx;
        for (int i = 0; i < cfg.n_thermal; ++i) {
          const double target = ts.next_uniform() * state.total_mass;
          double cum = 0.0;
          double pos = 0.0;
          bool hit = false;
          for (int k = -state.radius; k <= state.radius && !hit; ++k) {
            const double* row = state.weights.data() +
                                static_cast<size_t>(k + state.radius) * cfg.n_sites;
            for (int x = 0; x < cfg.n_sites; ++x) {
              cum += row[x] * dx;
              if (cum >= target) {
                pos = k + x * dx;
                hit = true;
                break;
              }
            }
          }
          if (!hit) pos = state.radius + 1.0 - dx;
          ep[static_cast<size_t>(r) * cfg.n_thermal + i] = pos;
        }
      }
    }
  });

  AnnealedStats out;
  out.t_phys = t_phys;
  std::vector<BlockMoments> kept;
  for (const auto& b : blocks)
    if (b.n > 0) kept.push_back(b);
  if (kept.empty())
    throw std::runtime_error("annealed_stats: every draw exceeded the leak budget");
  out.v_over_t = Estimate::from_blocks(kept, cfg.seed, beta, "annealed_v_over_t");
  double sx2 = 0.0, sqv = 0.0;
  int n_kept = 0;
  for (int r = 0; r < n_disorder; ++r) {
    if (std::isnan(xs[static_cast<size_t>(r)])) {
      ++out.n_excluded;
      continue;
    }
    ++n_kept;
    sx2 += xs[r] * xs[r];
    sqv += qv[r];
    out.x_samples.push_back(xs[r]);
    out.qvar_samples.push_back(qv[r]);
    if (cfg.n_thermal > 0)
      for (int i = 0; i < cfg.n_thermal; ++i)
        out.endpoint_samples.push_back(ep[static_cast<size_t>(r) * cfg.n_thermal + i]);
  }
  out.mean_x2 = sx2 / n_kept;
  out.mean_qvar = sqv / n_kept;
  return out;
}

}  // namespace kpz
