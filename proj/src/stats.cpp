#include "kpz/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kpz/rng.hpp"

namespace kpz {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_normal(const std::vector<double>& samples) {
  const int n = static_cast<int>(samples.size());
  if (n < 1) throw std::invalid_argument("ks_test_normal: empty sample");
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = normal_cdf(s[static_cast<size_t>(i)]);
    d = std::max(d, (i + 1.0) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  const double root = std::sqrt(static_cast<double>(n));
  KsResult out;
  out.d = d;
  out.n = n;
  out.p = ks_tail((root + 0.12 + 0.11 / root) * d);
  return out;
}

namespace {

double pair_distance(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double t = a[k] - b[k];
    acc += t * t;
  }
  return std::sqrt(acc);
}

// energy V-statistic of the partition (first n1 indices vs the rest) over a
// precomputed pooled distance matrix
double energy_from_matrix(const std::vector<double>& dist, int n_total,
                          const std::vector<int>& idx, int n1) {
  const int n2 = n_total - n1;
  double s_ab = 0.0, s_aa = 0.0, s_bb = 0.0;
  for (int i = 0; i < n1; ++i) {
    const double* row = dist.data() + static_cast<size_t>(idx[i]) * n_total;
    for (int j = 0; j < n1; ++j) s_aa += row[idx[j]];
    for (int j = n1; j < n_total; ++j) s_ab += row[idx[j]];
  }
  for (int i = n1; i < n_total; ++i) {
    const double* row = dist.data() + static_cast<size_t>(idx[i]) * n_total;
    for (int j = n1; j < n_total; ++j) s_bb += row[idx[j]];
  }
  return 2.0 * s_ab / (static_cast<double>(n1) * n2) -
         s_aa / (static_cast<double>(n1) * n1) -
         s_bb / (static_cast<double>(n2) * n2);
}

}  // namespace

EnergyResult energy_permutation_test(const std::vector<std::vector<double>>& a,
                                     const std::vector<std::vector<double>>& b,
                                     int n_perm, uint64_t seed) {
  const int n1 = static_cast<int>(a.size());
  const int n2 = static_cast<int>(b.size());
  if (n1 < 2 || n2 < 2)
    throw std::invalid_argument("energy_permutation_test: need >= 2 points per sample");
  if (n_perm < 1)
    throw std::invalid_argument("energy_permutation_test: need >= 1 permutation");
  const int dim = static_cast<int>(a.front().size());
  for (const auto& v : a)
    if (static_cast<int>(v.size()) != dim)
      throw std::invalid_argument("energy_permutation_test: ragged sample");
  for (const auto& v : b)
    if (static_cast<int>(v.size()) != dim)
      throw std::invalid_argument("energy_permutation_test: dimension mismatch");

  const int n = n1 + n2;
  std::vector<double> pool(static_cast<size_t>(n) * dim);
  for (int i = 0; i < n1; ++i)
    std::copy(a[static_cast<size_t>(i)].begin(), a[static_cast<size_t>(i)].end(),
              pool.begin() + static_cast<size_t>(i) * dim);
  for (int i = 0; i < n2; ++i)
    std::copy(b[static_cast<size_t>(i)].begin(), b[static_cast<size_t>(i)].end(),
              pool.begin() + static_cast<size_t>(n1 + i) * dim);

  std::vector<double> dist(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dij = pair_distance(pool.data() + static_cast<size_t>(i) * dim,
                                       pool.data() + static_cast<size_t>(j) * dim, dim);
      dist[static_cast<size_t>(i) * n + j] = dij;
      dist[static_cast<size_t>(j) * n + i] = dij;
    }

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  const double observed = energy_from_matrix(dist, n, idx, n1);

  RngStream rng(seed, salt::permutation);
  int at_least = 0;
  for (int p = 0; p < n_perm; ++p) {
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(rng.next_uniform() * (i + 1));
      if (j > i) j = i;
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    if (energy_from_matrix(dist, n, idx, n1) >= observed) ++at_least;
  }

  EnergyResult out;
  out.statistic = observed;
  out.n_perm = n_perm;
  out.p = (1.0 + at_least) / (n_perm + 1.0);
  return out;
}

LinearFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  const int n = static_cast<int>(xs.size());
  if (n < 2 || ys.size() != xs.size())
    throw std::invalid_argument("least_squares: need >= 2 matched points");
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += xs[static_cast<size_t>(i)];
    my += ys[static_cast<size_t>(i)];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = xs[static_cast<size_t>(i)] - mx;
    const double dy = ys[static_cast<size_t>(i)] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("least_squares: constant abscissa");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = ys[static_cast<size_t>(i)] -
                       (fit.intercept + fit.slope * xs[static_cast<size_t>(i)]);
      ss_res += r * r;
    }
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return fit;
}

}  // namespace kpz
