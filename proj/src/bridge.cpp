#include "kpz/bridge.hpp"

#include <cmath>
#include <stdexcept>
#include <algorithm>

namespace kpz {

static bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

void sample_bridge_values(int n, RngStream& stream, double* values,
                          double* xi_scratch) {
  stream.fill_normals(xi_scratch, n);
  const double s = std::sqrt(1.0 / n);
  values[0] = 0.0;
  double acc = 0.0;
  for (int j = 1; j <= n; ++j) {
    acc += xi_scratch[j - 1];
    values[j] = s * acc;
  }
  const double bn = values[n];
  for (int j = 1; j < n; ++j)
    values[j] -= (static_cast<double>(j) / n) * bn;
  values[n] = 0.0;
}

BridgePath sample_bridge(int n, RngStream& stream) {
  if (n < 2 || !is_pow2(n))
    throw std::invalid_argument("sample_bridge: n must be a power of two >= 2");
  BridgePath p;
  p.values.resize(n + 1);
  std::vector<double> xi(n);
  sample_bridge_values(n, stream, p.values.data(), xi.data());
  return p;
}

BridgePair sample_bridge_pair(int n_coarse, RngStream& stream) {
  if (n_coarse < 2 || !is_pow2(n_coarse))
    throw std::invalid_argument("sample_bridge_pair: n must be a power of two >= 2");
  BridgePair pair;
  pair.fine = sample_bridge(2 * n_coarse, stream);
  pair.coarse.values.resize(n_coarse + 1);
  for (int j = 0; j <= n_coarse; ++j)
    pair.coarse.values[j] = pair.fine.values[2 * j];
  return pair;
}

BridgePath negate(const BridgePath& p) {
  BridgePath q;
  q.values.resize(p.values.size());
  for (size_t j = 0; j < p.values.size(); ++j) q.values[j] = 0.0 - p.values[j];
  return q;
}

double trapezoid(const std::vector<double>& f) {
  const int n = static_cast<int>(f.size()) - 1;
  if (n < 1) throw std::invalid_argument("trapezoid: need at least 2 points");
  double acc = 0.5 * f[0];
  for (int j = 1; j < n; ++j) acc += f[j];
  acc += 0.5 * f[n];
  return acc / n;
}

double partition_functional(const BridgePath& p, double beta) {
  const int n = p.n();
  double acc = 0.5 * std::exp(beta * p.values[0]);
  for (int j = 1; j < n; ++j) acc += std::exp(beta * p.values[j]);
  acc += 0.5 * std::exp(beta * p.values[n]);
  return acc / n;
}

double log_partition_functional(const BridgePath& p, double beta) {
  const int n = p.n();
  double m = beta * p.values[0];
  for (int j = 1; j <= n; ++j) m = std::max(m, beta * p.values[j]);
  double acc = 0.5 * std::exp(beta * p.values[0] - m);
  for (int j = 1; j < n; ++j) acc += std::exp(beta * p.values[j] - m);
  acc += 0.5 * std::exp(beta * p.values[n] - m);
  return m + std::log(acc / n);
}

}  // namespace kpz
