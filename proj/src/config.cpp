#include "kpz/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace kpz {

const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::constants: return "constants";
    case Experiment::brunet: return "brunet";
    case Experiment::simulate: return "simulate";
    case Experiment::mixing: return "mixing";
    case Experiment::reversal: return "reversal";
    case Experiment::jointlaw: return "jointlaw";
    case Experiment::clt: return "clt";
  }
  return "?";
}

bool parse_experiment(const std::string& s, Experiment* out) {
  static const Experiment all[] = {Experiment::constants, Experiment::brunet,
                                   Experiment::simulate,  Experiment::mixing,
                                   Experiment::reversal,  Experiment::jointlaw,
                                   Experiment::clt};
  for (Experiment e : all) {
    if (s == experiment_name(e)) {
      *out = e;
      return true;
    }
  }
  return false;
}

double ExperimentConfig::dt_or_default() const {
  if (dt > 0.0) return dt;
  if (experiment == Experiment::jointlaw)
    return 1.0 / (2.0 * n_sites * static_cast<double>(n_sites));
  return 1.0 / n_sites;
}

int ExperimentConfig::steps_per_unit() const {
  double d = dt_or_default();
  return static_cast<int>(std::lround(1.0 / d));
}

int ExperimentConfig::t_steps_or_default() const {
  if (t_steps > 0) return t_steps;
  // the joint-law comparison wants a longer stationarity burn-in
  const int units = experiment == Experiment::jointlaw ? 16 : 8;
  return units * steps_per_unit();
}

int ExperimentConfig::n_disorder_or_default() const {
  if (n_disorder > 0) return n_disorder;
  switch (experiment) {
    case Experiment::simulate: return 200;
    case Experiment::mixing: return 24;
    case Experiment::reversal: return 400;
    case Experiment::jointlaw: return 400;
    case Experiment::clt: return 250;
    default: return 200;
  }
}

int ExperimentConfig::s_step_or_default() const {
  if (s_step > 0) return s_step;
  return t_steps_or_default() / 2;
}

namespace {

struct Loc {
  std::string key;
  int line = 0;  // positive: config file line; negative: --set slot
  std::string where() const {
    if (line < 0) return "'" + key + "' (--set #" + std::to_string(-line) + ")";
    return "'" + key + "' (line " + std::to_string(line) + ")";
  }
};

[[noreturn]] void die(const Loc& at, const std::string& what) {
  throw ConfigError("config error at " + at.where() + ": " + what);
}

long long parse_int(const Loc& at, const std::string& v, long long lo,
                    long long hi) {
  char* end = nullptr;
  errno = 0;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (errno != 0 || end == v.c_str() || *end != '\0')
    die(at, "expected an integer, got '" + v + "'");
  if (x < lo || x > hi)
    die(at, "value " + v + " outside [" + std::to_string(lo) + ", " +
                std::to_string(hi) + "]");
  return x;
}

double parse_real(const Loc& at, const std::string& v, double lo, double hi) {
  char* end = nullptr;
  errno = 0;
  double x = std::strtod(v.c_str(), &end);
  if (errno != 0 || end == v.c_str() || *end != '\0' || !std::isfinite(x))
    die(at, "expected a real number, got '" + v + "'");
  if (x < lo || x > hi)
    die(at, "value " + v + " outside [" + std::to_string(lo) + ", " +
                std::to_string(hi) + "]");
  return x;
}

std::vector<double> parse_real_list(const Loc& at, const std::string& v,
                                    double lo, double hi) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t a = item.find_first_not_of(" \t");
    size_t b = item.find_last_not_of(" \t");
    if (a == std::string::npos) die(at, "empty list entry");
    out.push_back(parse_real(at, item.substr(a, b - a + 1), lo, hi));
  }
  if (out.empty()) die(at, "expected at least one value");
  return out;
}

uint64_t parse_u64(const Loc& at, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end == v.c_str() || *end != '\0' ||
      v.find('-') != std::string::npos)
    die(at, "expected a nonnegative integer, got '" + v + "'");
  return static_cast<uint64_t>(x);
}

void apply_kv(ExperimentConfig& c, const std::string& key,
              const std::string& value, int line) {
  Loc at{key, line};
  if (key == "experiment") {
    if (!parse_experiment(value, &c.experiment))
      die(at, "unknown experiment '" + value + "'");
  } else if (key == "beta") {
    c.beta = parse_real_list(at, value, 0.0, 8.0);
  } else if (key == "lattice.n_sites") {
    c.n_sites = static_cast<int>(parse_int(at, value, 2, 4096));
  } else if (key == "lattice.dt") {
    c.dt = parse_real(at, value, 1e-9, 1.0);
    double spu = 1.0 / c.dt;
    if (std::fabs(spu - std::lround(spu)) > 1e-6 * spu)
      die(at, "dt must divide the unit time interval");
  } else if (key == "lattice.t_steps") {
    c.t_steps = static_cast<int>(parse_int(at, value, 1, 1 << 30));
  } else if (key == "lattice.n_disorder") {
    c.n_disorder = static_cast<int>(parse_int(at, value, 2, 1 << 30));
  } else if (key == "mc.n_outer") {
    c.n_outer = parse_int(at, value, 2, 1LL << 40);
  } else if (key == "mc.n_grid") {
    c.n_grid = static_cast<int>(parse_int(at, value, 2, 1 << 22));
  } else if (key == "mc.n_thermal") {
    c.n_thermal = static_cast<int>(parse_int(at, value, 0, 1 << 20));
  } else if (key == "diag.probes") {
    c.probes = parse_real_list(at, value, 0.0, 1.0);
    for (double p : c.probes)
      if (p >= 1.0) die(at, "probes live on the half-open unit interval");
  } else if (key == "diag.n_permutations") {
    c.n_permutations = static_cast<int>(parse_int(at, value, 1, 1 << 24));
  } else if (key == "diag.s_step") {
    c.s_step = static_cast<int>(parse_int(at, value, 1, 1 << 30));
  } else if (key == "diag.stationary") {
    long long v = parse_int(at, value, 0, 1);
    c.stationary = v != 0;
  } else if (key == "diag.t_max") {
    // the decay fit needs at least four unit-time points
    c.t_max = parse_real(at, value, 4.0, 1e6);
  } else if (key == "brunet.h") {
    c.h = parse_real(at, value, 1e-6, 0.5);
  } else if (key == "seed") {
    c.seed = parse_u64(at, value);
  } else if (key == "workers") {
    c.workers = static_cast<int>(parse_int(at, value, 0, 4096));
  } else if (key == "output_dir") {
    if (value.empty()) die(at, "expected a path");
    c.output_dir = value;
  } else {
    die(at, "unknown key");
  }
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  double d = cfg.dt_or_default();
  double spu = 1.0 / d;
  if (std::fabs(spu - std::lround(spu)) > 1e-6 * spu)
    throw ConfigError(
        "config error at 'lattice.dt': dt must divide the unit time interval");
  if (cfg.s_step > 0 && cfg.t_steps > 0 && cfg.s_step >= cfg.t_steps)
    throw ConfigError(
        "config error at 'diag.s_step': probe step must precede lattice.t_steps");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  int line = 0;
  std::stringstream ss(text);
  std::string raw;
  while (std::getline(ss, raw)) {
    ++line;
    std::string s = raw;
    size_t hash = s.find('#');
    if (hash != std::string::npos) s.erase(hash);
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = s.find_last_not_of(" \t\r");
    s = s.substr(a, b - a + 1);
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config error at line " + std::to_string(line) +
                        ": expected key=value, got '" + s + "'");
    std::string key = s.substr(0, eq);
    std::string value = s.substr(eq + 1);
    size_t ke = key.find_last_not_of(" \t");
    key = key.substr(0, ke == std::string::npos ? 0 : ke + 1);
    size_t va = value.find_first_not_of(" \t");
    value = va == std::string::npos ? "" : value.substr(va);
    if (key.empty())
      throw ConfigError("config error at line " + std::to_string(line) +
                        ": empty key");
    apply_kv(cfg, key, value, line);
  }
  validate(cfg);
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& kv, int slot) {
  size_t eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config error at --set #" + std::to_string(slot) +
                      ": expected key=value, got '" + kv + "'");
  // cross-field validation is deferred to the caller: a run of overrides may
  // pass through states that only become consistent once all are applied
  apply_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1), -slot);
}

}  // namespace kpz
