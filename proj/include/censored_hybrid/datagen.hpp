#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "censored_hybrid/common.hpp"
#include "censored_hybrid/expansion.hpp"
#include "censored_hybrid/model.hpp"
#include "censored_hybrid/rng.hpp"

namespace censored_hybrid {

enum class Regime { minor, serious };

inline SaturationBounds regime_bounds(Regime r) {
  return r == Regime::minor ? SaturationBounds{6.0, 36.0}
                            : SaturationBounds{36.0, 120.0};
}

inline double regime_default_a(Regime r) { return r == Regime::minor ? 10.0 : 40.0; }

inline std::string regime_name(Regime r) { return r == Regime::minor ? "minor" : "serious"; }

// Ground truth for synthetic data: a mechanism, plus optionally a bias
// network that makes e_k case-varying (mech.e is ignored when net is set).
struct TruthSpec {
  MechanismParams mech;
  std::optional<BiasNetworkParams> net;
};

// Calibrated truth magnitudes for the default m1=2/m2=3 generator: with all
// other knobs at their defaults this censors roughly 10-20% of cases, split
// across both bounds, so synthetic runs exercise clamped and interior
// branches alike.
inline TruthSpec default_truth() {
  TruthSpec t;
  t.mech.b = 6.0;
  t.mech.c = 3.0;
  t.mech.p = {0.4, -0.3};
  t.mech.q = {0.2, -0.15, 0.1};
  t.mech.e = 0.1;
  return t;
}

struct GeneratorConfig {
  std::size_t m1 = 2, m2 = 3, m3 = 3;
  std::size_t n = 0;
  Regime regime = Regime::minor;
  double sigma = 5.0;
  TruthSpec truth;
  double v_activation = 0.15;  // P(v_i = 1)
  double u_activation = 0.15;  // P(u_j != 0)
  bool u_signed = true;        // active u_j is -1/+1 instead of always +1
  double a = -1.0;             // starting point; < 0 means regime default
  int x1_max = 3, x2_max = 2;
  double growth_epsilon = 0.0; // k^eps scaling of a_k and bounds (growth regime)
  std::uint64_t seed = 1;

  double resolved_a() const { return a < 0.0 ? regime_default_a(regime) : a; }

  void validate() const {
    if (n == 0) throw ConfigError("generator: n must be positive");
    if (truth.mech.p.size() != m1 || truth.mech.q.size() != m2)
      throw ConfigError("generator: truth parameter lengths do not match m1/m2");
    if (truth.net && truth.net->m3 != m3)
      throw ConfigError("generator: truth network m3 mismatch");
    if (!(sigma > 0.0)) throw ConfigError("generator: sigma must be positive");
    if (v_activation < 0.0 || v_activation > 1.0 || u_activation < 0.0 || u_activation > 1.0)
      throw ConfigError("generator: activation probabilities must be in [0, 1]");
    if (x1_max < 0 || x2_max < 0) throw ConfigError("generator: x ranges must be nonnegative");
    if (!(resolved_a() > 0.0)) throw ConfigError("generator: starting point a must be positive");
    if (growth_epsilon < 0.0 || growth_epsilon >= 0.5)
      throw ConfigError("generator: growth_epsilon must lie in [0, 0.5)");
  }

  std::uint64_t fingerprint() const {
    Fnv1a h;
    h.str("generator_config/v1");
    h.u64(m1); h.u64(m2); h.u64(m3); h.u64(n);
    h.u64(regime == Regime::minor ? 0 : 1);
    h.f64(sigma);
    h.f64(truth.mech.b); h.f64(truth.mech.c);
    for (double x : truth.mech.p) h.f64(x);
    for (double x : truth.mech.q) h.f64(x);
    h.f64(truth.mech.e);
    h.u64(truth.net ? 1 : 0);
    if (truth.net) {
      h.u64(truth.net->m); h.u64(truth.net->m3);
      for (double x : truth.net->Gamma) h.f64(x);
      for (double x : truth.net->B) h.f64(x);
      for (double x : truth.net->A) h.f64(x);
      for (double x : truth.net->b1) h.f64(x);
      for (double x : truth.net->b2) h.f64(x);
      h.f64(truth.net->b3);
    }
    h.f64(v_activation); h.f64(u_activation);
    h.u64(u_signed ? 1 : 0);
    h.f64(a);
    h.u64(static_cast<std::uint64_t>(x1_max));
    h.u64(static_cast<std::uint64_t>(x2_max));
    h.f64(growth_epsilon);
    h.u64(seed);
    return h.value();
  }
};

struct Dataset {
  std::vector<CaseRecord> cases;      // chronological
  GeneratorConfig config;             // truth snapshot travels with the data
  std::uint64_t config_fingerprint = 0;
};

// Largest magnitude any expanded-regressor component can take under this
// config: subset products of v and u entries are at most 1, so the bound is
// the largest of a (at its final growth scale), x1_max, x2_max.
inline double implied_M(const GeneratorConfig& cfg) {
  double a_max = cfg.resolved_a();
  if (cfg.growth_epsilon > 0.0)
    a_max *= std::pow(static_cast<double>(cfg.n), cfg.growth_epsilon);
  return std::max({a_max, static_cast<double>(cfg.x1_max),
                   static_cast<double>(cfg.x2_max)});
}

namespace detail {

// Draw order per case is frozen (x1, x2, v, u, eta, w); each case owns the
// stream seed_for(seed, "case", k), so generation parallelizes without
// changing results.
inline CaseRecord generate_case(const GeneratorConfig& cfg, std::size_t k) {
  Rng rng(seed_for(cfg.seed, "case", k));
  CaseRecord c;
  c.index = k;
  c.x1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.x1_max) + 1));
  c.x2 = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.x2_max) + 1));
  c.v.resize(cfg.m1);
  for (std::size_t i = 0; i < cfg.m1; ++i)
    c.v[i] = rng.uniform01() < cfg.v_activation ? 1.0 : 0.0;
  c.u.resize(cfg.m2);
  for (std::size_t j = 0; j < cfg.m2; ++j) {
    if (rng.uniform01() < cfg.u_activation)
      c.u[j] = cfg.u_signed ? (rng.uniform01() < 0.5 ? -1.0 : 1.0) : 1.0;
    else
      c.u[j] = 0.0;
  }
  c.eta.resize(cfg.m3);
  for (std::size_t j = 0; j < cfg.m3; ++j) c.eta[j] = rng.normal();

  const double scale = cfg.growth_epsilon > 0.0
                           ? std::pow(static_cast<double>(k + 1), cfg.growth_epsilon)
                           : 1.0;
  c.a = cfg.resolved_a() * scale;
  SaturationBounds base = regime_bounds(cfg.regime);
  c.bounds = {base.lower * scale, base.upper * scale};

  const double e_k = cfg.truth.net ? bias_forward(*cfg.truth.net, c.eta)
                                   : cfg.truth.mech.e;
  const double bench = c.a + cfg.truth.mech.b * c.x1 + cfg.truth.mech.c * c.x2;
  if (!(bench > 0.0)) throw ConfigError("generator: nonpositive benchmark sentence");
  double prod = 1.0;
  for (std::size_t i = 0; i < cfg.m1; ++i) {
    double f = 1.0 + cfg.truth.mech.p[i] * c.v[i];
    if (!(f > 0.0)) throw ConfigError("generator: 1 + p_i v_i must stay positive");
    prod *= f;
  }
  double bracket = 1.0 + e_k;
  for (std::size_t j = 0; j < cfg.m2; ++j) bracket += cfg.truth.mech.q[j] * c.u[j];
  if (!(bracket > 0.0)) throw ConfigError("generator: nonpositive factor bracket");

  const double w = cfg.sigma * rng.normal();
  c.z = saturate(bench * prod * bracket + w, c.bounds);
  return c;
}

}  // namespace detail

inline Dataset generate(const GeneratorConfig& cfg, unsigned max_threads = 0) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  ds.config_fingerprint = cfg.fingerprint();
  ds.cases.resize(cfg.n);
  std::exception_ptr err;
  std::mutex err_mu;
  parallel_for(
      cfg.n,
      [&](std::size_t k) {
        try {
          ds.cases[k] = detail::generate_case(cfg, k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      },
      max_threads);
  if (err) std::rethrow_exception(err);
  return ds;
}

// Chronological prefix/suffix split, train:test = 4:1 by default.
inline std::pair<Dataset, Dataset> split(const Dataset& ds,
                                         std::size_t train_parts = 4,
                                         std::size_t test_parts = 1) {
  const std::size_t n = ds.cases.size();
  const std::size_t total = train_parts + test_parts;
  if (total == 0) throw ConfigError("split: zero ratio");
  const std::size_t n_train = n * train_parts / total;
  if (n_train == 0 || n_train == n) throw DataError("split: dataset too small for the ratio");
  Dataset train{{}, ds.config, ds.config_fingerprint};
  Dataset test{{}, ds.config, ds.config_fingerprint};
  train.cases.assign(ds.cases.begin(), ds.cases.begin() + static_cast<long>(n_train));
  test.cases.assign(ds.cases.begin() + static_cast<long>(n_train), ds.cases.end());
  return {std::move(train), std::move(test)};
}

// Expanded ground-truth parameter for regret tracking; only defined when
// the truth bias is the constant e.
inline ExpandedParameter truth_theta(const Dataset& ds) {
  if (ds.config.truth.net)
    throw DataError("truth_theta: network-bias truth has no constant expanded parameter");
  return build_theta(ds.config.truth.mech, IndexMap(ds.config.m1, ds.config.m2));
}

}  // namespace censored_hybrid
