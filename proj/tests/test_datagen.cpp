#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "censored_hybrid/datagen.hpp"
#include "helpers.hpp"

using namespace censored_hybrid;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GeneratorConfig base_config() {
  GeneratorConfig cfg;
  cfg.m1 = 2;
  cfg.m2 = 3;
  cfg.m3 = 3;
  cfg.n = 200;
  cfg.regime = Regime::minor;
  cfg.sigma = 1.0;
  cfg.truth.mech.b = 3.0;
  cfg.truth.mech.c = 2.0;
  cfg.truth.mech.p = {0.3, -0.2};
  cfg.truth.mech.q = {0.15, -0.1, 0.08};
  cfg.truth.mech.e = 0.1;
  cfg.a = 3.0;
  cfg.x1_max = 3;
  cfg.x2_max = 3;
  cfg.seed = 11;
  return cfg;
}

bool same_case(const CaseRecord& l, const CaseRecord& r) {
  return l.index == r.index && l.a == r.a && l.x1 == r.x1 && l.x2 == r.x2 &&
         l.v == r.v && l.u == r.u && l.eta == r.eta &&
         l.bounds.lower == r.bounds.lower && l.bounds.upper == r.bounds.upper &&
         l.z == r.z;
}

}  // namespace

TEST_CASE("regime carries its clamp window and default start", "[datagen]") {
  REQUIRE(regime_bounds(Regime::minor).lower == 6.0);
  REQUIRE(regime_bounds(Regime::minor).upper == 36.0);
  REQUIRE(regime_bounds(Regime::serious).lower == 36.0);
  REQUIRE(regime_bounds(Regime::serious).upper == 120.0);
  REQUIRE(regime_default_a(Regime::minor) == 10.0);
  REQUIRE(regime_default_a(Regime::serious) == 40.0);
  REQUIRE(regime_name(Regime::minor) == "minor");
  REQUIRE(regime_name(Regime::serious) == "serious");
}

TEST_CASE("generator validation rejects bad configs", "[datagen]") {
  GeneratorConfig cfg = base_config();
  cfg.n = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config();
  cfg.truth.mech.p = {0.3};
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config();
  cfg.sigma = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config();
  cfg.v_activation = 1.2;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config();
  cfg.a = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config();
  cfg.growth_epsilon = 0.5;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);

  cfg = base_config();
  cfg.truth.net = test_support::make_varying_truth_net(1, 4, 2);
  REQUIRE(cfg.truth.net->m3 != cfg.m3);
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("positivity guards trip inside generation", "[datagen]") {
  // an always-on factor of 1 + (-1) collapses the product to zero
  GeneratorConfig cfg = base_config();
  cfg.truth.mech.p = {-1.0, 0.0};
  cfg.v_activation = 1.0;
  REQUIRE_THROWS_AS(generate(cfg), ConfigError);

  // all-negative always-on adjustments push the bracket below zero
  cfg = base_config();
  cfg.truth.mech.q = {-0.5, -0.5, -0.5};
  cfg.u_activation = 1.0;
  cfg.u_signed = false;
  REQUIRE_THROWS_AS(generate(cfg), ConfigError);
}

TEST_CASE("every generated case respects its regime window", "[datagen]") {
  GeneratorConfig cfg = base_config();
  cfg.n = 4000;
  Dataset ds = generate(cfg);
  REQUIRE(ds.cases.size() == 4000);
  for (const CaseRecord& c : ds.cases) {
    REQUIRE(c.bounds.lower == 6.0);
    REQUIRE(c.bounds.upper == 36.0);
    REQUIRE(c.z.has_value());
    REQUIRE(*c.z >= 6.0);
    REQUIRE(*c.z <= 36.0);
    REQUIRE(c.x1 >= 0);
    REQUIRE(c.x1 <= cfg.x1_max);
    REQUIRE(c.x2 >= 0);
    REQUIRE(c.x2 <= cfg.x2_max);
    for (double v : c.v) REQUIRE((v == 0.0 || v == 1.0));
    for (double u : c.u) REQUIRE((u == -1.0 || u == 0.0 || u == 1.0));
  }

  cfg.regime = Regime::serious;
  cfg.a = -1.0;  // pick up the serious default start
  cfg.n = 500;
  Dataset serious = generate(cfg);
  for (const CaseRecord& c : serious.cases) {
    REQUIRE(c.bounds.lower == 36.0);
    REQUIRE(c.bounds.upper == 120.0);
    REQUIRE(*c.z >= 36.0);
    REQUIRE(*c.z <= 120.0);
  }
}

TEST_CASE("clamping is active but not dominant at the calibration config",
          "[datagen]") {
  // the shipped truth magnitudes are calibrated so the all-default generator
  // censors 10-20% of cases with both bounds represented
  GeneratorConfig cfg;
  cfg.truth = default_truth();
  cfg.n = 20000;
  cfg.seed = 11;
  Dataset ds = generate(cfg);
  std::size_t at_lower = 0, at_upper = 0;
  for (const CaseRecord& c : ds.cases) {
    if (*c.z == 6.0) ++at_lower;
    if (*c.z == 36.0) ++at_upper;
  }
  const double frac =
      static_cast<double>(at_lower + at_upper) / static_cast<double>(cfg.n);
  REQUIRE(at_lower > 100);
  REQUIRE(at_upper > 100);
  REQUIRE(frac > 0.10);
  REQUIRE(frac < 0.20);
}

TEST_CASE("near-zero noise pins the degenerate case", "[datagen]") {
  GeneratorConfig cfg = base_config();
  cfg.sigma = 1e-12;
  cfg.v_activation = 0.0;
  cfg.u_activation = 0.0;
  cfg.x1_max = 0;
  cfg.x2_max = 0;
  cfg.a = 10.0;
  cfg.truth.mech.e = 0.0;
  cfg.n = 64;
  Dataset ds = generate(cfg);
  for (const CaseRecord& c : ds.cases) {
    REQUIRE(c.a == 10.0);
    REQUIRE(c.x1 == 0);
    REQUIRE(c.x2 == 0);
    REQUIRE_THAT(*c.z, WithinAbs(10.0, 1e-9));
  }
}

TEST_CASE("same seed reproduces the dataset across thread counts", "[datagen]") {
  GeneratorConfig cfg = base_config();
  cfg.n = 3000;
  Dataset one = generate(cfg, 1);
  Dataset four = generate(cfg, 4);
  Dataset again = generate(cfg, 4);
  REQUIRE(one.cases.size() == four.cases.size());
  for (std::size_t k = 0; k < one.cases.size(); ++k) {
    REQUIRE(same_case(one.cases[k], four.cases[k]));
    REQUIRE(same_case(one.cases[k], again.cases[k]));
  }
  REQUIRE(one.config_fingerprint == four.config_fingerprint);

  cfg.seed = 12;
  Dataset other = generate(cfg, 1);
  bool differs = false;
  for (std::size_t k = 0; k < one.cases.size() && !differs; ++k)
    differs = !same_case(one.cases[k], other.cases[k]);
  REQUIRE(differs);
}

TEST_CASE("config fingerprint is stable and sensitive", "[datagen]") {
  GeneratorConfig cfg = base_config();
  const std::uint64_t fp = cfg.fingerprint();
  REQUIRE(fp == cfg.fingerprint());

  GeneratorConfig other = base_config();
  other.seed += 1;
  REQUIRE(other.fingerprint() != fp);
  other = base_config();
  other.truth.mech.q[2] += 1e-9;
  REQUIRE(other.fingerprint() != fp);
  other = base_config();
  other.regime = Regime::serious;
  REQUIRE(other.fingerprint() != fp);

  Dataset ds = generate(cfg);
  REQUIRE(ds.config_fingerprint == fp);
}

TEST_CASE("growth scaling lifts the start and the window together", "[datagen]") {
  GeneratorConfig cfg = base_config();
  cfg.growth_epsilon = 0.2;
  cfg.n = 64;
  Dataset ds = generate(cfg);
  for (std::size_t k = 0; k < ds.cases.size(); ++k) {
    const double scale = std::pow(static_cast<double>(k + 1), 0.2);
    const CaseRecord& c = ds.cases[k];
    REQUIRE_THAT(c.a, WithinRel(3.0 * scale, 1e-15));
    REQUIRE_THAT(c.bounds.lower, WithinRel(6.0 * scale, 1e-15));
    REQUIRE_THAT(c.bounds.upper, WithinRel(36.0 * scale, 1e-15));
    REQUIRE(*c.z >= c.bounds.lower);
    REQUIRE(*c.z <= c.bounds.upper);
  }
  REQUIRE(ds.cases[0].a == 3.0);
  REQUIRE(ds.cases[63].a > 3.0 * std::pow(63.0, 0.2));
}

TEST_CASE("regressor magnitude bound tracks start, covariates, and growth",
          "[datagen]") {
  GeneratorConfig cfg = base_config();
  cfg.a = 10.0;
  cfg.x1_max = 3;
  cfg.x2_max = 2;
  REQUIRE(implied_M(cfg) == 10.0);

  cfg.a = 2.0;
  REQUIRE(implied_M(cfg) == 3.0);

  cfg.a = 10.0;
  cfg.growth_epsilon = 0.2;
  cfg.n = 1024;
  REQUIRE_THAT(implied_M(cfg), WithinRel(40.0, 1e-12));
}

TEST_CASE("chronological split keeps order and count", "[datagen]") {
  GeneratorConfig cfg = base_config();
  cfg.n = 10;
  Dataset ds = generate(cfg);
  auto [train, test] = split(ds);
  REQUIRE(train.cases.size() == 8);
  REQUIRE(test.cases.size() == 2);
  for (std::size_t k = 0; k < 8; ++k) REQUIRE(same_case(train.cases[k], ds.cases[k]));
  for (std::size_t k = 0; k < 2; ++k) REQUIRE(same_case(test.cases[k], ds.cases[8 + k]));
  REQUIRE(train.config_fingerprint == ds.config_fingerprint);
  REQUIRE(test.config_fingerprint == ds.config_fingerprint);

  cfg.n = 50000;
  Dataset big = generate(cfg);
  auto [btrain, btest] = split(big, 4, 1);
  REQUIRE(btrain.cases.size() == 40000);
  REQUIRE(btest.cases.size() == 10000);

  Dataset tiny;
  tiny.config = cfg;
  tiny.cases.resize(1);
  REQUIRE_THROWS_AS(split(tiny, 4, 1), DataError);
  REQUIRE_THROWS_AS(split(ds, 1, 0), DataError);
  REQUIRE_THROWS_AS(split(ds, 0, 0), ConfigError);
}

TEST_CASE("expanded truth exists only for constant bias", "[datagen]") {
  GeneratorConfig cfg = base_config();
  cfg.n = 5;
  Dataset ds = generate(cfg);
  ExpandedParameter theta = truth_theta(ds);
  IndexMap map(cfg.m1, cfg.m2);
  REQUIRE(theta.values.size() == map.dim());
  REQUIRE_THAT(theta.values[map.slot_one()], WithinRel(1.1, 1e-14));
  ExpandedParameter direct = build_theta(cfg.truth.mech, map);
  REQUIRE(theta.values == direct.values);

  cfg.m3 = 2;
  cfg.truth.net = test_support::make_varying_truth_net(3, 4, 2);
  Dataset with_net = generate(cfg);
  REQUIRE_THROWS_AS(truth_theta(with_net), DataError);
}

TEST_CASE("sample mean of z matches the censored mean formula", "[datagen]") {
  // all covariates off: the pre-clamp outcome is 11 + noise for every case,
  // so the z sample mean estimates the censored mean at x = 11
  GeneratorConfig cfg = base_config();
  cfg.v_activation = 0.0;
  cfg.u_activation = 0.0;
  cfg.x1_max = 0;
  cfg.x2_max = 0;
  cfg.a = 10.0;
  cfg.m3 = 0;
  cfg.n = 1000000;
  cfg.seed = 21;
  Dataset ds = generate(cfg);

  double mean = 0.0;
  for (const CaseRecord& c : ds.cases) mean += *c.z;
  mean /= static_cast<double>(cfg.n);
  double var = 0.0;
  for (const CaseRecord& c : ds.cases) {
    const double d = *c.z - mean;
    var += d * d;
  }
  var /= static_cast<double>(cfg.n - 1);
  const double se = std::sqrt(var / static_cast<double>(cfg.n));

  const double expected =
      censored_mean(11.0, regime_bounds(Regime::minor), NoiseModel{cfg.sigma});
  REQUIRE(std::abs(mean - expected) < 4.0 * se);
}

TEST_CASE("case-varying truth keeps the factor bracket positive", "[datagen]") {
  GeneratorConfig cfg = base_config();
  cfg.truth.net = test_support::make_varying_truth_net(7, 16, 3);
  cfg.truth.mech.e = 0.0;
  cfg.n = 20000;
  Dataset ds = generate(cfg);  // would throw if any bracket went nonpositive
  double emin = 1e9, emax = -1e9, esum = 0.0;
  for (const CaseRecord& c : ds.cases) {
    const double e = bias_forward(*cfg.truth.net, c.eta);
    emin = std::min(emin, e);
    emax = std::max(emax, e);
    esum += e;
  }
  REQUIRE(emin > -0.2);           // nonnegative output weights floor the bias
  REQUIRE(emax > emin + 0.05);    // and it genuinely varies case to case
  REQUIRE_THAT(esum / static_cast<double>(cfg.n), WithinAbs(0.4, 0.05));
}
