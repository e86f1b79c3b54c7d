#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "censored_hybrid/common.hpp"
#include "censored_hybrid/expansion.hpp"
#include "censored_hybrid/model.hpp"

namespace censored_hybrid {

enum class GbarMode { constant_one, analytic_sup };

struct ASGConfig {
  double mu = 1.0;              // step gain, (0, 1]
  double alpha = 1.02;          // log exponent, > 1
  double M = 0.0;               // regressor component bound; must exceed e.
                                // <= 0 means "resolve from the generator
                                // config" (see resolved_M in trainer.hpp).
  double L_norm = 1.0;          // known bound on ||theta||_1 (Assumption 1)
  GbarMode gbar_mode = GbarMode::constant_one;
  double epsilon_growth = 0.0;  // [0, 0.5); 0 = bounded regime

  void validate() const {
    if (!(mu > 0.0 && mu <= 1.0)) throw ConfigError("asg: mu must be in (0, 1]");
    if (!(alpha > 1.0)) throw ConfigError("asg: alpha must exceed 1");
    if (!(M > std::exp(1.0))) throw ConfigError("asg: M must exceed the natural constant e");
    if (!(L_norm > 0.0)) throw ConfigError("asg: L_norm must be positive");
    if (!(epsilon_growth >= 0.0 && epsilon_growth < 0.5))
      throw ConfigError("asg: epsilon_growth must lie in [0, 0.5)");
  }
};

struct ASGState {
  ExpandedParameter theta;
  double r = 0.0;
  std::uint64_t k = 0;        // completed steps
  ASGConfig config;
  double norm_sum = 0.0;      // running sum of gbar^2 ||phi||^2; kept apart
                              // from r so the growth-mode base swap is exact
};

// r starts at M^4 p^2 (growth mode evaluates the base at k = 1, which is the
// same number). theta0 is arbitrary per the algorithm.
inline ASGState asg_init(std::size_t p, const ASGConfig& config,
                         ExpandedParameter theta0) {
  config.validate();
  if (p < 1) throw ConfigError("asg_init: p must be at least 1");
  if (theta0.values.size() != p) throw DataError("asg_init: theta0 length != p");
  ASGState st;
  st.theta = std::move(theta0);
  st.config = config;
  const double pd = static_cast<double>(p);
  st.r = std::pow(config.M, 4) * pd * pd;
  return st;
}

namespace detail {
inline double r_base(const ASGConfig& cfg, std::size_t p, std::uint64_t k_step) {
  double base = std::pow(cfg.M, 4) * static_cast<double>(p) * static_cast<double>(p);
  if (cfg.epsilon_growth > 0.0)
    base *= std::pow(static_cast<double>(k_step), 4.0 * cfg.epsilon_growth);
  return base;
}

inline double l1_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}
}  // namespace detail

// Upper bound on G' over the reachable prediction range. constant_one is
// the published experimental setting; analytic_sup evaluates G' at the
// point of [-C, C] closest to the interval midpoint (G' is unimodal with
// its peak there), C = max(M_k L_norm, M_k ||theta_k||_1), M_k = M k^eps.
inline double gbar(const ASGState& state, const SaturationBounds& bounds,
                   const NoiseModel& noise) {
  if (state.config.gbar_mode == GbarMode::constant_one) return 1.0;
  const std::uint64_t k_step = state.k + 1;
  double Mk = state.config.M;
  if (state.config.epsilon_growth > 0.0)
    Mk *= std::pow(static_cast<double>(k_step), state.config.epsilon_growth);
  const double C = std::max(Mk * state.config.L_norm,
                            Mk * detail::l1_norm(state.theta.values));
  const double mid = 0.5 * (bounds.lower + bounds.upper);
  const double x = std::clamp(mid, -C, C);
  return censored_mean_deriv(x, bounds, noise);
}

inline double gbar(const ASGState& state, const CaseRecord& c,
                   const NoiseModel& noise) {
  return gbar(state, c.bounds, noise);
}

// One online update:
//   r_k   = base_k + sum_{i<=k} gbar_i^2 ||phi_i||^2   (absorbs phi_k FIRST)
//   theta = theta + mu gbar phi [z - G(theta . phi)] / (r^{1/2} (ln r)^{a/2})
inline void asg_step(ASGState& state, const ExpandedRegressor& phi,
                     double z_next, const SaturationBounds& bounds,
                     const NoiseModel& noise) {
  if (phi.values.size() != state.theta.values.size())
    throw DataError("asg_step: phi length != theta length");
  const std::uint64_t k_step = state.k + 1;
  const double g = gbar(state, bounds, noise);
  double phi_sq = 0.0;
  for (double x : phi.values) phi_sq += x * x;
  state.norm_sum += g * g * phi_sq;
  state.r = detail::r_base(state.config, phi.values.size(), k_step) + state.norm_sum;

  const double pred = dot(state.theta.values, phi.values);
  const double gmean = censored_mean(pred, bounds, noise);
  const double denom = std::sqrt(state.r) * std::pow(std::log(state.r), state.config.alpha / 2.0);
  const double coef = state.config.mu * g * (z_next - gmean) / denom;
  if (!std::isfinite(coef) || !std::isfinite(gmean))
    throw NumericError("asg_step: non-finite update (mis-scaled config?)");
  double* th = state.theta.values.data();
  const double* ph = phi.values.data();
  for (std::size_t i = 0; i < phi.values.size(); ++i) th[i] += coef * ph[i];
  ++state.k;
}

// The adaptive predictor G(theta_k . phi); always strictly inside (L, N).
inline double adaptive_predict(const ASGState& state,
                               const ExpandedRegressor& phi,
                               const SaturationBounds& bounds,
                               const NoiseModel& noise) {
  return censored_mean(dot(state.theta.values, phi.values), bounds, noise);
}

struct RegretPoint {
  std::uint64_t k = 0;
  double R = 0.0;
  double cumulative = 0.0;
  double cum_normalized = 0.0;
};

struct RegretTracker {
  double cumulative = 0.0;
  std::vector<RegretPoint> log;
};

// R_k = [G(phi . theta_true) - G(phi . theta_k)]^2, evaluated with the
// pre-update theta (call before asg_step for step k). The normalized column
// divides by n^{1/2+eps} (ln n)^{alpha/2}; ln 1 = 0, so the k = 1 row
// records the raw cumulative instead.
inline void regret_step(RegretTracker& tracker, const ASGState& state,
                        const ExpandedRegressor& phi,
                        const ExpandedParameter& theta_true,
                        const SaturationBounds& bounds,
                        const NoiseModel& noise) {
  const double best = censored_mean(dot(theta_true.values, phi.values), bounds, noise);
  const double pred = adaptive_predict(state, phi, bounds, noise);
  const double R = (best - pred) * (best - pred);
  tracker.cumulative += R;
  const std::uint64_t n = state.k + 1;
  double normalized = tracker.cumulative;
  if (n > 1) {
    const double nd = static_cast<double>(n);
    normalized /= std::pow(nd, 0.5 + state.config.epsilon_growth) *
                  std::pow(std::log(nd), state.config.alpha / 2.0);
  }
  tracker.log.push_back({n, R, tracker.cumulative, normalized});
}

}  // namespace censored_hybrid
