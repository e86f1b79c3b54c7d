#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

#include "censored_hybrid/common.hpp"

namespace censored_hybrid {

struct SaturationBounds {
  double lower = 0.0;  // L_k, months
  double upper = 0.0;  // N_k, months

  void validate() const {
    if (!(lower < upper)) throw ConfigError("saturation bounds need lower < upper");
    if (!(lower > 0.0)) throw ConfigError("lower bound must be positive (relative-error loss divides by z)");
  }
};

struct CaseRecord {
  std::size_t index = 0;      // chronological order
  double a = 0.0;             // sentencing starting point, months
  int x1 = 0;                 // injury count 1
  int x2 = 0;                 // injury count 2
  std::vector<double> v;      // m1 primary factors in [0, 1]
  std::vector<double> u;      // m2 other factors in [-1, 1]
  std::vector<double> eta;    // m3 residual factors
  SaturationBounds bounds;
  std::optional<double> z;    // observed sentence, months
};

struct MechanismParams {
  double b = 0.0;             // months per x1 count
  double c = 0.0;             // months per x2 count
  std::vector<double> p;      // length m1
  std::vector<double> q;      // length m2
  double e = 0.0;             // constant bias term
};

struct BiasNetworkParams {
  std::size_t m = 0;          // hidden width
  std::size_t m3 = 0;         // input size
  std::vector<double> Gamma;  // 1 x m
  std::vector<double> B;      // m x m, row-major
  std::vector<double> A;      // m x m3, row-major
  std::vector<double> b1;     // m
  std::vector<double> b2;     // m
  double b3 = 0.0;

  void validate() const {
    if (Gamma.size() != m || B.size() != m * m || A.size() != m * m3 ||
        b1.size() != m || b2.size() != m)
      throw DataError("bias network shape mismatch");
  }
};

struct NoiseModel {
  double sigma = 5.0;  // months

  void validate() const {
    if (!(sigma > 0.0)) throw ConfigError("noise sigma must be positive");
  }
};

// Exactly one bias mode is active: the network when present, otherwise the
// constant mech.e.
struct HybridModel {
  MechanismParams mech;
  std::optional<BiasNetworkParams> net;
  std::size_t m1 = 0, m2 = 0, m3 = 0, m = 0;
};

inline double saturate(double x, const SaturationBounds& bounds) {
  return std::clamp(x, bounds.lower, bounds.upper);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double bias_forward(const BiasNetworkParams& net,
                           const std::vector<double>& eta) {
  if (eta.size() != net.m3) throw DataError("bias_forward: eta length != m3");
  net.validate();
  const std::size_t m = net.m, m3 = net.m3;
  std::vector<double> h1(m), h2(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = net.b1[i];
    for (std::size_t j = 0; j < m3; ++j) s += net.A[i * m3 + j] * eta[j];
    h1[i] = relu(s);
  }
  for (std::size_t i = 0; i < m; ++i) {
    double s = net.b2[i];
    for (std::size_t j = 0; j < m; ++j) s += net.B[i * m + j] * h1[j];
    h2[i] = relu(s);
  }
  double out = net.b3;
  for (std::size_t i = 0; i < m; ++i) out += net.Gamma[i] * h2[i];
  return out;
}

// Pre-saturation, noiseless sentence:
// [a + b x1 + c x2] * prod_i (1 + p_i v_i) * [1 + sum_j q_j u_j + e]
inline double mechanism_core(const MechanismParams& mech, const CaseRecord& c,
                             double e) {
  if (c.v.size() != mech.p.size() || c.u.size() != mech.q.size())
    throw DataError("mechanism_core: factor length mismatch");
  double bench = c.a + mech.b * c.x1 + mech.c * c.x2;
  double prod = 1.0;
  for (std::size_t i = 0; i < mech.p.size(); ++i) prod *= 1.0 + mech.p[i] * c.v[i];
  double bracket = 1.0 + e;
  for (std::size_t j = 0; j < mech.q.size(); ++j) bracket += mech.q[j] * c.u[j];
  return bench * prod * bracket;
}

inline double hybrid_predict(const HybridModel& model, const CaseRecord& c) {
  double e = model.net ? bias_forward(*model.net, c.eta) : model.mech.e;
  return saturate(mechanism_core(model.mech, c, e), c.bounds);
}

inline double normal_cdf(double t) {
  return 0.5 * std::erfc(-t / std::numbers::sqrt2);
}

inline double normal_pdf(double t) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * t * t);
}

// E[saturate(x + w)] for Gaussian w; strictly increasing, range (L, N).
inline double censored_mean(double x, const SaturationBounds& bounds,
                            const NoiseModel& noise) {
  noise.validate();
  const double L = bounds.lower, N = bounds.upper, s = noise.sigma;
  const double tl = (L - x) / s, tn = (N - x) / s;
  return L * normal_cdf(tl) + N * (1.0 - normal_cdf(tn)) +
         x * (normal_cdf(tn) - normal_cdf(tl)) +
         s * (normal_pdf(tl) - normal_pdf(tn));
}

// d/dx censored_mean = P(x + w lands strictly inside the bounds); in (0, 1),
// maximized at the interval midpoint.
inline double censored_mean_deriv(double x, const SaturationBounds& bounds,
                                  const NoiseModel& noise) {
  noise.validate();
  const double s = noise.sigma;
  return normal_cdf((bounds.upper - x) / s) - normal_cdf((bounds.lower - x) / s);
}

}  // namespace censored_hybrid
