#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "censored_hybrid/common.hpp"
#include "censored_hybrid/model.hpp"

namespace censored_hybrid {

// Flattened parameter order: [b, c, p, q, Gamma, B, A, b1, b2, b3].
// The layout is part of the serialized model format; changing it is a
// schema break.
struct FlatLayout {
  std::size_t m1 = 0, m2 = 0, m = 0, m3 = 0;

  std::size_t off_b() const { return 0; }
  std::size_t off_c() const { return 1; }
  std::size_t off_p() const { return 2; }
  std::size_t off_q() const { return 2 + m1; }
  std::size_t off_gamma() const { return 2 + m1 + m2; }
  std::size_t off_B() const { return off_gamma() + m; }
  std::size_t off_A() const { return off_B() + m * m; }
  std::size_t off_b1() const { return off_A() + m * m3; }
  std::size_t off_b2() const { return off_b1() + m; }
  std::size_t off_b3() const { return off_b2() + m; }
  std::size_t total() const { return off_b3() + 1; }

  bool operator==(const FlatLayout&) const = default;
};

struct FlatParams {
  FlatLayout layout;
  std::vector<double> x;

  static FlatParams zeros(const FlatLayout& layout) {
    return {layout, std::vector<double>(layout.total(), 0.0)};
  }
};

inline FlatParams pack(const MechanismParams& mech, const BiasNetworkParams& net) {
  FlatLayout lay{mech.p.size(), mech.q.size(), net.m, net.m3};
  FlatParams fp = FlatParams::zeros(lay);
  double* x = fp.x.data();
  x[lay.off_b()] = mech.b;
  x[lay.off_c()] = mech.c;
  std::copy(mech.p.begin(), mech.p.end(), x + lay.off_p());
  std::copy(mech.q.begin(), mech.q.end(), x + lay.off_q());
  std::copy(net.Gamma.begin(), net.Gamma.end(), x + lay.off_gamma());
  std::copy(net.B.begin(), net.B.end(), x + lay.off_B());
  std::copy(net.A.begin(), net.A.end(), x + lay.off_A());
  std::copy(net.b1.begin(), net.b1.end(), x + lay.off_b1());
  std::copy(net.b2.begin(), net.b2.end(), x + lay.off_b2());
  x[lay.off_b3()] = net.b3;
  return fp;
}

// Inverse of pack. The constant-e slot does not exist in the flat vector
// (stage 2 always runs in network mode); mech.e is returned as 0.
inline std::pair<MechanismParams, BiasNetworkParams> unpack(const FlatParams& fp) {
  const FlatLayout& lay = fp.layout;
  if (fp.x.size() != lay.total()) throw DataError("unpack: flat vector length mismatch");
  const double* x = fp.x.data();
  MechanismParams mech;
  mech.b = x[lay.off_b()];
  mech.c = x[lay.off_c()];
  mech.p.assign(x + lay.off_p(), x + lay.off_p() + lay.m1);
  mech.q.assign(x + lay.off_q(), x + lay.off_q() + lay.m2);
  mech.e = 0.0;
  BiasNetworkParams net;
  net.m = lay.m;
  net.m3 = lay.m3;
  net.Gamma.assign(x + lay.off_gamma(), x + lay.off_gamma() + lay.m);
  net.B.assign(x + lay.off_B(), x + lay.off_B() + lay.m * lay.m);
  net.A.assign(x + lay.off_A(), x + lay.off_A() + lay.m * lay.m3);
  net.b1.assign(x + lay.off_b1(), x + lay.off_b1() + lay.m);
  net.b2.assign(x + lay.off_b2(), x + lay.off_b2() + lay.m);
  net.b3 = x[lay.off_b3()];
  return {std::move(mech), std::move(net)};
}

struct BatchLossReport {
  double loss = 0.0;
  double relerr_term = 0.0;
  double reg_term = 0.0;   // |mean_ehat - ebar|, pre-gamma
  double mean_ehat = 0.0;
};

namespace detail {

// Per-case forward intermediates kept for the backward pass.
struct CaseForward {
  std::vector<double> z1, h1, z2, h2;  // layer pre-activations / activations
  double ehat = 0.0;
  double bench = 0.0, prod = 0.0, bracket = 0.0;
  double core = 0.0, zhat = 0.0;
  bool inside = false;  // core within [L, N] inclusive
};

inline void forward_case(const FlatParams& fp, const CaseRecord& c,
                         CaseForward& f) {
  const FlatLayout& lay = fp.layout;
  const double* x = fp.x.data();
  if (c.v.size() != lay.m1 || c.u.size() != lay.m2 || c.eta.size() != lay.m3)
    throw DataError("batch case dimensions do not match parameter layout");
  const std::size_t m = lay.m, m3 = lay.m3;
  f.z1.resize(m);
  f.h1.resize(m);
  f.z2.resize(m);
  f.h2.resize(m);
  const double* A = x + lay.off_A();
  const double* B = x + lay.off_B();
  const double* Gamma = x + lay.off_gamma();
  const double* b1 = x + lay.off_b1();
  const double* b2 = x + lay.off_b2();
  for (std::size_t i = 0; i < m; ++i) {
    double s = b1[i];
    for (std::size_t j = 0; j < m3; ++j) s += A[i * m3 + j] * c.eta[j];
    f.z1[i] = s;
    f.h1[i] = relu(s);
  }
  for (std::size_t i = 0; i < m; ++i) {
    double s = b2[i];
    for (std::size_t j = 0; j < m; ++j) s += B[i * m + j] * f.h1[j];
    f.z2[i] = s;
    f.h2[i] = relu(s);
  }
  double ehat = x[lay.off_b3()];
  for (std::size_t i = 0; i < m; ++i) ehat += Gamma[i] * f.h2[i];
  f.ehat = ehat;
  f.bench = c.a + x[lay.off_b()] * c.x1 + x[lay.off_c()] * c.x2;
  f.prod = 1.0;
  const double* p = x + lay.off_p();
  for (std::size_t i = 0; i < lay.m1; ++i) f.prod *= 1.0 + p[i] * c.v[i];
  f.bracket = 1.0 + ehat;
  const double* q = x + lay.off_q();
  for (std::size_t j = 0; j < lay.m2; ++j) f.bracket += q[j] * c.u[j];
  f.core = f.bench * f.prod * f.bracket;
  f.zhat = saturate(f.core, c.bounds);
  f.inside = f.core >= c.bounds.lower && f.core <= c.bounds.upper;
}

// Backpropagates d(loss)/d(ehat) = de into the network parameter slots.
inline void backward_net(const FlatParams& fp, const CaseRecord& c,
                         const CaseForward& f, double de, double* g) {
  const FlatLayout& lay = fp.layout;
  const double* x = fp.x.data();
  const std::size_t m = lay.m, m3 = lay.m3;
  const double* B = x + lay.off_B();
  const double* Gamma = x + lay.off_gamma();
  g[lay.off_b3()] += de;
  std::vector<double> dh2(m), dh1(m);
  for (std::size_t i = 0; i < m; ++i) {
    g[lay.off_gamma() + i] += de * f.h2[i];
    dh2[i] = f.z2[i] > 0.0 ? de * Gamma[i] : 0.0;
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (dh2[i] == 0.0) continue;
    for (std::size_t j = 0; j < m; ++j) g[lay.off_B() + i * m + j] += dh2[i] * f.h1[j];
    g[lay.off_b2() + i] += dh2[i];
  }
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += B[i * m + j] * dh2[i];
    dh1[j] = f.z1[j] > 0.0 ? s : 0.0;
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (dh1[i] == 0.0) continue;
    for (std::size_t j = 0; j < m3; ++j) g[lay.off_A() + i * m3 + j] += dh1[i] * c.eta[j];
    g[lay.off_b1() + i] += dh1[i];
  }
}

}  // namespace detail

// Loss over one batch:
//   (1/T) sum |z - zhat| / z  +  gamma * |(1/T) sum ehat - ebar|
inline BatchLossReport batch_loss(const FlatParams& fp,
                                  const std::vector<CaseRecord>& batch,
                                  double gamma, double ebar) {
  if (batch.empty()) throw DataError("batch_loss: empty batch");
  BatchLossReport rep;
  detail::CaseForward f;
  for (const CaseRecord& c : batch) {
    if (!c.z || *c.z <= 0.0) throw DataError("batch_loss: case without positive observed z");
    detail::forward_case(fp, c, f);
    rep.relerr_term += std::abs(*c.z - f.zhat) / *c.z;
    rep.mean_ehat += f.ehat;
  }
  const double T = static_cast<double>(batch.size());
  rep.relerr_term /= T;
  rep.mean_ehat /= T;
  rep.reg_term = std::abs(rep.mean_ehat - ebar);
  rep.loss = rep.relerr_term + gamma * rep.reg_term;
  return rep;
}

// Exact subgradient of batch_loss, same shape as the parameters.
// Conventions: d|t|/dt = sign(t) with 0 at t = 0; the clamp passes gradient
// through on [L, N] inclusive and kills it outside; ReLU'(0) = 0.
// Two passes: forwards are stored per case so the regularizer sign (which
// needs the batch mean of ehat) is known before any backprop runs.
// Summation is in fixed case order, so results are bit-stable.
inline std::pair<FlatParams, BatchLossReport> batch_loss_and_grad(
    const FlatParams& fp, const std::vector<CaseRecord>& batch, double gamma,
    double ebar) {
  if (batch.empty()) throw DataError("batch_grad: empty batch");
  const double T = static_cast<double>(batch.size());
  std::vector<detail::CaseForward> fwd(batch.size());
  BatchLossReport rep;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const CaseRecord& c = batch[k];
    if (!c.z || *c.z <= 0.0) throw DataError("batch_grad: case without positive observed z");
    detail::forward_case(fp, c, fwd[k]);
    rep.relerr_term += std::abs(*c.z - fwd[k].zhat) / *c.z;
    rep.mean_ehat += fwd[k].ehat;
  }
  rep.relerr_term /= T;
  rep.mean_ehat /= T;
  rep.reg_term = std::abs(rep.mean_ehat - ebar);
  rep.loss = rep.relerr_term + gamma * rep.reg_term;

  FlatParams grad = FlatParams::zeros(fp.layout);
  double* g = grad.x.data();
  const FlatLayout& lay = fp.layout;
  const double* x = fp.x.data();
  const double reg_de = gamma * sign0(rep.mean_ehat - ebar) / T;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const CaseRecord& c = batch[k];
    const detail::CaseForward& f = fwd[k];
    // d(relerr)/d(core); zero when the clamp saturates the prediction
    double dcore = 0.0;
    if (f.inside) dcore = -sign0(*c.z - f.zhat) / (*c.z * T);
    if (dcore != 0.0) {
      g[lay.off_b()] += dcore * c.x1 * f.prod * f.bracket;
      g[lay.off_c()] += dcore * c.x2 * f.prod * f.bracket;
      const double* p = x + lay.off_p();
      for (std::size_t i = 0; i < lay.m1; ++i) {
        double rest = 1.0;  // product with factor i left out, recomputed exactly
        for (std::size_t l = 0; l < lay.m1; ++l)
          if (l != i) rest *= 1.0 + p[l] * c.v[l];
        g[lay.off_p() + i] += dcore * f.bench * c.v[i] * rest * f.bracket;
      }
      for (std::size_t j = 0; j < lay.m2; ++j)
        g[lay.off_q() + j] += dcore * f.bench * f.prod * c.u[j];
    }
    // ehat feeds both the data term (through core) and the anchor term
    double de = dcore * f.bench * f.prod + reg_de;
    if (de != 0.0) detail::backward_net(fp, c, f, de, g);
  }
  return {std::move(grad), rep};
}

inline FlatParams batch_grad(const FlatParams& fp,
                             const std::vector<CaseRecord>& batch, double gamma,
                             double ebar) {
  return batch_loss_and_grad(fp, batch, gamma, ebar).first;
}

}  // namespace censored_hybrid
