#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "censored_hybrid/common.hpp"
#include "censored_hybrid/model.hpp"

namespace censored_hybrid {

// Per-coordinate standardization fitted on the training split. A coordinate
// whose std collapses (constant feature) passes through unchanged.
struct Standardizer {
  std::vector<double> mean, std;

  void apply(std::vector<double>& x) const {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std[i] > 1e-12) x[i] = (x[i] - mean[i]) / std[i];
  }
};

// Raw input vector for the pure-network baseline: [a, x1, x2, v, u, eta].
inline std::vector<double> snn_input(const CaseRecord& c) {
  std::vector<double> x;
  x.reserve(3 + c.v.size() + c.u.size() + c.eta.size());
  x.push_back(c.a);
  x.push_back(static_cast<double>(c.x1));
  x.push_back(static_cast<double>(c.x2));
  x.insert(x.end(), c.v.begin(), c.v.end());
  x.insert(x.end(), c.u.begin(), c.u.end());
  x.insert(x.end(), c.eta.begin(), c.eta.end());
  return x;
}

inline Standardizer fit_standardizer(const std::vector<CaseRecord>& cases) {
  if (cases.empty()) throw DataError("fit_standardizer: no cases");
  const std::size_t d = snn_input(cases.front()).size();
  Standardizer st;
  st.mean.assign(d, 0.0);
  st.std.assign(d, 0.0);
  for (const CaseRecord& c : cases) {
    std::vector<double> x = snn_input(c);
    for (std::size_t i = 0; i < d; ++i) st.mean[i] += x[i];
  }
  const double n = static_cast<double>(cases.size());
  for (double& m : st.mean) m /= n;
  for (const CaseRecord& c : cases) {
    std::vector<double> x = snn_input(c);
    for (std::size_t i = 0; i < d; ++i) {
      double dlt = x[i] - st.mean[i];
      st.std[i] += dlt * dlt;
    }
  }
  for (double& s : st.std) s = std::sqrt(s / n);
  return st;
}

// Two-hidden-layer ReLU network with scalar output, flattened as
// [W1 (w x d), bias1, W2 (w x w), bias2, W3 (w), bias3].
struct SnnLayout {
  std::size_t d = 0, width = 0;

  std::size_t off_W1() const { return 0; }
  std::size_t off_bias1() const { return width * d; }
  std::size_t off_W2() const { return off_bias1() + width; }
  std::size_t off_bias2() const { return off_W2() + width * width; }
  std::size_t off_W3() const { return off_bias2() + width; }
  std::size_t off_bias3() const { return off_W3() + width; }
  std::size_t total() const { return off_bias3() + 1; }
};

struct SnnParams {
  SnnLayout layout;
  std::vector<double> x;

  static SnnParams zeros(const SnnLayout& lay) {
    return {lay, std::vector<double>(lay.total(), 0.0)};
  }
};

namespace detail {

struct SnnForward {
  std::vector<double> z1, h1, z2, h2;
  double out = 0.0;    // pre-saturation
  double zhat = 0.0;
  bool inside = false;
};

inline void snn_forward_case(const SnnParams& sp, const std::vector<double>& in,
                             const SaturationBounds& bounds, SnnForward& f) {
  const SnnLayout& lay = sp.layout;
  if (in.size() != lay.d) throw DataError("snn: input length mismatch");
  const double* x = sp.x.data();
  const std::size_t w = lay.width, d = lay.d;
  f.z1.resize(w); f.h1.resize(w); f.z2.resize(w); f.h2.resize(w);
  for (std::size_t i = 0; i < w; ++i) {
    double s = x[lay.off_bias1() + i];
    for (std::size_t j = 0; j < d; ++j) s += x[lay.off_W1() + i * d + j] * in[j];
    f.z1[i] = s;
    f.h1[i] = relu(s);
  }
  for (std::size_t i = 0; i < w; ++i) {
    double s = x[lay.off_bias2() + i];
    for (std::size_t j = 0; j < w; ++j) s += x[lay.off_W2() + i * w + j] * f.h1[j];
    f.z2[i] = s;
    f.h2[i] = relu(s);
  }
  double out = x[lay.off_bias3()];
  for (std::size_t i = 0; i < w; ++i) out += x[lay.off_W3() + i] * f.h2[i];
  f.out = out;
  f.zhat = saturate(out, bounds);
  f.inside = out >= bounds.lower && out <= bounds.upper;
}

}  // namespace detail

inline double snn_predict(const SnnParams& sp, const Standardizer& st,
                          const CaseRecord& c) {
  std::vector<double> in = snn_input(c);
  st.apply(in);
  detail::SnnForward f;
  detail::snn_forward_case(sp, in, c.bounds, f);
  return f.zhat;
}

// Mean relative error loss (the gamma = 0 batch loss) and its exact
// subgradient, same conventions as the hybrid gradient: sign(0) = 0, clamp
// passes gradient on [L, N] inclusive, ReLU'(0) = 0. Fixed-order summation.
inline std::pair<SnnParams, double> snn_loss_and_grad(
    const SnnParams& sp, const Standardizer& st,
    const std::vector<CaseRecord>& batch) {
  if (batch.empty()) throw DataError("snn: empty batch");
  const SnnLayout& lay = sp.layout;
  const double T = static_cast<double>(batch.size());
  SnnParams grad = SnnParams::zeros(lay);
  double* g = grad.x.data();
  const double* x = sp.x.data();
  const std::size_t w = lay.width, d = lay.d;
  double loss = 0.0;
  detail::SnnForward f;
  std::vector<double> in, dh2(w), dh1(w);
  for (const CaseRecord& c : batch) {
    if (!c.z || *c.z <= 0.0) throw DataError("snn: case without positive observed z");
    in = snn_input(c);
    st.apply(in);
    detail::snn_forward_case(sp, in, c.bounds, f);
    loss += std::abs(*c.z - f.zhat) / *c.z;
    double dout = 0.0;
    if (f.inside) dout = -sign0(*c.z - f.zhat) / (*c.z * T);
    if (dout == 0.0) continue;
    g[lay.off_bias3()] += dout;
    for (std::size_t i = 0; i < w; ++i) {
      g[lay.off_W3() + i] += dout * f.h2[i];
      dh2[i] = f.z2[i] > 0.0 ? dout * x[lay.off_W3() + i] : 0.0;
    }
    for (std::size_t i = 0; i < w; ++i) {
      if (dh2[i] == 0.0) continue;
      for (std::size_t j = 0; j < w; ++j) g[lay.off_W2() + i * w + j] += dh2[i] * f.h1[j];
      g[lay.off_bias2() + i] += dh2[i];
    }
    for (std::size_t j = 0; j < w; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < w; ++i) s += x[lay.off_W2() + i * w + j] * dh2[i];
      dh1[j] = f.z1[j] > 0.0 ? s : 0.0;
    }
    for (std::size_t i = 0; i < w; ++i) {
      if (dh1[i] == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) g[lay.off_W1() + i * d + j] += dh1[i] * in[j];
      g[lay.off_bias1() + i] += dh1[i];
    }
  }
  return {std::move(grad), loss / T};
}

struct SnnModel {
  Standardizer standardizer;
  SnnParams params;
};

}  // namespace censored_hybrid
