#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#ifndef _WIN32
#include <sys/wait.h>
#include <unistd.h>
#endif

#include "censored_hybrid/datagen.hpp"
#include "censored_hybrid/rng.hpp"
#include "censored_hybrid/serialize.hpp"

namespace test_support {

using namespace censored_hybrid;

inline MechanismParams random_mech(Rng& rng, std::size_t m1, std::size_t m2) {
  MechanismParams m;
  m.b = rng.uniform(0.5, 6.0);
  m.c = rng.uniform(0.5, 4.0);
  m.p.resize(m1);
  for (double& x : m.p) x = rng.uniform(-0.3, 0.4);
  m.q.resize(m2);
  for (double& x : m.q) x = rng.uniform(-0.2, 0.2);
  m.e = rng.uniform(-0.2, 0.3);
  return m;
}

inline CaseRecord random_case(Rng& rng, std::size_t m1, std::size_t m2,
                              std::size_t m3 = 0,
                              SaturationBounds bounds = {6.0, 36.0}) {
  CaseRecord c;
  c.a = rng.uniform(2.0, 12.0);
  c.x1 = static_cast<int>(rng.below(4));
  c.x2 = static_cast<int>(rng.below(4));
  c.v.resize(m1);
  for (double& x : c.v) x = rng.uniform01() < 0.5 ? 1.0 : 0.0;
  c.u.resize(m2);
  for (double& x : c.u) {
    double d = rng.uniform01();
    x = d < 0.3 ? -1.0 : d < 0.6 ? 1.0 : 0.0;
  }
  c.eta.resize(m3);
  for (double& x : c.eta) x = rng.normal();
  c.bounds = bounds;
  c.z = rng.uniform(4.0, 40.0);
  return c;
}

inline BiasNetworkParams random_net(Rng& rng, std::size_t m, std::size_t m3) {
  BiasNetworkParams n;
  n.m = m;
  n.m3 = m3;
  n.A.resize(m * m3);
  n.B.resize(m * m);
  n.Gamma.resize(m);
  n.b1.resize(m);
  n.b2.resize(m);
  for (double& x : n.A) x = rng.uniform(-0.6, 0.6);
  for (double& x : n.B) x = rng.uniform(-0.6, 0.6);
  for (double& x : n.Gamma) x = rng.uniform(-0.6, 0.6);
  for (double& x : n.b1) x = rng.uniform(-0.3, 0.3);
  for (double& x : n.b2) x = rng.uniform(-0.3, 0.3);
  n.b3 = rng.uniform(-0.2, 0.4);
  return n;
}

// Case-varying bias truth for the ordering experiment: a random two-layer
// net whose output weights are nonnegative (so the bias has a finite floor
// and the generator's positivity guard can never trip), affinely rescaled
// so that e over eta ~ N(0, I) has mean 0.4 and std 0.25.
inline BiasNetworkParams make_varying_truth_net(std::uint64_t seed,
                                                std::size_t m, std::size_t m3) {
  Rng rng(seed_for(seed, "truth_net", 0));
  BiasNetworkParams net;
  net.m = m;
  net.m3 = m3;
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  net.A.resize(m * m3);
  for (double& x : net.A) x = rng.normal();
  net.b1.resize(m);
  for (double& x : net.b1) x = rng.normal() * 0.5;
  net.B.resize(m * m);
  for (double& x : net.B) x = rng.normal() * inv_sqrt_m;
  net.b2.resize(m);
  for (double& x : net.b2) x = rng.normal() * 0.5;
  net.Gamma.resize(m);
  for (double& x : net.Gamma) x = std::abs(rng.normal()) * inv_sqrt_m;
  net.b3 = 0.0;

  const std::size_t n_probe = 20000;
  std::vector<double> eta(m3), raw(n_probe);
  double mu = 0.0;
  for (std::size_t i = 0; i < n_probe; ++i) {
    for (double& x : eta) x = rng.normal();
    raw[i] = bias_forward(net, eta);
    mu += raw[i];
  }
  mu /= static_cast<double>(n_probe);
  double var = 0.0;
  for (double r : raw) var += (r - mu) * (r - mu);
  const double sd = std::sqrt(var / static_cast<double>(n_probe));
  const double scale = 0.25 / std::max(sd, 1e-9);
  for (double& x : net.Gamma) x *= scale;
  net.b3 = 0.4 - mu * scale;
  return net;
}

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

inline std::filesystem::path fresh_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  std::filesystem::path p = std::filesystem::temp_directory_path() /
                            ("censored_hybrid_test_" + tag + "_" +
                             std::to_string(::getpid()) + "_" +
                             std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline int run_cmd(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
#ifdef _WIN32
  return rc;
#else
  return WEXITSTATUS(rc);
#endif
}

}  // namespace test_support
