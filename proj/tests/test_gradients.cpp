#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "censored_hybrid/gradients.hpp"
#include "censored_hybrid/model.hpp"
#include "helpers.hpp"

using namespace censored_hybrid;
using test_support::random_case;
using test_support::random_mech;
using test_support::random_net;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BiasNetworkParams zero_net(std::size_t m, std::size_t m3) {
  BiasNetworkParams net;
  net.m = m;
  net.m3 = m3;
  net.A.assign(m * m3, 0.0);
  net.b1.assign(m, 0.0);
  net.B.assign(m * m, 0.0);
  net.b2.assign(m, 0.0);
  net.Gamma.assign(m, 0.0);
  net.b3 = 0.0;
  return net;
}

CaseRecord plain_case(double a, std::size_t m1, std::size_t m2, std::size_t m3,
                      double z) {
  CaseRecord c;
  c.a = a;
  c.x1 = 0.0;
  c.x2 = 0.0;
  c.v.assign(m1, 0.0);
  c.u.assign(m2, 0.0);
  c.eta.assign(m3, 0.0);
  c.bounds = SaturationBounds{6.0, 36.0};
  c.z = z;
  return c;
}

}  // namespace

TEST_CASE("flat layout offsets partition the vector", "[gradients]") {
  FlatLayout lay{2, 3, 4, 5};
  REQUIRE(lay.off_b() == 0);
  REQUIRE(lay.off_c() == 1);
  REQUIRE(lay.off_p() == 2);
  REQUIRE(lay.off_q() == 4);
  REQUIRE(lay.off_gamma() == 7);
  REQUIRE(lay.off_B() == 11);
  REQUIRE(lay.off_A() == 27);
  REQUIRE(lay.off_b1() == 47);
  REQUIRE(lay.off_b2() == 51);
  REQUIRE(lay.off_b3() == 55);
  REQUIRE(lay.total() == 56);
  REQUIRE(lay.total() == 2 + lay.m1 + lay.m2 + lay.m * lay.m + lay.m * lay.m3 + 3 * lay.m + 1);
}

TEST_CASE("pack and unpack round trip", "[gradients]") {
  Rng rng(seed_for(404, "packrt", 0));
  MechanismParams mech = random_mech(rng, 3, 4);
  BiasNetworkParams net = random_net(rng, 5, 2);
  FlatParams fp = pack(mech, net);
  REQUIRE(fp.layout.m1 == 3);
  REQUIRE(fp.layout.m2 == 4);
  REQUIRE(fp.layout.m == 5);
  REQUIRE(fp.layout.m3 == 2);
  REQUIRE(fp.x.size() == fp.layout.total());

  auto [mech2, net2] = unpack(fp);
  REQUIRE(mech2.b == mech.b);
  REQUIRE(mech2.c == mech.c);
  REQUIRE(mech2.p == mech.p);
  REQUIRE(mech2.q == mech.q);
  REQUIRE(net2.A == net.A);
  REQUIRE(net2.B == net.B);
  REQUIRE(net2.Gamma == net.Gamma);
  REQUIRE(net2.b1 == net.b1);
  REQUIRE(net2.b2 == net.b2);
  REQUIRE(net2.b3 == net.b3);

  // every slot is live: flipping any coordinate changes the unpacked params
  FlatParams fp2 = fp;
  fp2.x[fp.layout.off_q() + 1] += 1.0;
  auto [mech3, net3] = unpack(fp2);
  REQUIRE(mech3.q[1] == mech.q[1] + 1.0);
  REQUIRE(net3.b3 == net.b3);
}

TEST_CASE("single-case relative error with no regularizer", "[gradients]") {
  // zhat = a = 13 interior, z = 10: loss |10-13|/10 = 0.3
  MechanismParams mech;
  mech.b = 2.0;
  mech.c = 1.0;
  mech.p = {0.0, 0.0};
  mech.q = {0.0, 0.0, 0.0};
  mech.e = 0.0;
  FlatParams fp = pack(mech, zero_net(3, 2));
  std::vector<CaseRecord> batch{plain_case(13.0, 2, 3, 2, 10.0)};

  BatchLossReport rep = batch_loss(fp, batch, 0.0, 0.0);
  REQUIRE_THAT(rep.loss, WithinRel(0.3, 1e-14));
  REQUIRE_THAT(rep.relerr_term, WithinRel(0.3, 1e-14));
  REQUIRE(rep.reg_term == 0.0);
  REQUIRE(rep.mean_ehat == 0.0);
}

TEST_CASE("regularizer adds gamma times mean bias gap", "[gradients]") {
  // constant net output 0.15, ebar = 0.1, relative error fixed at 0.1:
  // loss = 0.1 + 1.4 * |0.15 - 0.1| = 0.17
  BiasNetworkParams net = zero_net(3, 2);
  net.b3 = 0.15;
  MechanismParams mech;
  mech.b = 2.0;
  mech.c = 1.0;
  mech.p = {0.0, 0.0};
  mech.q = {0.0, 0.0, 0.0};
  FlatParams fp = pack(mech, net);

  const double zhat = 10.0 * 1.15;           // interior of [6, 36]
  const double z = zhat / 0.9;               // |z - zhat|/z = 0.1
  std::vector<CaseRecord> batch{plain_case(10.0, 2, 3, 2, z)};

  BatchLossReport rep = batch_loss(fp, batch, 1.4, 0.1);
  REQUIRE_THAT(rep.relerr_term, WithinRel(0.1, 1e-12));
  REQUIRE_THAT(rep.reg_term, WithinRel(0.05, 1e-12));
  REQUIRE_THAT(rep.mean_ehat, WithinRel(0.15, 1e-12));
  REQUIRE_THAT(rep.loss, WithinRel(0.17, 1e-12));

  // same data with gamma = 0 drops the penalty exactly
  BatchLossReport rep0 = batch_loss(fp, batch, 0.0, 0.1);
  REQUIRE_THAT(rep0.loss, WithinRel(0.1, 1e-12));
}

TEST_CASE("perfect fit with matched bias mean has zero loss", "[gradients]") {
  BiasNetworkParams net = zero_net(2, 2);
  net.b3 = 0.2;
  MechanismParams mech;
  mech.b = 1.0;
  mech.c = 1.0;
  mech.p = {0.1};
  mech.q = {0.05};
  FlatParams fp = pack(mech, net);

  CaseRecord c = plain_case(10.0, 1, 1, 2, 0.0);
  c.z = 12.0;  // core = 10 * 1.2 = 12, interior
  BatchLossReport rep = batch_loss(fp, {c}, 1.4, 0.2);
  REQUIRE(rep.loss == 0.0);
  REQUIRE(rep.relerr_term == 0.0);
  REQUIRE(rep.reg_term == 0.0);
}

TEST_CASE("batch loss averages cases in fixed order", "[gradients]") {
  Rng rng(seed_for(405, "avg", 0));
  MechanismParams mech = random_mech(rng, 2, 2);
  BiasNetworkParams net = random_net(rng, 3, 2);
  FlatParams fp = pack(mech, net);

  std::vector<CaseRecord> batch;
  for (int i = 0; i < 7; ++i) batch.push_back(random_case(rng, 2, 2, 2));

  BatchLossReport whole = batch_loss(fp, batch, 0.0, 0.0);
  double acc = 0.0;
  for (const CaseRecord& c : batch) acc += batch_loss(fp, {c}, 0.0, 0.0).loss;
  REQUIRE_THAT(whole.loss, WithinRel(acc / 7.0, 1e-14));

  // the relative-error term does not depend on case order (mean of per-case
  // terms); permutations agree to roundoff
  std::vector<CaseRecord> rev(batch.rbegin(), batch.rend());
  BatchLossReport flipped = batch_loss(fp, rev, 1.4, 0.05);
  BatchLossReport straight = batch_loss(fp, batch, 1.4, 0.05);
  REQUIRE_THAT(flipped.loss, WithinRel(straight.loss, 1e-12));
}

TEST_CASE("batch loss rejects empty or nonpositive-z batches", "[gradients]") {
  MechanismParams mech;
  mech.p = {0.0};
  mech.q = {0.0};
  FlatParams fp = pack(mech, zero_net(2, 1));
  REQUIRE_THROWS_AS(batch_loss(fp, {}, 0.0, 0.0), DataError);

  CaseRecord c = plain_case(10.0, 1, 1, 1, 0.0);
  REQUIRE_THROWS_AS(batch_loss(fp, {c}, 0.0, 0.0), DataError);
  c.z = -2.0;
  REQUIRE_THROWS_AS(batch_loss(fp, {c}, 0.0, 0.0), DataError);
}

TEST_CASE("saturated cases contribute zero gradient", "[gradients]") {
  // core = 100 > N for every case, saturation derivative is 0 outside
  // [L, N], and with gamma = 0 nothing else feeds the gradient
  MechanismParams mech;
  mech.b = 2.0;
  mech.c = 1.0;
  mech.p = {0.1, -0.05};
  mech.q = {0.02, 0.01};
  Rng rng(seed_for(406, "sat", 0));
  BiasNetworkParams net = random_net(rng, 3, 2);
  net.b3 = 0.0;
  FlatParams fp = pack(mech, net);

  std::vector<CaseRecord> batch;
  for (int i = 0; i < 5; ++i) {
    CaseRecord c = random_case(rng, 2, 2, 2);
    c.a = 500.0;  // drives core far above N = 36
    c.z = 30.0;   // off the cap, so the loss itself stays positive
    batch.push_back(c);
  }
  auto [grad, rep] = batch_loss_and_grad(fp, batch, 0.0, 0.0);
  for (const CaseRecord& c : batch) {
    detail::CaseForward f;
    detail::forward_case(fp, c, f);
    REQUIRE(f.core > c.bounds.upper);
    REQUIRE(f.zhat == 36.0);
  }
  for (double g : grad.x) REQUIRE(g == 0.0);
  REQUIRE(rep.relerr_term > 0.0);
}

TEST_CASE("regularizer gradient lives on network coordinates only", "[gradients]") {
  Rng rng(seed_for(407, "regslice", 0));
  MechanismParams mech = random_mech(rng, 2, 3);
  BiasNetworkParams net = random_net(rng, 4, 2);
  FlatParams fp = pack(mech, net);

  std::vector<CaseRecord> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_case(rng, 2, 3, 2));

  FlatParams g0 = batch_grad(fp, batch, 0.0, 0.3);
  FlatParams g1 = batch_grad(fp, batch, 1.4, 0.3);
  const FlatLayout& lay = fp.layout;
  for (std::size_t i = 0; i < lay.off_gamma(); ++i)
    REQUIRE(g1.x[i] == g0.x[i]);
  bool net_moved = false;
  for (std::size_t i = lay.off_gamma(); i < lay.total(); ++i)
    if (g1.x[i] != g0.x[i]) net_moved = true;
  REQUIRE(net_moved);
}

TEST_CASE("analytic gradient matches finite differences away from kinks",
          "[gradients]") {
  Rng rng(seed_for(408, "fd", 0));
  const double h = 1e-5;
  int checked = 0;
  int attempts = 0;
  while (checked < 12 && attempts < 400) {
    ++attempts;
    MechanismParams mech = random_mech(rng, 2, 2);
    BiasNetworkParams net = random_net(rng, 3, 2);
    FlatParams fp = pack(mech, net);
    std::vector<CaseRecord> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(random_case(rng, 2, 2, 2));
    const double gamma = (checked % 2 == 0) ? 0.0 : 1.4;
    const double ebar = 0.07;

    // keep clear of the saturation kinks, the |z - zhat| = 0 kink, the
    // |mean_ehat - ebar| = 0 kink, and ReLU corners so FD is trustworthy
    bool interior = true;
    double mean_ehat = 0.0;
    for (const CaseRecord& c : batch) {
      detail::CaseForward f;
      detail::forward_case(fp, c, f);
      if (std::abs(f.core - c.bounds.lower) < 1e-2 ||
          std::abs(f.core - c.bounds.upper) < 1e-2)
        interior = false;
      if (std::abs(*c.z - f.zhat) < 1e-3) interior = false;
      for (double z1 : f.z1)
        if (std::abs(z1) < 1e-3) interior = false;
      for (double z2 : f.z2)
        if (std::abs(z2) < 1e-3) interior = false;
      mean_ehat += f.ehat;
    }
    mean_ehat /= static_cast<double>(batch.size());
    if (std::abs(mean_ehat - ebar) < 1e-3) interior = false;
    if (!interior) continue;

    FlatParams grad = batch_grad(fp, batch, gamma, ebar);
    for (std::size_t i = 0; i < fp.layout.total(); ++i) {
      FlatParams up = fp, dn = fp;
      up.x[i] += h;
      dn.x[i] -= h;
      const double fd = (batch_loss(up, batch, gamma, ebar).loss -
                         batch_loss(dn, batch, gamma, ebar).loss) /
                        (2.0 * h);
      if (std::abs(fd) > 1e-6) {
        REQUIRE_THAT(grad.x[i], WithinRel(fd, 5e-5));
      } else {
        REQUIRE_THAT(grad.x[i], WithinAbs(fd, 1e-6));
      }
    }
    ++checked;
  }
  REQUIRE(checked == 12);
}

TEST_CASE("gradient and loss report agree between entry points", "[gradients]") {
  Rng rng(seed_for(409, "agree", 0));
  MechanismParams mech = random_mech(rng, 2, 2);
  BiasNetworkParams net = random_net(rng, 3, 2);
  FlatParams fp = pack(mech, net);
  std::vector<CaseRecord> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(random_case(rng, 2, 2, 2));

  auto [grad, rep] = batch_loss_and_grad(fp, batch, 1.4, 0.1);
  BatchLossReport rep2 = batch_loss(fp, batch, 1.4, 0.1);
  REQUIRE(rep.loss == rep2.loss);
  REQUIRE(rep.relerr_term == rep2.relerr_term);
  REQUIRE(rep.reg_term == rep2.reg_term);
  FlatParams grad2 = batch_grad(fp, batch, 1.4, 0.1);
  REQUIRE(grad.x == grad2.x);
}
