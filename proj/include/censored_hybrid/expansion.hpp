#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "censored_hybrid/common.hpp"
#include "censored_hybrid/model.hpp"

namespace censored_hybrid {

inline std::size_t expansion_dim(std::size_t m1, std::size_t m2) {
  return (std::size_t{1} << m1) * (3 + 3 * m2);
}

// Subset ordering for the product features: position 0 is the empty set,
// positions 1..m1 the singletons in factor order, then pairs, triples, ...
// each size level in lexicographic order of the index tuples. This order is
// load-bearing: parameter recovery reads singletons at positions 1..m1.
inline std::vector<std::uint32_t> subset_masks(std::size_t m1) {
  if (m1 > 20) throw ConfigError("m1 too large for dense expansion");
  std::vector<std::uint32_t> masks;
  masks.reserve(std::size_t{1} << m1);
  masks.push_back(0);
  std::vector<std::uint32_t> level;
  for (std::size_t size = 1; size <= m1; ++size) {
    level.clear();
    for (std::uint32_t m = 1; m < (1u << m1); ++m)
      if (static_cast<std::size_t>(std::popcount(m)) == size) level.push_back(m);
    // lexicographic on the tuple of set bit positions; for equal popcount
    // that is exactly "smaller lowest bits first", i.e. comparing the
    // bit-reversed masks. Simple pairwise comparison keeps it obvious.
    std::sort(level.begin(), level.end(), [](std::uint32_t a, std::uint32_t b) {
      while (a && b) {
        std::uint32_t la = a & (~a + 1), lb = b & (~b + 1);
        if (la != lb) return la < lb;
        a ^= la;
        b ^= lb;
      }
      return a < b;
    });
    masks.insert(masks.end(), level.begin(), level.end());
  }
  return masks;
}

// Precomputed ordering plus block offsets for the six blocks of the
// expansion. All slot accessors are 0-based.
struct IndexMap {
  std::size_t m1 = 0, m2 = 0;
  std::vector<std::uint32_t> masks;        // size-then-lex subset order
  std::vector<std::uint32_t> pos_of_mask;  // inverse permutation

  IndexMap() = default;
  IndexMap(std::size_t m1_, std::size_t m2_)
      : m1(m1_), m2(m2_), masks(subset_masks(m1_)) {
    pos_of_mask.resize(masks.size());
    for (std::uint32_t i = 0; i < masks.size(); ++i) pos_of_mask[masks[i]] = i;
  }

  std::size_t half() const { return masks.size(); }                // 2^m1
  std::size_t block() const { return half() * (1 + m2); }          // psi length
  std::size_t dim() const { return 3 * block(); }
  std::size_t slot_one() const { return 0; }                       // the (1+e) slot
  std::size_t slot_p(std::size_t i) const { return i + 1; }        // i in [0, m1)
  std::size_t slot_q(std::size_t j) const { return half() * (j + 1); }  // j in [0, m2)
  std::size_t slot_b() const { return half() * (1 + m2); }
  std::size_t slot_c() const { return half() * (2 + 2 * m2); }

  // Products over all subsets of vals, written in subset order. Each mask
  // extends an earlier (one-bit-smaller) mask, so the whole table is one
  // multiply per entry.
  void subset_products(const std::vector<double>& vals, double* out) const {
    out[0] = 1.0;
    for (std::size_t i = 1; i < masks.size(); ++i) {
      std::uint32_t m = masks[i];
      std::uint32_t low = m & (~m + 1);
      unsigned bit = static_cast<unsigned>(std::countr_zero(low));
      out[i] = out[pos_of_mask[m ^ low]] * vals[bit];
    }
  }
};

struct ExpandedRegressor {
  std::size_t m1 = 0, m2 = 0;
  std::vector<double> values;
};

struct ExpandedParameter {
  std::size_t m1 = 0, m2 = 0;
  std::vector<double> values;
};

struct RecoveredParams {
  double b0 = 0.0, c0 = 0.0, ebar = 0.0;
  std::vector<double> p0, q0;
};

inline std::vector<double> subset_products(const std::vector<double>& vals) {
  IndexMap map(vals.size(), 0);
  std::vector<double> out(map.half());
  map.subset_products(vals, out.data());
  return out;
}

inline std::vector<double> kron(const std::vector<double>& a,
                                const std::vector<double>& b) {
  std::vector<double> out(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = a[i] * b[j];
  return out;
}

// phi = [a*psi, x1*psi, x2*psi] with psi = [phi1, u1*phi1, ..., u_{m2}*phi1]
// and phi1 the subset products of v.
inline void build_phi_into(const CaseRecord& c, const IndexMap& map,
                           double* out) {
  if (c.v.size() != map.m1 || c.u.size() != map.m2)
    throw DataError("build_phi: case factor lengths do not match m1/m2");
  const std::size_t half = map.half(), block = map.block();
  map.subset_products(c.v, out);  // phi1 in the first half slots
  for (std::size_t j = 0; j < map.m2; ++j) {
    double uj = c.u[j];
    for (std::size_t t = 0; t < half; ++t)
      out[(j + 1) * half + t] = uj * out[t];
  }
  const double scale[3] = {c.a, static_cast<double>(c.x1),
                           static_cast<double>(c.x2)};
  for (std::size_t blk = 1; blk < 3; ++blk)
    for (std::size_t t = 0; t < block; ++t)
      out[blk * block + t] = scale[blk] * out[t];
  for (std::size_t t = 0; t < block; ++t) out[t] *= scale[0];
}

inline ExpandedRegressor build_phi(const CaseRecord& c, std::size_t m1,
                                   std::size_t m2) {
  IndexMap map(m1, m2);
  ExpandedRegressor phi{m1, m2, std::vector<double>(map.dim())};
  build_phi_into(c, map, phi.values.data());
  return phi;
}

// theta = [(1+e) th1, q (x) th1, b(1+e) th1, b(q (x) th1), c(1+e) th1,
//          c(q (x) th1)] with th1 the subset products of p.
inline ExpandedParameter build_theta(const MechanismParams& mech,
                                     const IndexMap& map) {
  if (mech.p.size() != map.m1 || mech.q.size() != map.m2)
    throw DataError("build_theta: parameter lengths do not match m1/m2");
  const std::size_t half = map.half(), block = map.block();
  ExpandedParameter theta{map.m1, map.m2, std::vector<double>(map.dim())};
  double* out = theta.values.data();
  map.subset_products(mech.p, out);
  const double one_e = 1.0 + mech.e;
  for (std::size_t j = 0; j < map.m2; ++j)
    for (std::size_t t = 0; t < half; ++t)
      out[(j + 1) * half + t] = mech.q[j] * out[t];
  for (std::size_t t = 0; t < half; ++t) out[t] *= one_e;
  for (std::size_t t = 0; t < block; ++t) {
    out[block + t] = mech.b * out[t];
    out[2 * block + t] = mech.c * out[t];
  }
  return theta;
}

inline ExpandedParameter build_theta(const MechanismParams& mech) {
  return build_theta(mech, IndexMap(mech.p.size(), mech.q.size()));
}

inline constexpr double kTolDiv = 1e-6;  // theta(1) degeneracy guard

// Reads the mechanism coefficients back off the expanded parameter:
// b0 and c0 from the leading entries of blocks 3 and 5 divided by theta(1),
// ebar = theta(1) - 1, p from the singleton slots (normalized), q from the
// Kronecker sub-block leading entries (unnormalized, as defined).
inline RecoveredParams recover_params(const ExpandedParameter& theta) {
  IndexMap map(theta.m1, theta.m2);
  if (theta.values.size() != map.dim())
    throw DataError("recover_params: theta length mismatch");
  const double t1 = theta.values[map.slot_one()];
  if (std::abs(t1) < kTolDiv)
    throw DegenerateLeadingEntry("recover_params: |theta(1)| < 1e-6, stage-1 estimate degenerate");
  RecoveredParams rec;
  rec.b0 = theta.values[map.slot_b()] / t1;
  rec.c0 = theta.values[map.slot_c()] / t1;
  rec.ebar = t1 - 1.0;
  rec.p0.resize(theta.m1);
  for (std::size_t i = 0; i < theta.m1; ++i)
    rec.p0[i] = theta.values[map.slot_p(i)] / t1;
  rec.q0.resize(theta.m2);
  for (std::size_t j = 0; j < theta.m2; ++j)
    rec.q0[j] = theta.values[map.slot_q(j)];
  return rec;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace censored_hybrid
