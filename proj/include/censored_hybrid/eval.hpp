#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "censored_hybrid/common.hpp"
#include "censored_hybrid/datagen.hpp"
#include "censored_hybrid/model.hpp"

namespace censored_hybrid {

using Predictor = std::function<double(const CaseRecord&)>;

struct EvalCase {
  double z = 0.0, zhat = 0.0, ztilde = 0.0;
  bool triggered = false;
};

struct EvalReport {
  double rad = 0.0;
  std::size_t n2 = 0;
  std::vector<EvalCase> ledger;
  std::string method;
};

// RAD = 1 - (1/n2) sum (ztilde/z) I(ztilde > max{0.2 z, 2}), ztilde = |z - zhat|.
// The indicator is strict: an error exactly at the discretion threshold does
// not penalize.
inline EvalReport rad(const std::vector<double>& preds,
                      const std::vector<double>& actuals) {
  if (preds.size() != actuals.size()) throw DataError("rad: length mismatch");
  if (preds.empty()) throw DataError("rad: empty inputs");
  EvalReport rep;
  rep.n2 = preds.size();
  rep.ledger.resize(preds.size());
  double penalty = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const double z = actuals[k];
    if (!(z > 0.0)) throw DataError("rad: nonpositive actual sentence");
    const double ztilde = std::abs(z - preds[k]);
    const bool trig = ztilde > std::max(0.2 * z, 2.0);
    rep.ledger[k] = {z, preds[k], ztilde, trig};
    if (trig) penalty += ztilde / z;
  }
  rep.rad = 1.0 - penalty / static_cast<double>(preds.size());
  return rep;
}

inline EvalReport evaluate(const Predictor& predict, const Dataset& test,
                           std::string method, unsigned max_threads = 0) {
  std::vector<double> preds(test.cases.size()), actuals(test.cases.size());
  for (std::size_t k = 0; k < test.cases.size(); ++k) {
    if (!test.cases[k].z) throw DataError("evaluate: case without observed z");
    actuals[k] = *test.cases[k].z;
  }
  // per-case slots, fixed partition: thread count cannot change results
  parallel_for(
      test.cases.size(),
      [&](std::size_t k) { preds[k] = predict(test.cases[k]); },
      max_threads);
  EvalReport rep = rad(preds, actuals);
  rep.method = std::move(method);
  return rep;
}

struct ComparisonRow {
  std::string method;
  double rad = 0.0;
  std::size_t n2 = 0;
};

// One row per already-trained method on the identical test split.
inline std::vector<ComparisonRow> compare(
    const std::vector<std::pair<std::string, Predictor>>& methods,
    const Dataset& test) {
  std::vector<ComparisonRow> rows;
  rows.reserve(methods.size());
  for (const auto& [name, pred] : methods) {
    EvalReport rep = evaluate(pred, test, name);
    rows.push_back({name, rep.rad, rep.n2});
  }
  return rows;
}

}  // namespace censored_hybrid
