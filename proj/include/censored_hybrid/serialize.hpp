#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "censored_hybrid/common.hpp"
#include "censored_hybrid/datagen.hpp"
#include "censored_hybrid/eval.hpp"
#include "censored_hybrid/gradients.hpp"
#include "censored_hybrid/model.hpp"
#include "censored_hybrid/snn.hpp"
#include "censored_hybrid/trainer.hpp"

namespace censored_hybrid {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---- JSON round trips -------------------------------------------------

inline json to_json(const MechanismParams& m) {
  return json{{"b", m.b}, {"c", m.c}, {"p", m.p}, {"q", m.q}, {"e", m.e}};
}

inline MechanismParams mech_from_json(const json& j) {
  MechanismParams m;
  m.b = j.at("b").get<double>();
  m.c = j.at("c").get<double>();
  m.p = j.at("p").get<std::vector<double>>();
  m.q = j.at("q").get<std::vector<double>>();
  m.e = j.at("e").get<double>();
  return m;
}

inline json to_json(const BiasNetworkParams& n) {
  return json{{"m", n.m},   {"m3", n.m3}, {"Gamma", n.Gamma}, {"B", n.B},
              {"A", n.A},   {"b1", n.b1}, {"b2", n.b2},       {"b3", n.b3}};
}

inline BiasNetworkParams net_from_json(const json& j) {
  BiasNetworkParams n;
  n.m = j.at("m").get<std::size_t>();
  n.m3 = j.at("m3").get<std::size_t>();
  n.Gamma = j.at("Gamma").get<std::vector<double>>();
  n.B = j.at("B").get<std::vector<double>>();
  n.A = j.at("A").get<std::vector<double>>();
  n.b1 = j.at("b1").get<std::vector<double>>();
  n.b2 = j.at("b2").get<std::vector<double>>();
  n.b3 = j.at("b3").get<double>();
  n.validate();
  return n;
}

inline json to_json(const GeneratorConfig& c) {
  json j{{"m1", c.m1},
         {"m2", c.m2},
         {"m3", c.m3},
         {"n", c.n},
         {"regime", regime_name(c.regime)},
         {"sigma", c.sigma},
         {"truth", json{{"mech", to_json(c.truth.mech)}}},
         {"v_activation", c.v_activation},
         {"u_activation", c.u_activation},
         {"u_signed", c.u_signed},
         {"a", c.a},
         {"x1_max", c.x1_max},
         {"x2_max", c.x2_max},
         {"growth_epsilon", c.growth_epsilon},
         {"seed", c.seed}};
  if (c.truth.net) j["truth"]["net"] = to_json(*c.truth.net);
  return j;
}

inline Regime regime_from_name(const std::string& s) {
  if (s == "minor") return Regime::minor;
  if (s == "serious") return Regime::serious;
  throw ConfigError("unknown regime '" + s + "' (expected minor|serious)");
}

inline GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig c;
  try {
    c.m1 = j.at("m1").get<std::size_t>();
    c.m2 = j.at("m2").get<std::size_t>();
    c.m3 = j.value("m3", std::size_t{3});
    c.n = j.at("n").get<std::size_t>();
    c.regime = regime_from_name(j.value("regime", std::string("minor")));
    c.sigma = j.value("sigma", 5.0);
    c.truth.mech = mech_from_json(j.at("truth").at("mech"));
    if (j.at("truth").contains("net")) c.truth.net = net_from_json(j["truth"]["net"]);
    c.v_activation = j.value("v_activation", 0.15);
    c.u_activation = j.value("u_activation", 0.15);
    c.u_signed = j.value("u_signed", true);
    c.a = j.value("a", -1.0);
    c.x1_max = j.value("x1_max", 3);
    c.x2_max = j.value("x2_max", 2);
    c.growth_epsilon = j.value("growth_epsilon", 0.0);
    c.seed = j.value("seed", std::uint64_t{1});
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("generator config: ") + ex.what());
  }
  c.validate();
  return c;
}

inline json to_json(const ASGConfig& a) {
  return json{{"mu", a.mu},
              {"alpha", a.alpha},
              {"M", a.M},
              {"L_norm", a.L_norm},
              {"gbar_mode", a.gbar_mode == GbarMode::constant_one ? "constant_one" : "analytic_sup"},
              {"epsilon_growth", a.epsilon_growth}};
}

inline ASGConfig asg_config_from_json(const json& j) {
  ASGConfig a;
  try {
    a.mu = j.value("mu", 1.0);
    a.alpha = j.value("alpha", 1.02);
    a.M = j.value("M", 0.0);
    a.L_norm = j.value("L_norm", 1.0);
    std::string mode = j.value("gbar_mode", std::string("constant_one"));
    if (mode == "constant_one")
      a.gbar_mode = GbarMode::constant_one;
    else if (mode == "analytic_sup")
      a.gbar_mode = GbarMode::analytic_sup;
    else
      throw ConfigError("unknown gbar_mode '" + mode + "'");
    a.epsilon_growth = j.value("epsilon_growth", 0.0);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("asg config: ") + ex.what());
  }
  return a;
}

inline json to_json(const TrainConfig& t) {
  return json{{"eta1", t.eta1},         {"eps", t.eps},
              {"beta1", t.beta1},       {"beta2", t.beta2},
              {"T", t.T},               {"n_epochs", t.n_epochs},
              {"gamma", t.gamma},       {"restarts", t.restarts},
              {"seed", t.seed},         {"regime", regime_name(t.regime)},
              {"net_width", t.net_width}, {"asg", to_json(t.asg)}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig t;
  try {
    t.eta1 = j.value("eta1", 1e-3);
    t.eps = j.value("eps", 1e-8);
    t.beta1 = j.value("beta1", 0.9);
    t.beta2 = j.value("beta2", 0.999);
    t.T = j.value("T", std::size_t{245});
    t.n_epochs = j.value("n_epochs", std::size_t{30});
    t.gamma = j.value("gamma", -1.0);
    t.restarts = j.value("restarts", std::size_t{10});
    t.seed = j.value("seed", std::uint64_t{1});
    t.regime = regime_from_name(j.value("regime", std::string("minor")));
    t.net_width = j.value("net_width", std::size_t{128});
    if (j.contains("asg")) t.asg = asg_config_from_json(j["asg"]);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("train config: ") + ex.what());
  }
  t.validate();
  return t;
}

// ---- Dataset ----------------------------------------------------------

inline json to_json(const Dataset& ds) {
  json cases = json::array();
  for (const CaseRecord& c : ds.cases) {
    cases.push_back(json{{"index", c.index},
                         {"a", c.a},
                         {"x1", c.x1},
                         {"x2", c.x2},
                         {"v", c.v},
                         {"u", c.u},
                         {"eta", c.eta},
                         {"L", c.bounds.lower},
                         {"N", c.bounds.upper},
                         {"z", c.z ? json(*c.z) : json(nullptr)}});
  }
  return json{{"schema_version", kSchemaVersion},
              {"kind", "dataset"},
              {"config", to_json(ds.config)},
              {"config_fingerprint", hex64(ds.config_fingerprint)},
              {"cases", std::move(cases)}};
}

inline Dataset dataset_from_json(const json& j) {
  if (j.value("kind", std::string()) != "dataset")
    throw DataError("dataset file: wrong kind field");
  Dataset ds;
  ds.config = generator_config_from_json(j.at("config"));
  ds.config_fingerprint = ds.config.fingerprint();
  if (hex64(ds.config_fingerprint) != j.value("config_fingerprint", std::string()))
    throw DataError("dataset file: config fingerprint mismatch (file edited or version skew)");
  for (const json& cj : j.at("cases")) {
    CaseRecord c;
    c.index = cj.at("index").get<std::size_t>();
    c.a = cj.at("a").get<double>();
    c.x1 = cj.at("x1").get<int>();
    c.x2 = cj.at("x2").get<int>();
    c.v = cj.at("v").get<std::vector<double>>();
    c.u = cj.at("u").get<std::vector<double>>();
    c.eta = cj.at("eta").get<std::vector<double>>();
    c.bounds = {cj.at("L").get<double>(), cj.at("N").get<double>()};
    if (!cj.at("z").is_null()) c.z = cj.at("z").get<double>();
    ds.cases.push_back(std::move(c));
  }
  return ds;
}

// ---- Models -----------------------------------------------------------

inline json to_json(const TslResult& r, std::uint64_t config_fp,
                    const std::string& method) {
  json j{{"schema_version", kSchemaVersion},
         {"kind", "model"},
         {"method", method},
         {"config_fingerprint", hex64(config_fp)},
         {"m1", r.model.m1},
         {"m2", r.model.m2},
         {"m3", r.model.m3},
         {"m", r.model.m},
         {"mech", to_json(r.model.mech)},
         {"ebar", r.ebar},
         {"selected_restart", r.selected}};
  if (r.model.net) j["net"] = to_json(*r.model.net);
  if (method == "tsl") {
    j["stage1"] = json{{"b0", r.stage1.recovered.b0},
                       {"c0", r.stage1.recovered.c0},
                       {"ebar", r.stage1.recovered.ebar},
                       {"p0", r.stage1.recovered.p0},
                       {"q0", r.stage1.recovered.q0}};
  }
  return j;
}

inline json to_json(const SmAsgModel& m, std::uint64_t config_fp) {
  return json{{"schema_version", kSchemaVersion},
              {"kind", "model"},
              {"method", "sm-asg"},
              {"config_fingerprint", hex64(config_fp)},
              {"mech", to_json(m.mech)},
              {"stage1", json{{"b0", m.stage1.recovered.b0},
                              {"c0", m.stage1.recovered.c0},
                              {"ebar", m.stage1.recovered.ebar},
                              {"p0", m.stage1.recovered.p0},
                              {"q0", m.stage1.recovered.q0}}}};
}

inline json to_json(const SnnTrainResult& r, std::uint64_t config_fp) {
  return json{{"schema_version", kSchemaVersion},
              {"kind", "model"},
              {"method", "snn-adam"},
              {"config_fingerprint", hex64(config_fp)},
              {"d", r.model.params.layout.d},
              {"width", r.model.params.layout.width},
              {"standardizer_mean", r.model.standardizer.mean},
              {"standardizer_std", r.model.standardizer.std},
              {"weights", r.model.params.x},
              {"selected_restart", r.selected}};
}

// A loaded model of any method, usable as a predictor.
struct LoadedModel {
  std::string method;
  std::uint64_t config_fingerprint = 0;
  std::optional<HybridModel> hybrid;   // tsl / smnn-adam
  std::optional<MechanismParams> sm;   // sm-asg
  std::optional<SnnModel> snn;         // snn-adam
};

inline LoadedModel model_from_json(const json& j) {
  if (j.value("kind", std::string()) != "model")
    throw DataError("model file: wrong kind field");
  LoadedModel m;
  m.method = j.at("method").get<std::string>();
  std::string fp = j.at("config_fingerprint").get<std::string>();
  m.config_fingerprint = std::stoull(fp, nullptr, 16);
  if (m.method == "tsl" || m.method == "smnn-adam") {
    HybridModel h;
    h.mech = mech_from_json(j.at("mech"));
    h.net = net_from_json(j.at("net"));
    h.m1 = j.at("m1").get<std::size_t>();
    h.m2 = j.at("m2").get<std::size_t>();
    h.m3 = j.at("m3").get<std::size_t>();
    h.m = j.at("m").get<std::size_t>();
    m.hybrid = std::move(h);
  } else if (m.method == "sm-asg") {
    m.sm = mech_from_json(j.at("mech"));
  } else if (m.method == "snn-adam") {
    SnnModel s;
    s.standardizer.mean = j.at("standardizer_mean").get<std::vector<double>>();
    s.standardizer.std = j.at("standardizer_std").get<std::vector<double>>();
    s.params.layout = SnnLayout{j.at("d").get<std::size_t>(),
                                j.at("width").get<std::size_t>()};
    s.params.x = j.at("weights").get<std::vector<double>>();
    if (s.params.x.size() != s.params.layout.total())
      throw DataError("model file: snn weight vector length mismatch");
    m.snn = std::move(s);
  } else {
    throw DataError("model file: unknown method '" + m.method + "'");
  }
  return m;
}

inline Predictor predictor_from(const LoadedModel& m) {
  if (m.hybrid) {
    HybridModel h = *m.hybrid;
    return [h](const CaseRecord& c) { return hybrid_predict(h, c); };
  }
  if (m.sm) {
    MechanismParams mech = *m.sm;
    return [mech](const CaseRecord& c) {
      return saturate(mechanism_core(mech, c, mech.e), c.bounds);
    };
  }
  SnnModel s = *m.snn;
  return [s](const CaseRecord& c) { return snn_predict(s.params, s.standardizer, c); };
}

// ---- Files, fingerprints, manifests ------------------------------------

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json load_json_file(const std::filesystem::path& path) {
  std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    // ex.what() carries the byte position of the first offending token
    throw ConfigError(path.string() + ": " + ex.what());
  }
}

inline std::uint64_t file_fingerprint(const std::filesystem::path& path) {
  Fnv1a h;
  std::string content = read_text_file(path);
  h.str(content);
  return h.value();
}

// Every run writes a manifest echoing the resolved config, the seed, and a
// content hash of each artifact; reruns with the same config and seed must
// reproduce these hashes bit for bit.
struct Manifest {
  std::string command;
  json resolved_config;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::uint64_t>> artifacts;  // name, hash
};

inline json to_json(const Manifest& m) {
  json arts = json::object();
  for (const auto& [name, hash] : m.artifacts) arts[name] = hex64(hash);
  return json{{"schema_version", kSchemaVersion},
              {"kind", "manifest"},
              {"command", m.command},
              {"resolved_config", m.resolved_config},
              {"seed", m.seed},
              {"artifact_hashes", std::move(arts)}};
}

// ---- CSV --------------------------------------------------------------

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

inline std::string dataset_csv(const Dataset& ds) {
  std::ostringstream out;
  out << "# config_fingerprint=" << hex64(ds.config_fingerprint) << "\n";
  out << "index,a,x1,x2";
  for (std::size_t i = 0; i < ds.config.m1; ++i) out << ",v" << i + 1;
  for (std::size_t j = 0; j < ds.config.m2; ++j) out << ",u" << j + 1;
  for (std::size_t j = 0; j < ds.config.m3; ++j) out << ",eta" << j + 1;
  out << ",L,N,z\n";
  for (const CaseRecord& c : ds.cases) {
    out << c.index << ',' << format_double(c.a) << ',' << c.x1 << ',' << c.x2;
    for (double x : c.v) out << ',' << format_double(x);
    for (double x : c.u) out << ',' << format_double(x);
    for (double x : c.eta) out << ',' << format_double(x);
    out << ',' << format_double(c.bounds.lower) << ',' << format_double(c.bounds.upper);
    out << ',' << (c.z ? format_double(*c.z) : "") << '\n';
  }
  return out.str();
}

inline std::string regret_csv(const RegretTracker& tracker) {
  std::ostringstream out;
  out << "k,R,cum,cum_normalized\n";
  for (const RegretPoint& pt : tracker.log)
    out << pt.k << ',' << format_double(pt.R) << ',' << format_double(pt.cumulative)
        << ',' << format_double(pt.cum_normalized) << '\n';
  return out.str();
}

inline std::string restarts_csv(const std::vector<RestartMetric>& rows) {
  std::ostringstream out;
  out << "restart,train_rad,train_loss,selected\n";
  for (const RestartMetric& r : rows)
    out << r.restart << ',' << format_double(r.train_rad) << ','
        << format_double(r.train_loss) << ',' << (r.selected ? 1 : 0) << '\n';
  return out.str();
}

inline std::string compare_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "method,rad,n2\n";
  for (const ComparisonRow& r : rows)
    out << csv_escape(r.method) << ',' << format_double(r.rad) << ',' << r.n2 << '\n';
  return out.str();
}

inline std::string eval_csv(const EvalReport& rep) {
  std::ostringstream out;
  out << "z,zhat,ztilde,triggered\n";
  for (const EvalCase& c : rep.ledger)
    out << format_double(c.z) << ',' << format_double(c.zhat) << ','
        << format_double(c.ztilde) << ',' << (c.triggered ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace censored_hybrid
