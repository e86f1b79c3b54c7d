// Command-line front end: dataset generation, training, evaluation, regret
// diagnostics, and method comparison, all driven by a single JSON run config.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "censored_hybrid/serialize.hpp"
#include "censored_hybrid/svg.hpp"

namespace ch = censored_hybrid;
namespace fs = std::filesystem;
using ch::json;

namespace {

struct RunConfig {
  ch::GeneratorConfig generator;
  ch::TrainConfig train;
  std::string method = "tsl";
  std::size_t split_train = 4;
  std::size_t split_test = 1;
};

const std::vector<std::string> kMethods = {"tsl", "sm-asg", "snn-adam",
                                           "smnn-adam"};

RunConfig load_run_config(const std::string& path, std::uint64_t seed_override) {
  json j;
  try {
    j = ch::load_json_file(path);
  } catch (const ch::DataError& ex) {
    // an unreadable config is a configuration problem, not bad data
    throw ch::ConfigError(ex.what());
  }
  RunConfig rc;
  if (!j.contains("generator"))
    throw ch::ConfigError(path + ": missing 'generator' block");
  rc.generator = ch::generator_config_from_json(j["generator"]);
  if (j.contains("train")) rc.train = ch::train_config_from_json(j["train"]);
  rc.method = j.value("method", std::string("tsl"));
  if (j.contains("split")) {
    rc.split_train = j["split"].value("train", std::size_t{4});
    rc.split_test = j["split"].value("test", std::size_t{1});
  }
  if (seed_override != 0) {
    rc.generator.seed = seed_override;
    rc.train.seed = seed_override;
  }
  rc.train.regime = rc.generator.regime;
  return rc;
}

// Echo with every default resolved, so the manifest alone reproduces the run.
json resolved_json(const RunConfig& rc) {
  ch::GeneratorConfig g = rc.generator;
  g.a = g.resolved_a();
  ch::TrainConfig t = rc.train;
  t.gamma = t.resolved_gamma();
  t.asg.M = ch::resolved_M(t.asg, rc.generator);
  json j{{"generator", ch::to_json(g)},
         {"train", ch::to_json(t)},
         {"method", rc.method},
         {"split", json{{"train", rc.split_train}, {"test", rc.split_test}}}};
  return j;
}

void write_artifact(ch::Manifest& man, const fs::path& dir,
                    const std::string& name, const std::string& content) {
  fs::path p = dir / name;
  ch::write_text_file(p, content);
  man.artifacts.emplace_back(name, ch::file_fingerprint(p));
}

void finish_manifest(const ch::Manifest& man, const fs::path& dir) {
  ch::write_text_file(dir / "manifest.json", ch::to_json(man).dump(2) + "\n");
  std::printf("wrote %s\n", (dir / "manifest.json").string().c_str());
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ch::DataError("cannot create output directory " + out);
  return dir;
}

std::pair<ch::Dataset, ch::Dataset> split_for(const ch::Dataset& ds,
                                              const RunConfig& rc) {
  if (rc.split_test == 0) return {ds, ds};  // train and score on everything
  return ch::split(ds, rc.split_train, rc.split_test);
}

void check_dims(const ch::LoadedModel& m, const ch::Dataset& ds) {
  const std::size_t m1 = ds.config.m1, m2 = ds.config.m2, m3 = ds.config.m3;
  if (m.hybrid) {
    if (m.hybrid->m1 != m1 || m.hybrid->m2 != m2 || m.hybrid->m3 != m3)
      throw ch::DataError("model/dataset dimension mismatch: model (m1,m2,m3)=(" +
                          std::to_string(m.hybrid->m1) + "," +
                          std::to_string(m.hybrid->m2) + "," +
                          std::to_string(m.hybrid->m3) + ") dataset (" +
                          std::to_string(m1) + "," + std::to_string(m2) + "," +
                          std::to_string(m3) + ")");
  } else if (m.sm) {
    if (m.sm->p.size() != m1 || m.sm->q.size() != m2)
      throw ch::DataError("model/dataset dimension mismatch: mechanism has " +
                          std::to_string(m.sm->p.size()) + " v-factors and " +
                          std::to_string(m.sm->q.size()) + " u-factors");
  } else if (m.snn) {
    const std::size_t d = 3 + m1 + m2 + m3;
    if (m.snn->params.layout.d != d)
      throw ch::DataError("model/dataset dimension mismatch: network expects " +
                          std::to_string(m.snn->params.layout.d) +
                          " inputs, dataset provides " + std::to_string(d));
  }
}

int cmd_gen(const std::string& config_path, const std::string& out,
            std::uint64_t seed_override) {
  RunConfig rc = load_run_config(config_path, seed_override);
  fs::path dir = prepare_out(out);
  ch::Dataset ds = ch::generate(rc.generator);
  ch::Manifest man;
  man.command = "gen";
  man.resolved_config = resolved_json(rc);
  man.seed = rc.generator.seed;
  write_artifact(man, dir, "dataset.json", ch::to_json(ds).dump(2) + "\n");
  write_artifact(man, dir, "dataset.csv", ch::dataset_csv(ds));
  finish_manifest(man, dir);
  std::printf("gen: n=%zu regime=%s fingerprint=%s\n", ds.cases.size(),
              ch::regime_name(ds.config.regime).c_str(),
              ch::hex64(ds.config_fingerprint).c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& dataset_path,
              std::string method, const std::string& out,
              std::uint64_t seed_override) {
  RunConfig rc = load_run_config(config_path, seed_override);
  if (!method.empty()) rc.method = method;
  if (std::find(kMethods.begin(), kMethods.end(), rc.method) == kMethods.end())
    throw ch::ConfigError("unknown method '" + rc.method +
                          "' (expected tsl|sm-asg|snn-adam|smnn-adam)");
  ch::Dataset ds = ch::dataset_from_json(ch::load_json_file(dataset_path));
  // the dataset is the provenance authority: the config file must describe
  // the same generator up to seed (seed-override forks stay trainable), and
  // the manifest echoes the generator the data actually came from
  ch::GeneratorConfig aligned = rc.generator;
  aligned.seed = ds.config.seed;
  if (aligned.fingerprint() != ds.config_fingerprint)
    throw ch::ConfigError(dataset_path +
                          ": dataset was generated from a different config"
                          " than " + config_path);
  rc.generator = ds.config;
  rc.train.regime = ds.config.regime;
  fs::path dir = prepare_out(out);
  auto [train_ds, test_ds] = split_for(ds, rc);

  json model_json;
  std::string restarts;
  try {
    if (rc.method == "tsl") {
      ch::TslResult r = ch::tsl_train(train_ds, rc.train);
      model_json = ch::to_json(r, ds.config_fingerprint, "tsl");
      restarts = ch::restarts_csv(r.restarts);
    } else if (rc.method == "smnn-adam") {
      ch::TslResult r = ch::train_smnn_adam_random(train_ds, rc.train);
      model_json = ch::to_json(r, ds.config_fingerprint, "smnn-adam");
      restarts = ch::restarts_csv(r.restarts);
    } else if (rc.method == "snn-adam") {
      ch::SnnTrainResult r = ch::train_snn_adam(train_ds, rc.train);
      model_json = ch::to_json(r, ds.config_fingerprint);
      restarts = ch::restarts_csv(r.restarts);
    } else {
      ch::SmAsgModel r = ch::train_sm_asg(train_ds, rc.train);
      model_json = ch::to_json(r, ds.config_fingerprint);
      restarts = "restart,train_rad,train_loss,selected\n";  // no restarts phase
    }
  } catch (const ch::DegenerateLeadingEntry& ex) {
    throw ch::DegenerateLeadingEntry(
        std::string(ex.what()) +
        "; remedy: increase n, raise v/u activation rates, or lengthen the"
        " stage-1 pass so the leading expansion weight moves away from zero");
  }
  model_json["split"] = json{{"train", rc.split_train}, {"test", rc.split_test}};

  ch::Manifest man;
  man.command = "train";
  man.resolved_config = resolved_json(rc);
  man.seed = rc.train.seed;
  write_artifact(man, dir, "model.json", model_json.dump(2) + "\n");
  write_artifact(man, dir, "restarts.csv", restarts);
  finish_manifest(man, dir);
  std::printf("train: method=%s n_train=%zu\n", rc.method.c_str(),
              train_ds.cases.size());
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_path,
             const std::string& out) {
  json mj = ch::load_json_file(model_path);
  ch::LoadedModel model = ch::model_from_json(mj);
  ch::Dataset ds = ch::dataset_from_json(ch::load_json_file(dataset_path));
  if (model.config_fingerprint != ds.config_fingerprint)
    throw ch::DataError("fingerprint mismatch: model was trained on " +
                        ch::hex64(model.config_fingerprint) + ", dataset is " +
                        ch::hex64(ds.config_fingerprint));
  check_dims(model, ds);
  fs::path dir = prepare_out(out);

  std::size_t st = 4, se = 1;
  if (mj.contains("split")) {
    st = mj["split"].value("train", std::size_t{4});
    se = mj["split"].value("test", std::size_t{1});
  }
  ch::Dataset eval_ds = ds;
  if (se != 0) eval_ds = ch::split(ds, st, se).second;

  ch::EvalReport rep =
      ch::evaluate(ch::predictor_from(model), eval_ds, model.method);
  json rj{{"schema_version", ch::kSchemaVersion},
          {"kind", "eval_report"},
          {"method", rep.method},
          {"config_fingerprint", ch::hex64(ds.config_fingerprint)},
          {"rad", rep.rad},
          {"n2", rep.n2}};

  ch::Manifest man;
  man.command = "eval";
  man.resolved_config = json{{"model", model_path}, {"dataset", dataset_path}};
  man.seed = 0;
  write_artifact(man, dir, "eval.json", rj.dump(2) + "\n");
  write_artifact(man, dir, "eval_cases.csv", ch::eval_csv(rep));
  finish_manifest(man, dir);
  std::printf("eval: method=%s rad=%.6f n2=%zu\n", rep.method.c_str(), rep.rad,
              rep.n2);
  return 0;
}

int cmd_regret(const std::string& config_path, const std::string& out,
               std::uint64_t seed_override) {
  RunConfig rc = load_run_config(config_path, seed_override);
  fs::path dir = prepare_out(out);
  ch::Dataset ds = ch::generate(rc.generator);
  ch::Stage1Result s1 = ch::stage1_run(ds, rc.train, /*track_regret=*/true);
  const ch::RegretTracker& tracker = *s1.regret;

  ch::LineChart chart;
  chart.title = "Stage-1 adaptive gradient: regret decay";
  chart.x_label = "step k";
  chart.y_label = "regret";
  chart.log_x = true;
  ch::Series norm{"normalized cumulative", "", {}, {}, false};
  ch::Series avg{"average per step", "", {}, {}, false};
  const std::size_t stride = std::max<std::size_t>(1, tracker.log.size() / 2000);
  for (std::size_t i = 0; i < tracker.log.size(); i += stride) {
    const ch::RegretPoint& pt = tracker.log[i];
    norm.x.push_back(static_cast<double>(pt.k));
    norm.y.push_back(pt.cum_normalized);
    avg.x.push_back(static_cast<double>(pt.k));
    avg.y.push_back(pt.cumulative / static_cast<double>(pt.k));
  }
  chart.series = {norm, avg};

  ch::Manifest man;
  man.command = "regret";
  man.resolved_config = resolved_json(rc);
  man.seed = rc.generator.seed;
  write_artifact(man, dir, "regret.csv", ch::regret_csv(tracker));
  write_artifact(man, dir, "regret.svg", ch::render_chart(chart));
  finish_manifest(man, dir);
  const ch::RegretPoint& last = tracker.log.back();
  std::printf("regret: n=%zu final_normalized=%.6g\n", tracker.log.size(),
              last.cum_normalized);
  return 0;
}

struct TrainedMethod {
  std::string name;
  ch::Predictor predictor;
};

TrainedMethod train_method(const std::string& name, const ch::Dataset& train_ds,
                           const ch::TrainConfig& cfg) {
  if (name == "tsl")
    return {name, ch::tsl_predictor(ch::tsl_train(train_ds, cfg))};
  if (name == "sm-asg")
    return {name, ch::sm_asg_predictor(ch::train_sm_asg(train_ds, cfg))};
  if (name == "snn-adam")
    return {name, ch::snn_predictor(ch::train_snn_adam(train_ds, cfg).model)};
  return {name, ch::tsl_predictor(ch::train_smnn_adam_random(train_ds, cfg))};
}

int cmd_compare(const std::string& config_path, const std::string& dataset_path,
                const std::string& out, std::uint64_t seed_override) {
  RunConfig rc = load_run_config(config_path, seed_override);
  fs::path dir = prepare_out(out);
  ch::Dataset ds = dataset_path.empty()
                       ? ch::generate(rc.generator)
                       : ch::dataset_from_json(ch::load_json_file(dataset_path));
  rc.train.regime = ds.config.regime;
  auto [train_ds, test_ds] = split_for(ds, rc);

  std::vector<std::pair<std::string, ch::Predictor>> predictors;
  for (const std::string& name : kMethods)
    predictors.emplace_back(name, train_method(name, train_ds, rc.train).predictor);
  std::vector<ch::ComparisonRow> rows = ch::compare(predictors, test_ds);

  // accuracy trend: retrain on chronological prefixes at 10 geometric sizes
  const std::size_t n_train = train_ds.cases.size();
  const std::size_t floor_n = std::max<std::size_t>(rc.train.T, 10);
  std::vector<std::size_t> checkpoints;
  for (int i = 9; i >= 0; --i) {
    std::size_t size = n_train >> i;
    size = std::max(size, floor_n);
    size = std::min(size, n_train);
    if (checkpoints.empty() || size > checkpoints.back())
      checkpoints.push_back(size);
  }

  std::ostringstream curves;
  curves << "method,n_train,rad\n";
  ch::LineChart chart;
  chart.title = "Test accuracy vs training-set size";
  chart.x_label = "training cases";
  chart.y_label = "RAD";
  chart.log_x = true;
  for (const std::string& name : kMethods) {
    ch::Series s{name, "", {}, {}, false};
    for (std::size_t size : checkpoints) {
      ch::Dataset prefix;
      prefix.config = train_ds.config;
      prefix.config_fingerprint = train_ds.config_fingerprint;
      prefix.cases.assign(train_ds.cases.begin(),
                          train_ds.cases.begin() + static_cast<std::ptrdiff_t>(size));
      TrainedMethod tm = train_method(name, prefix, rc.train);
      ch::EvalReport rep = ch::evaluate(tm.predictor, test_ds, name);
      curves << name << ',' << size << ',' << ch::format_double(rep.rad) << '\n';
      s.x.push_back(static_cast<double>(size));
      s.y.push_back(rep.rad);
    }
    chart.series.push_back(std::move(s));
  }

  ch::Manifest man;
  man.command = "compare";
  man.resolved_config = resolved_json(rc);
  man.seed = rc.generator.seed;
  write_artifact(man, dir, "compare.csv", ch::compare_csv(rows));
  write_artifact(man, dir, "curves.csv", curves.str());
  write_artifact(man, dir, "compare.svg", ch::render_chart(chart));
  finish_manifest(man, dir);
  for (const ch::ComparisonRow& r : rows)
    std::printf("compare: %-9s rad=%.6f n2=%zu\n", r.method.c_str(), r.rad, r.n2);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interval-censored hybrid regression toolkit"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, model_path, method, out_dir;
  std::uint64_t seed_override = 0;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "run config JSON")->required();
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed-override", seed_override, "replace all config seeds");

  CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--dataset", dataset_path, "dataset JSON")->required();
  train->add_option("--method", method, "tsl|sm-asg|snn-adam|smnn-adam");
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--seed-override", seed_override, "replace all config seeds");

  CLI::App* eval_cmd = app.add_subcommand("eval", "score a model on a dataset");
  eval_cmd->add_option("--model", model_path, "model JSON")->required();
  eval_cmd->add_option("--dataset", dataset_path, "dataset JSON")->required();
  eval_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI::App* regret = app.add_subcommand("regret", "stage-1 regret diagnostics");
  regret->add_option("--config", config_path, "run config JSON")->required();
  regret->add_option("--out", out_dir, "output directory")->required();
  regret->add_option("--seed-override", seed_override, "replace all config seeds");

  CLI::App* cmp = app.add_subcommand("compare", "train and score all methods");
  cmp->add_option("--config", config_path, "run config JSON")->required();
  cmp->add_option("--dataset", dataset_path, "dataset JSON (generated if absent)");
  cmp->add_option("--out", out_dir, "output directory")->required();
  cmp->add_option("--seed-override", seed_override, "replace all config seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    int code = app.exit(ex);
    return code == 0 ? 0 : 2;  // usage problems are config errors
  }

  try {
    if (gen->parsed()) return cmd_gen(config_path, out_dir, seed_override);
    if (train->parsed())
      return cmd_train(config_path, dataset_path, method, out_dir, seed_override);
    if (eval_cmd->parsed()) return cmd_eval(model_path, dataset_path, out_dir);
    if (regret->parsed()) return cmd_regret(config_path, out_dir, seed_override);
    if (cmp->parsed())
      return cmd_compare(config_path, dataset_path, out_dir, seed_override);
  } catch (const ch::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return 2;
  } catch (const ch::NumericError& ex) {
    std::cerr << "numeric failure: " << ex.what() << '\n';
    return 4;
  } catch (const ch::DataError& ex) {
    std::cerr << "data error: " << ex.what() << '\n';
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
