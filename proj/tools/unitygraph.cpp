// Command-line front end: train, eval, predict, params, gen.
// Exit codes: 0 success, 2 invalid configuration, 3 data error, 4 numeric failure.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "unitygraph/unitygraph.hpp"

namespace ug = unitygraph;

namespace {

struct Overrides {
  std::map<std::string, std::string> values;

  void attach(CLI::App& cmd) {
    for (const auto& name : ug::config_field_names()) {
      cmd.add_option("--" + name, values[name], "override config field " + name);
    }
  }

  ug::RunConfig apply(ug::RunConfig cfg, const CLI::App& cmd) const {
    for (const auto& [name, text] : values)
      if (cmd.count("--" + name) > 0) ug::set_field(cfg, name, text);
    ug::apply_seed_env(cfg);
    cfg.validate();
    return cfg;
  }
};

template <class S>
int run_train(const ug::RunConfig& cfg) {
  const std::filesystem::path out = cfg.out_dir;
  std::filesystem::create_directories(out);
  const auto scenes = ug::load_scenes(cfg, "train");
  std::cout << "training on " << scenes.size() << " scenes, " << ug::to_string(cfg.precision) << " precision, seed "
            << cfg.seed << "\n";
  auto result = ug::train<S>(cfg, scenes, {&std::cout, out / "checkpoint.last_good.ugck"});
  ug::write_training_outputs(out, result);
  std::cout << "final training loss " << result.final_total << " after " << result.steps << " steps\n";
  std::cout << "wrote " << (out / "checkpoint.ugck").string() << "\n";

  const auto test = ug::load_scenes(cfg, "test");
  if (!test.empty()) {
    const auto report = ug::evaluate(result.model, test);
    ug::write_file_atomic(out / "metrics.json", report.to_json().dump(2) + "\n");
    std::cout << "\ntest scenes: " << test.size() << "\n" << report.to_table();
  }
  return 0;
}

template <class S>
int run_eval(const std::string& ckpt, const std::string& data, const std::string& json_out, bool baseline) {
  auto snap = ug::load_checkpoint<S>(ckpt);
  if (!std::filesystem::is_directory(data)) throw ug::Error(ug::ErrorKind::data_missing, "no dataset directory " + data);
  const auto scenes = ug::Dataset::open(data).load_split("test");
  const auto report = ug::evaluate(snap.model, scenes);
  std::cout << "scenes: " << report.scenes << "\n" << report.to_table();
  nlohmann::json doc = report.to_json();
  if (baseline) {
    const auto& cfg = snap.model.config();
    const auto base = ug::evaluate_constant_pose(scenes, cfg.observed, cfg.future);
    std::cout << "\nconstant last pose baseline\n" << base.to_table();
    doc["constant_pose_baseline"] = base.to_json();
  }
  if (!json_out.empty()) ug::write_file_atomic(json_out, doc.dump(2) + "\n");
  return 0;
}

template <class S>
int run_predict(const std::string& ckpt, const std::string& scene_path, const std::string& out) {
  auto snap = ug::load_checkpoint<S>(ckpt);
  const auto scene = ug::load_scene(scene_path);
  ug::predict_to_directory(snap.model, scene, out);
  std::cout << "wrote prediction, attention, trace and interaction-score files to " << out << "\n";
  return 0;
}

int run_params(const ug::RunConfig& cfg) {
  const ug::Model<double> model(cfg);
  const ug::Model<double> again(cfg);
  std::size_t total = 0;
  for (const auto& [group, count] : ug::parameter_groups(model.params())) {
    std::cout << group << " " << count << "\n";
    total += count;
  }
  if (again.params().scalar_count() != total) {
    throw ug::Error(ug::ErrorKind::numeric_failure, "parameter count differs between initialisations");
  }
  std::cout << "total " << total << "\n";
  return 0;
}

int run_gen(const std::string& config_path, const std::string& out, std::size_t train, std::size_t val, std::size_t test) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ug::read_text_file(config_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ug::Error(ug::ErrorKind::config_invalid, std::string("synthetic config: ") + e.what());
  } catch (const ug::Error& e) {
    throw ug::Error(ug::ErrorKind::config_invalid, e.what());
  }
  ug::SyntheticSceneConfig cfg;
  from_json(j, cfg);
  if (const char* s = std::getenv("UNITYGRAPH_SEED"); s != nullptr && *s != '\0') cfg.seed = std::stoull(s);
  ug::DatasetCounts counts{j.value("train_scenes", train), j.value("val_scenes", val), j.value("test_scenes", test)};
  const auto entries = ug::generate_dataset(cfg, counts, out);
  std::cout << "wrote " << entries.size() << " scenes and manifest.json to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-person motion prediction on hypervariate graphs"};
  app.require_subcommand(1);

  std::string config_path, ckpt, data, scene, out, json_out, synth_path;
  bool baseline = false;
  std::size_t n_train = 8, n_val = 0, n_test = 4;

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "run configuration JSON")->required();
  Overrides train_overrides;
  train_overrides.attach(*train);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split of a dataset");
  eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval->add_option("--data", data, "dataset directory with manifest.json")->required();
  eval->add_option("--json", json_out, "also write the metric report as JSON");
  eval->add_flag("--baseline", baseline, "also report the constant last-pose baseline");

  auto* predict = app.add_subcommand("predict", "predict one scene and export plots");
  predict->add_option("--ckpt", ckpt, "checkpoint file")->required();
  predict->add_option("--scene", scene, "scene JSON file")->required();
  predict->add_option("--out", out, "output directory")->required();

  auto* params = app.add_subcommand("params", "report parameter counts for a configuration");
  params->add_option("--config", config_path, "run configuration JSON")->required();
  Overrides params_overrides;
  params_overrides.attach(*params);

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--synthetic-config", synth_path, "generator configuration JSON")->required();
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--train", n_train, "training scenes (default 8)");
  gen->add_option("--val", n_val, "validation scenes (default 0)");
  gen->add_option("--test", n_test, "test scenes (default 4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      const auto cfg = train_overrides.apply(ug::load_run_config(config_path), *train);
      return cfg.precision == ug::Precision::single ? run_train<float>(cfg) : run_train<double>(cfg);
    }
    if (*eval) {
      return ug::checkpoint_precision(ckpt) == ug::Precision::single ? run_eval<float>(ckpt, data, json_out, baseline)
                                                                     : run_eval<double>(ckpt, data, json_out, baseline);
    }
    if (*predict) {
      return ug::checkpoint_precision(ckpt) == ug::Precision::single ? run_predict<float>(ckpt, scene, out)
                                                                     : run_predict<double>(ckpt, scene, out);
    }
    if (*params) return run_params(params_overrides.apply(ug::load_run_config(config_path), *params));
    if (*gen) return run_gen(synth_path, out, n_train, n_val, n_test);
  } catch (const ug::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ug::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
