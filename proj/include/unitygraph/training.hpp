#pragma once

// Training, evaluation, prediction export and synthetic dataset generation.
// Everything is single-threaded and a deterministic function of the config.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitygraph/checkpoint.hpp"
#include "unitygraph/config.hpp"
#include "unitygraph/model.hpp"
#include "unitygraph/objectives_metrics.hpp"
#include "unitygraph/optimizer.hpp"
#include "unitygraph/plots.hpp"
#include "unitygraph/scene_io.hpp"
#include "unitygraph/synthetic.hpp"

namespace unitygraph {

inline constexpr std::size_t kPpcWindow = 10;

/// Train or test scenes for a config: synthetic when config.data is empty,
/// otherwise the matching split of the dataset directory.
inline std::vector<MotionSequence> load_scenes(const RunConfig& cfg, const std::string& split) {
  if (cfg.data.empty()) {
    const bool test = split != "train";
    const std::size_t count = test ? cfg.test_scenes : cfg.train_scenes;
    std::vector<MotionSequence> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_synthetic(cfg.synthetic_scene(i, test)));
    return out;
  }
  if (!std::filesystem::is_directory(cfg.data)) throw Error(ErrorKind::data_missing, "no dataset directory " + cfg.data);
  return Dataset::open(cfg.data).load_split(split);
}

inline std::vector<SceneSplit> split_all(const std::vector<MotionSequence>& scenes, std::size_t T, std::size_t P) {
  std::vector<SceneSplit> out;
  for (const auto& s : scenes) out.push_back(split_scene(s, T, P));
  return out;
}

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t step = 0;  // optimiser steps completed before this epoch
  double learning_rate = 0;
  double pre = 0, rec = 0, inf = 0, total = 0;  // mean over scenes, before the epoch's updates
  double grad_norm = 0;                         // of the last step
};

inline nlohmann::json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch}, {"step", e.step},   {"learning_rate", e.learning_rate}, {"pre", e.pre},
          {"rec", e.rec},     {"inf", e.inf},     {"total", e.total},                 {"grad_norm", e.grad_norm}};
}

template <class S>
struct TrainOutcome {
  Model<S> model;
  AdamW<S> optimizer;
  std::mt19937_64 rng;
  std::vector<EpochLog> log;
  double final_total = 0;  // mean total loss over the training scenes after the last update
  std::size_t steps = 0;
};

/// Mean loss over scenes with no parameter update.
template <class S>
LossReport mean_loss(Model<S>& model, const std::vector<SceneSplit>& splits) {
  if (splits.empty()) throw Error(ErrorKind::empty_dataset, "no scenes");
  LossReport mean;
  for (const auto& s : splits) {
    const auto r = model.evaluate_loss(s.observed, s.future);
    mean.pre += r.pre;
    mean.rec += r.rec;
    mean.inf += r.inf;
  }
  const double k = static_cast<double>(splits.size());
  mean.pre /= k;
  mean.rec /= k;
  mean.inf /= k;
  mean.total = model.config().loss_weights().combine(mean.pre, mean.rec, mean.inf);
  return mean;
}

struct TrainOptions {
  std::ostream* progress = nullptr;
  std::filesystem::path checkpoint_on_failure;  // empty: do not write
};

template <class S>
TrainOutcome<S> train(const RunConfig& cfg, const std::vector<MotionSequence>& scenes, const TrainOptions& opts = {}) {
  cfg.validate();
  if (scenes.empty()) throw Error(ErrorKind::empty_dataset, "no training scenes");
  const auto splits = split_all(scenes, cfg.observed, cfg.future);
  TrainOutcome<S> out{Model<S>(cfg), AdamW<S>(), std::mt19937_64(cfg.seed ^ 0x9e3779b97f4a7c15ULL), {}, 0, 0};
  out.optimizer = AdamW<S>(out.model.params(), {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon, cfg.weight_decay});
  auto& store = out.model.params();

  std::vector<std::size_t> order(splits.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Matrix<S>> last_good;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), out.rng);
    const double lr = scheduled_learning_rate(cfg.learning_rate, cfg.lr_decay, cfg.decay_every, epoch);
    EpochLog log{epoch, out.steps, lr};
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const S inv = S(1) / static_cast<S>(end - begin);
      last_good.clear();
      for (const auto& p : store) last_good.push_back(p.value);
      store.zero_grad();
      bool finite = true;
      for (std::size_t b = begin; b < end; ++b) {
        const auto& s = splits[order[b]];
        Tape<S> tape;
        auto fw = out.model.forward(tape, s.observed, &s.future);
        const auto& L = *fw.loss;
        log.pre += static_cast<double>(L.pre.value()[0]);
        log.rec += static_cast<double>(L.rec.value()[0]);
        log.inf += static_cast<double>(L.inf.value()[0]);
        log.total += static_cast<double>(L.total.value()[0]);
        if (!std::isfinite(static_cast<double>(L.total.value()[0]))) {
          finite = false;
          break;
        }
        tape.backward(ad::scale(L.total, inv));
      }
      if (finite) log.grad_norm = clip_gradients(store, cfg.max_grad_norm);
      if (!finite || !std::isfinite(log.grad_norm)) {
        for (std::size_t k = 0; k < store.size(); ++k) store[k].value = last_good[k];
        if (!opts.checkpoint_on_failure.empty()) {
          save_checkpoint(opts.checkpoint_on_failure, out.model, out.optimizer, epoch, out.rng);
        }
        throw Error(ErrorKind::numeric_failure, "non-finite loss or gradient at epoch " + std::to_string(epoch) +
                                                    ", step " + std::to_string(out.steps) +
                                                    (opts.checkpoint_on_failure.empty() ? std::string()
                                                                                        : "; last good parameters saved to " +
                                                                                              opts.checkpoint_on_failure.string()));
      }
      out.optimizer.step(store, lr);
      ++out.steps;
    }
    const double k = static_cast<double>(splits.size());
    log.pre /= k;
    log.rec /= k;
    log.inf /= k;
    log.total /= k;
    out.log.push_back(log);
    if (opts.progress != nullptr && (epoch % std::max<std::size_t>(cfg.log_every, 1) == 0 || epoch + 1 == cfg.epochs)) {
      *opts.progress << "epoch " << std::setw(5) << epoch << "  lr " << std::scientific << std::setprecision(2) << lr
                     << std::defaultfloat << std::setprecision(6) << "  total " << log.total << "  pre " << log.pre
                     << "  rec " << log.rec << "  inf " << log.inf << "\n";
    }
  }
  out.final_total = mean_loss(out.model, splits).total;
  return out;
}

/// Writes checkpoint.ugck, config.json, loss_curve.json and loss_curve.svg.
template <class S>
void write_training_outputs(const std::filesystem::path& dir, const TrainOutcome<S>& t) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "checkpoint.ugck", t.model, t.optimizer, t.log.size(), t.rng);
  write_file_atomic(dir / "config.json", to_json(t.model.config()).dump(2) + "\n");
  nlohmann::json curve;
  curve["epochs"] = nlohmann::json::array();
  for (const auto& e : t.log) curve["epochs"].push_back(to_json(e));
  curve["final_total"] = t.final_total;
  write_file_atomic(dir / "loss_curve.json", curve.dump(2) + "\n");
  std::vector<plot::Series> series(4);
  series[0].name = "total";
  series[1].name = "pre";
  series[2].name = "rec";
  series[3].name = "inf";
  for (const auto& e : t.log) {
    series[0].values.emplace_back(e.total);
    series[1].values.emplace_back(e.pre);
    series[2].values.emplace_back(e.rec);
    series[3].values.emplace_back(e.inf);
  }
  write_file_atomic(dir / "loss_curve.svg", plot::line_chart("training loss", series, "epoch", "loss", true));
}

/// Free-running prediction on every scene, metrics in world coordinates.
template <class S>
MetricReport evaluate(Model<S>& model, const std::vector<MotionSequence>& scenes) {
  if (scenes.empty()) throw Error(ErrorKind::empty_dataset, "evaluation dataset is empty");
  const auto& cfg = model.config();
  std::vector<MetricReport> reports;
  for (const auto& scene : scenes) {
    if (scene.persons() == 0 || scene.joints() != cfg.joints) {
      throw Error(ErrorKind::shape_incompatible_checkpoint, "scene joint count differs from the checkpoint");
    }
    const auto split = split_scene(scene, cfg.observed, cfg.future);
    const auto pred = model.predict(split.observed, cfg.future);
    reports.push_back(evaluate_prediction(pred.future.template as_matrix<double>(), split.future.template as_matrix<double>(),
                                          scene.persons(), scene.fps()));
  }
  return average_reports(reports);
}

/// Predicts the last observed pose for every future frame.
inline MotionSequence constant_pose_prediction(const MotionSequence& observed, std::size_t horizon) {
  MotionSequence out(observed.persons(), horizon, observed.skeleton(), observed.fps());
  for (std::size_t n = 0; n < observed.persons(); ++n)
    for (std::size_t f = 0; f < horizon; ++f) {
      const auto last = observed.pose(n, observed.frames() - 1);
      std::copy(last.begin(), last.end(), out.pose(n, f).begin());
    }
  return out;
}

inline MetricReport evaluate_constant_pose(const std::vector<MotionSequence>& scenes, std::size_t T, std::size_t P) {
  if (scenes.empty()) throw Error(ErrorKind::empty_dataset, "evaluation dataset is empty");
  std::vector<MetricReport> reports;
  for (const auto& scene : scenes) {
    const auto split = split_scene(scene, T, P);
    reports.push_back(evaluate_prediction(constant_pose_prediction(split.observed, P).as_matrix<double>(),
                                          split.future.as_matrix<double>(), scene.persons(), scene.fps()));
  }
  return average_reports(reports);
}

/// Joint-averaged windowed correlation between every pair of persons.
inline nlohmann::json ppc_series_json(const MotionSequence& seq, std::size_t window) {
  const Matrix<double> all = seq.as_matrix<double>();
  std::vector<Matrix<double>> dist;
  for (std::size_t n = 0; n < seq.persons(); ++n) dist.push_back(root_distance_series(person_rows(all, seq.persons(), n)));
  auto pairs = nlohmann::json::array();
  for (std::size_t n = 0; n < seq.persons(); ++n)
    for (std::size_t m = n + 1; m < seq.persons(); ++m) {
      auto values = nlohmann::json::array();
      for (const auto& v : ppc_series(dist[n], dist[m], window)) values.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
      pairs.push_back({{"first", n}, {"second", m}, {"series", std::move(values)}});
    }
  return {{"window", window}, {"frames", seq.frames()}, {"pairs", std::move(pairs)}};
}

/// Writes prediction.json, attention.json, trace.json, ppc.json and SVG plots.
/// The first `observed` frames of the scene are the model input; any
/// further frames are used as ground truth in the overlay.
template <class S>
void predict_to_directory(Model<S>& model, const MotionSequence& scene, const std::filesystem::path& out_dir) {
  const auto& cfg = model.config();
  if (scene.frames() < cfg.observed) {
    throw Error(ErrorKind::insufficient_frames, "scene has " + std::to_string(scene.frames()) + " frames, model needs " +
                                                    std::to_string(cfg.observed));
  }
  const MotionSequence observed = scene.frame_range(0, cfg.observed);
  auto pred = model.predict(observed, cfg.future);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::io_failure, "cannot create " + out_dir.string() + ": " + ec.message());

  save_scene(pred.future, out_dir / "prediction.json");
  const HypergraphTopology topo(observed.persons(), observed.frames());
  write_file_atomic(out_dir / "attention.json", attention_to_json(pred.attention, topo).dump() + "\n");
  write_file_atomic(out_dir / "trace.json", trace_to_json(pred.trace, cfg.observed).dump() + "\n");

  const MotionSequence full = concat_frames(observed, pred.future);
  const std::size_t window = std::min(kPpcWindow, full.frames());
  const auto ppc_doc = window >= 2 ? ppc_series_json(full, window) : nlohmann::json::object();
  write_file_atomic(out_dir / "ppc.json", ppc_doc.dump() + "\n");

  std::optional<MotionSequence> truth;
  if (scene.frames() > cfg.observed) {
    truth = scene.frame_range(cfg.observed, std::min(cfg.future, scene.frames() - cfg.observed));
  }
  write_file_atomic(out_dir / "skeleton.svg",
                    plot::skeleton_overlay("prediction (blue) vs input (grey)" + std::string(truth ? ", truth (red)" : ""),
                                           observed, pred.future, truth ? &*truth : nullptr));

  // Node-to-incident-edge weights per layer: rows persons*frames, columns edge slots.
  const std::size_t T = topo.frames();
  for (const auto& rec : pred.attention) {
    Matrix<double> values(topo.persons(), T * 3), mask(topo.persons(), T * 3);
    for (auto f : kEdgeFamilies) {
      const auto fi = static_cast<std::size_t>(f);
      const auto& m = topo.members(f);
      for (std::size_t i = 0; i < rec.beta[fi].size(); ++i) {
        const std::size_t v = (*m.node)[i];
        const std::size_t col = (v % T) * 3 + fi;
        values(v / T, col) += rec.beta[fi][i];
        mask(v / T, col) = 1;
      }
    }
    write_file_atomic(out_dir / ("attention_layer" + std::to_string(rec.layer) + ".svg"),
                      plot::heatmap("hyperedge-to-node weights, layer " + std::to_string(rec.layer), values, mask, "person",
                                    "frame x (short, long, spatial)"));
  }

  if (ppc_doc.contains("pairs")) {
    std::vector<plot::Series> series;
    for (const auto& p : ppc_doc["pairs"]) {
      plot::Series s;
      s.name = std::to_string(p["first"].get<std::size_t>()) + "-" + std::to_string(p["second"].get<std::size_t>());
      for (const auto& v : p["series"]) s.values.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      series.push_back(std::move(s));
    }
    write_file_atomic(out_dir / "ppc.svg", plot::line_chart("interaction score", series, "frame", "PPC"));
  }
}

struct DatasetCounts {
  std::size_t train = 8;
  std::size_t val = 0;
  std::size_t test = 4;
};

/// Writes scene files and manifest.json; scene i of the whole set uses seed + i.
inline std::vector<ManifestEntry> generate_dataset(const SyntheticSceneConfig& base, const DatasetCounts& counts,
                                                   const std::filesystem::path& dir) {
  base.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io_failure, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  std::size_t index = 0;
  auto emit = [&](std::size_t count, const std::string& split) {
    for (std::size_t i = 0; i < count; ++i, ++index) {
      SyntheticSceneConfig c = base;
      c.seed = base.seed + index;
      std::ostringstream name;
      name << "scene_" << std::setw(4) << std::setfill('0') << index << ".json";
      save_scene(generate_synthetic(c), dir / name.str());
      entries.push_back({name.str(), split});
    }
  };
  emit(counts.train, "train");
  emit(counts.val, "val");
  emit(counts.test, "test");
  write_manifest(dir, entries);
  return entries;
}

}  // namespace unitygraph
