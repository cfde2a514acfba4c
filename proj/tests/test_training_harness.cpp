#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "support/util.hpp"
#include "unitygraph/unitygraph.hpp"

using namespace unitygraph;
using testutil::kind_of;
using testutil::temp_dir;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.train_scenes = 3;
  c.test_scenes = 2;
  c.persons = 2;
  c.observed = 4;
  c.future = 3;
  c.joints = 3;
  c.hidden_dim = 8;
  c.decoder_hidden = 8;
  c.mlp_hidden = 6;
  c.layers = 2;
  c.attention_heads = 2;
  c.batch_size = 2;
  c.epochs = 4;
  c.synthetic.motion_styles = {MotionStyle::walk, MotionStyle::approach};
  return c;
}

std::size_t total_parameters(const ParamStore<double>& store) {
  std::size_t n = 0;
  for (const auto& p : store) n += p.value.size();
  return n;
}

/// Closed-form count: encoder, hypergraph layers, decoder, reconstruction.
std::size_t expected_parameters(const RunConfig& c) {
  const std::size_t D = c.hidden_dim, H = c.decoder_hidden, M = c.mlp_hidden, Q = 3 * c.joints, L = c.layers;
  const std::size_t enc = 9 * D + 2 * (D * D + D);
  const std::size_t mp = L * (2 * D * D + 3 * (D * D + D) + 3 * (2 * D * M + M + D));
  const std::size_t dec = D * H + H + Q * H + H + Q * H + 6 * (H * H + H) + H * Q + Q + 3 * (D * Q + Q) + 3 * (Q * Q + Q);
  return enc + mp + dec + D * Q + Q;
}

}  // namespace

TEST(Config, JsonRoundTripPreservesEveryField) {
  RunConfig c = tiny_config();
  c.lambda_inf = 0.25;
  c.use_spatial = false;
  c.precision = Precision::single;
  c.seed = 12345678901234ULL;
  const auto j = to_json(c);
  EXPECT_EQ(to_json(run_config_from_json(j)), j);
  EXPECT_EQ(j.size(), config_field_names().size() + 1);
}

TEST(Config, UnknownKeysAndBadValuesAreConfigInvalid) {
  EXPECT_EQ(kind_of([] { run_config_from_json({{"hiden_dim", 8}}); }), ErrorKind::config_invalid);
  EXPECT_EQ(kind_of([] { run_config_from_json(nlohmann::json::array()); }), ErrorKind::config_invalid);
  RunConfig c;
  EXPECT_EQ(kind_of([&] { set_field(c, "epochs", "-3"); }), ErrorKind::config_invalid);
  EXPECT_EQ(kind_of([&] { set_field(c, "learning_rate", "fast"); }), ErrorKind::config_invalid);
  EXPECT_EQ(kind_of([&] { set_field(c, "use_spatial", "maybe"); }), ErrorKind::config_invalid);
  EXPECT_EQ(kind_of([&] { set_field(c, "precision", "half"); }), ErrorKind::config_invalid);
  set_field(c, "learning_rate", "2.5e-4");
  EXPECT_EQ(c.learning_rate, 2.5e-4);
  set_field(c, "use_long_term", "false");
  EXPECT_FALSE(c.use_long_term);
}

TEST(Config, ValidationRejectsInconsistentSettings) {
  auto bad = [](auto edit) {
    RunConfig c = tiny_config();
    edit(c);
    return kind_of([&] { c.validate(); });
  };
  EXPECT_EQ(bad([](RunConfig& c) { c.observed = 1; }), ErrorKind::config_invalid);
  EXPECT_EQ(bad([](RunConfig& c) { c.hidden_dim = 9; }), ErrorKind::config_invalid);
  EXPECT_EQ(bad([](RunConfig& c) { c.layers = 0; }), ErrorKind::config_invalid);
  EXPECT_EQ(bad([](RunConfig& c) { c.use_short_term = c.use_long_term = c.use_spatial = false; }),
            ErrorKind::config_invalid);
  EXPECT_EQ(bad([](RunConfig& c) { c.learning_rate = 0; }), ErrorKind::config_invalid);
  EXPECT_EQ(bad([](RunConfig& c) { c.lr_decay = 1.5; }), ErrorKind::config_invalid);
}

TEST(Config, MissingOrUnparsableFileIsConfigInvalid) {
  const auto dir = temp_dir("config_file");
  EXPECT_EQ(kind_of([&] { load_run_config((dir / "absent.json").string()); }), ErrorKind::config_invalid);
  std::ofstream(dir / "broken.json") << "{\"epochs\": ";
  EXPECT_EQ(kind_of([&] { load_run_config((dir / "broken.json").string()); }), ErrorKind::config_invalid);
}

TEST(Config, SeedEnvironmentVariableOverridesTheSeed) {
  RunConfig c;
  ::setenv("UNITYGRAPH_SEED", "77", 1);
  apply_seed_env(c);
  ::unsetenv("UNITYGRAPH_SEED");
  EXPECT_EQ(c.seed, 77u);
  apply_seed_env(c);
  EXPECT_EQ(c.seed, 77u);
}

TEST(Schedule, LearningRateDecaysStepwise) {
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(1e-3, 0.8, 10, 0), 1e-3);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(1e-3, 0.8, 10, 9), 1e-3);
  EXPECT_NEAR(scheduled_learning_rate(1e-3, 0.8, 10, 10), 8e-4, 1e-18);
  EXPECT_NEAR(scheduled_learning_rate(1e-3, 0.8, 10, 25), 6.4e-4, 1e-18);
}

TEST(Model, ParameterCountMatchesClosedForm) {
  for (const auto& [D, H, M, J, L] : std::vector<std::array<std::size_t, 5>>{{8, 8, 6, 3, 2}, {32, 64, 32, 8, 3}, {16, 24, 40, 15, 1}}) {
    RunConfig c = tiny_config();
    c.hidden_dim = D;
    c.decoder_hidden = H;
    c.mlp_hidden = M;
    c.joints = J;
    c.layers = L;
    Model<double> m(c);
    EXPECT_EQ(total_parameters(m.params()), expected_parameters(c));
    std::size_t grouped = 0;
    for (const auto& [name, count] : parameter_groups(m.params())) grouped += count;
    EXPECT_EQ(grouped, expected_parameters(c));
  }
}

TEST(Model, UntrainedModelRepeatsTheLastObservedPose) {
  RunConfig c = tiny_config();
  Model<double> m(c);
  const auto scene = generate_synthetic(c.synthetic_scene(0, false));
  const auto split = split_scene(scene, c.observed, c.future);
  const auto pred = m.predict(split.observed);
  EXPECT_EQ(pred.future, constant_pose_prediction(split.observed, c.future));
}

TEST(Model, AblationsKeepOutputShapes) {
  for (int mask = 1; mask < 8; ++mask) {
    RunConfig c = tiny_config();
    c.use_short_term = mask & 1;
    c.use_long_term = mask & 2;
    c.use_spatial = mask & 4;
    c.use_inference_loss = mask != 7;
    Model<double> m(c);
    const auto scene = generate_synthetic(c.synthetic_scene(1, false));
    const auto split = split_scene(scene, c.observed, c.future);
    Tape<double> tape;
    const auto fw = m.forward(tape, split.observed, &split.future);
    EXPECT_EQ(fw.nodes.rows(), c.persons * c.observed);
    EXPECT_EQ(fw.poses.rows(), c.persons * c.future);
    EXPECT_EQ(fw.poses.cols(), 3 * c.joints);
    EXPECT_TRUE(std::isfinite(fw.loss->total.value()[0]));
    if (!c.use_inference_loss) {
      EXPECT_EQ(fw.loss->inf.value()[0], 0.0);
    }
  }
}

TEST(Model, SceneShapeChecks) {
  RunConfig c = tiny_config();
  Model<double> m(c);
  SyntheticSceneConfig s = c.synthetic_scene(0, false);
  s.joints = 4;
  const auto other = generate_synthetic(s).frame_range(0, c.observed);
  EXPECT_EQ(kind_of([&] { m.predict(other); }), ErrorKind::shape_incompatible_checkpoint);
  const auto short_window = generate_synthetic(c.synthetic_scene(0, false)).frame_range(0, c.observed - 1);
  EXPECT_EQ(kind_of([&] { m.predict(short_window); }), ErrorKind::shape_incompatible_checkpoint);
}

TEST(Training, SameSeedGivesIdenticalRuns) {
  const RunConfig c = tiny_config();
  const auto scenes = load_scenes(c, "train");
  auto a = train<double>(c, scenes), b = train<double>(c, scenes);
  ASSERT_EQ(a.log.size(), c.epochs);
  EXPECT_EQ(a.final_total, b.final_total);
  for (std::size_t k = 0; k < a.model.params().size(); ++k) EXPECT_EQ(a.model.params()[k].value, b.model.params()[k].value);
  RunConfig d = c;
  d.seed = 1;
  EXPECT_NE(train<double>(d, scenes).final_total, a.final_total);
}

TEST(Training, LossDecreasesOnAShortRun) {
  RunConfig c = tiny_config();
  c.epochs = 40;
  c.learning_rate = 3e-3;
  c.decay_every = 100;
  const auto t = train<double>(c, load_scenes(c, "train"));
  EXPECT_LT(t.final_total, t.log.front().total);
  EXPECT_EQ(t.steps, 40u * 2);
}

TEST(Training, SinglePrecisionRuns) {
  RunConfig c = tiny_config();
  c.precision = Precision::single;
  const auto t = train<float>(c, load_scenes(c, "train"));
  EXPECT_TRUE(std::isfinite(t.final_total));
}

TEST(Training, EmptyInputsAreEmptyDataset) {
  const RunConfig c = tiny_config();
  EXPECT_EQ(kind_of([&] { train<double>(c, {}); }), ErrorKind::empty_dataset);
  Model<double> m(c);
  EXPECT_EQ(kind_of([&] { evaluate(m, {}); }), ErrorKind::empty_dataset);
  EXPECT_EQ(kind_of([] { evaluate_constant_pose({}, 4, 3); }), ErrorKind::empty_dataset);
}

TEST(Training, MissingDatasetDirectoryIsDataMissing) {
  RunConfig c = tiny_config();
  c.data = "/nonexistent/unitygraph_data";
  EXPECT_EQ(kind_of([&] { load_scenes(c, "train"); }), ErrorKind::data_missing);
}

TEST(Checkpoint, RoundTripGivesBitIdenticalPredictions) {
  const auto dir = temp_dir("checkpoint");
  RunConfig c = tiny_config();
  c.epochs = 2;
  auto t = train<double>(c, load_scenes(c, "train"));
  write_training_outputs(dir, t);
  for (const char* f : {"checkpoint.ugck", "config.json", "loss_curve.json", "loss_curve.svg"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  auto snap = load_checkpoint<double>(dir / "checkpoint.ugck");
  EXPECT_EQ(snap.epoch, 2u);
  EXPECT_EQ(snap.optimizer.steps(), t.optimizer.steps());
  EXPECT_EQ(to_json(snap.model.config()), to_json(c));
  const auto scene = load_scenes(c, "test").front().frame_range(0, c.observed);
  EXPECT_EQ(snap.model.predict(scene).poses, t.model.predict(scene).poses);
  EXPECT_EQ(checkpoint_precision(dir / "checkpoint.ugck"), Precision::double_);
  EXPECT_EQ(kind_of([&] { load_checkpoint<float>(dir / "checkpoint.ugck"); }), ErrorKind::shape_incompatible_checkpoint);
}

TEST(Checkpoint, CorruptOrMismatchedFilesAreRejected) {
  const auto dir = temp_dir("checkpoint_bad");
  std::ofstream(dir / "junk.ugck") << "definitely not a checkpoint";
  EXPECT_EQ(kind_of([&] { load_checkpoint<double>(dir / "junk.ugck"); }), ErrorKind::malformed_file);
  EXPECT_EQ(kind_of([&] { load_checkpoint<double>(dir / "absent.ugck"); }), ErrorKind::data_missing);

  RunConfig c = tiny_config();
  Model<double> m(c);
  auto scenes = load_scenes(c, "test");
  RunConfig other = c;
  other.joints = 4;
  EXPECT_EQ(kind_of([&] { evaluate(m, load_scenes(other, "test")); }), ErrorKind::shape_incompatible_checkpoint);
  EXPECT_NO_THROW(evaluate(m, scenes));
}

TEST(Predict, OutputDirectoryRoundTrips) {
  const auto dir = temp_dir("predict");
  RunConfig c = tiny_config();
  c.persons = 3;
  c.future = 12;
  Model<double> m(c);
  const auto scene = load_scenes(c, "test").front();
  predict_to_directory(m, scene, dir);
  const auto pred = load_scene(dir / "prediction.json");
  EXPECT_EQ(pred.persons(), 3u);
  EXPECT_EQ(pred.frames(), c.future);
  for (const char* f : {"attention.json", "trace.json", "ppc.json", "skeleton.svg", "ppc.svg", "attention_layer0.svg"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto att = nlohmann::json::parse(read_text_file(dir / "attention.json"));
  for (const auto& layer : att["layers"])
    for (const auto& node : layer["beta"]) {
      double s = 0;
      for (const auto& e : node["edges"]) s += e["weight"].get<double>();
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  const auto trace = nlohmann::json::parse(read_text_file(dir / "trace.json"));
  EXPECT_EQ(trace["steps"].size(), c.future);
  EXPECT_EQ(kind_of([&] { predict_to_directory(m, scene.frame_range(0, 2), dir); }), ErrorKind::insufficient_frames);
}

TEST(Baseline, ConstantPosePredictionHasZeroErrorOnStaticScenes) {
  MotionSequence s(2, 10, standard_skeleton(3), 15.0);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t f = 0; f < 10; ++f)
      for (std::size_t j = 0; j < 3; ++j) s.at(n, f, j, 0) = static_cast<double>(n + j);
  const auto rep = evaluate_constant_pose({s}, 4, 6);
  EXPECT_TRUE(rep.mpjpe_mm.empty());  // 6 frames is under 1 s at 15 fps
  EXPECT_EQ(rep.vim_mm.at(100), 0.0);
}
