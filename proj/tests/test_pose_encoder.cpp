#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/util.hpp"
#include "unitygraph/unitygraph.hpp"

using namespace unitygraph;

namespace {

struct Fixture {
  ParamStore<double> store;
  PoseEncoder enc;

  Fixture(std::size_t D, std::size_t heads, std::uint64_t seed) {
    enc = PoseEncoder::create(store, EncoderConfig{D, heads});
    std::mt19937_64 rng(seed);
    oracle::randomise(store, rng, 0.8);
  }
};

Matrix<double> random_pose(std::size_t J, std::mt19937_64& rng) { return oracle::random_matrix(1, 3 * J, rng); }

}  // namespace

TEST(PoseEncoder, ZeroOutputLayerGivesZeroEmbedding) {
  Fixture f(8, 2, 1);
  f.store[f.enc.output.weight].value.fill(0);
  f.store[f.enc.output.bias].value.fill(0);
  std::mt19937_64 rng(2);
  const auto g = encode_pose(random_pose(5, rng), standard_skeleton(5), f.enc, f.store);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], 0.0);
}

TEST(PoseEncoder, SingleJointMatchesHandComputedValue) {
  // D = 2, one head. With one joint the attention weight is exactly 1, so
  // g = ReLU(x Wv W1 + b1) W2 + b2 and the query/key weights are irrelevant.
  ParamStore<double> store;
  const auto enc = PoseEncoder::create(store, EncoderConfig{2, 1});
  std::mt19937_64 rng(3);
  oracle::randomise(store, rng, 1.0);
  store[enc.value.weight].value = Matrix<double>(3, 2, {1, 0, 0, 1, 1, -1});
  store[enc.joint_ff.weight].value = Matrix<double>(2, 2, {1, 2, 0, 1});
  store[enc.joint_ff.bias].value = Matrix<double>(1, 2, {0, -1});
  store[enc.output.weight].value = Matrix<double>(2, 2, {0.5, 0, 0, -1});
  store[enc.output.bias].value = Matrix<double>(1, 2, {1, 1});
  // x Wv = (4, -1); + FF: (4, 6); output: (3, -5)
  const auto g = encode_pose(Matrix<double>(1, 3, {1, 2, 3}), standard_skeleton(1), enc, store);
  EXPECT_DOUBLE_EQ(g(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(g(0, 1), -5.0);
}

TEST(PoseEncoder, MatchesLoopOracleOnRandomSkeletonPoses) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t J = 1 + seed % kMaxStandardJoints;
    Fixture f(8, seed % 2 == 0 ? 4 : 2, seed);
    std::mt19937_64 rng(seed + 100);
    const auto pose = random_pose(J, rng);
    const auto sk = standard_skeleton(J);
    const auto g = encode_pose(pose, sk, f.enc, f.store);
    const auto ref = oracle::encode_pose(f.store, f.enc, sk, oracle::to_rows(pose)[0]);
    for (std::size_t c = 0; c < ref.size(); ++c) EXPECT_NEAR(g(0, c), ref[c], 1e-12);
  }
}

TEST(PoseEncoder, JointRelabelingLeavesEmbeddingUnchanged) {
  Fixture f(8, 4, 4);
  const std::size_t J = 8;
  const auto sk = standard_skeleton(J);
  std::mt19937_64 rng(5);
  const auto pose = random_pose(J, rng);
  std::vector<std::size_t> perm(J);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  Skeleton relabelled;
  relabelled.joint_names.resize(J);
  for (std::size_t j = 0; j < J; ++j) relabelled.joint_names[perm[j]] = sk.joint_names[j];
  for (const auto& [a, b] : sk.edges) relabelled.edges.emplace_back(perm[a], perm[b]);
  Matrix<double> moved(1, 3 * J);
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t c = 0; c < 3; ++c) moved(0, 3 * perm[j] + c) = pose(0, 3 * j + c);

  const auto a = encode_pose(pose, sk, f.enc, f.store);
  const auto b = encode_pose(moved, relabelled, f.enc, f.store);
  for (std::size_t c = 0; c < a.size(); ++c) EXPECT_NEAR(a[c], b[c], 1e-12);
}

TEST(PoseEncoder, SceneGridShapeAndPerPersonIndependence) {
  Fixture f(8, 2, 6);
  MotionSequence seq(2, 3, standard_skeleton(4), 15.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t f0 = 0; f0 < 3; ++f0)
    for (std::size_t i = 0; i < 12; ++i) seq.pose(0, f0)[i] = seq.pose(1, f0)[i] = u(rng);
  const auto grid = encode_scene(seq, f.enc, f.store);
  ASSERT_EQ(grid.rows(), 6u);
  ASSERT_EQ(grid.cols(), 8u);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(grid(t, c), grid(3 + t, c));
}

TEST(PoseEncoder, PerturbingOnePoseChangesOnlyItsRow) {
  Fixture f(8, 2, 8);
  SyntheticSceneConfig sc;
  sc.persons = 2;
  sc.observed = 3;
  sc.future = 1;
  sc.joints = 5;
  const auto seq = generate_synthetic(sc).frame_range(0, 3);
  const auto base = encode_scene(seq, f.enc, f.store);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t t = 0; t < 3; ++t) {
      auto moved = seq;
      moved.at(n, t, 2, 1) += 1e-3;
      const auto g = encode_scene(moved, f.enc, f.store);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        bool changed = false;
        for (std::size_t c = 0; c < g.cols(); ++c) changed = changed || g(r, c) != base(r, c);
        EXPECT_EQ(changed, r == n * 3 + t) << "row " << r;
      }
    }
}

TEST(PoseEncoder, GradientWithRespectToPoseMatchesFiniteDifferences) {
  Fixture f(8, 4, 9);
  const auto sk = standard_skeleton(6);
  std::mt19937_64 rng(10);
  const auto pose = oracle::random_matrix(3, 18, rng);
  const auto weights = oracle::random_matrix(3, 8, rng);
  const auto s = gradcheck::input(pose, [&](Tape<double>& tape, Var<double> x) {
    return ad::sum(ad::hadamard(f.enc.encode(tape, f.store, x, sk), tape.constant(weights)));
  });
  EXPECT_LE(s.max_rel, 1e-4);
}

TEST(PoseEncoder, GradientWithRespectToParametersMatchesFiniteDifferences) {
  Fixture f(8, 2, 11);
  const auto sk = standard_skeleton(5);
  std::mt19937_64 rng(12);
  const auto pose = oracle::random_matrix(4, 15, rng);
  const auto weights = oracle::random_matrix(4, 8, rng);
  const auto stats = gradcheck::parameters(
      f.store,
      [&](Tape<double>& tape) {
        return ad::sum(ad::hadamard(f.enc.encode(tape, f.store, tape.constant(pose), sk), tape.constant(weights)));
      },
      [](const std::string& name) { return name; });
  for (const auto& [name, s] : stats) EXPECT_LE(s.max_rel, 1e-4) << name;
}

TEST(PoseEncoder, RejectsBadShapesAndHeadCounts) {
  Fixture f(8, 2, 13);
  EXPECT_EQ(testutil::kind_of([&] { encode_pose(Matrix<double>(1, 9), standard_skeleton(4), f.enc, f.store); }),
            ErrorKind::shape_mismatch);
  ParamStore<double> store;
  EXPECT_EQ(testutil::kind_of([&] { PoseEncoder::create(store, EncoderConfig{10, 4}); }), ErrorKind::config_invalid);
}
