#include <gtest/gtest.h>

#include <random>

#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/util.hpp"
#include "unitygraph/unitygraph.hpp"

using namespace unitygraph;

namespace {

struct Fixture {
  ParamStore<double> store;
  InteractiveDecoder dec;

  Fixture(std::size_t D, std::size_t H, std::size_t J, std::uint64_t seed, double scale = 0.5) {
    dec = InteractiveDecoder::create(store, DecoderConfig{D, H, 3 * J});
    std::mt19937_64 rng(seed);
    oracle::randomise(store, rng, scale);
  }
};

}  // namespace

TEST(InteractiveDecoder, SinglePersonRolloutMatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Fixture f(4, 6, 3, seed);
    std::mt19937_64 rng(seed + 50);
    const std::size_t T = 2 + seed % 4, P = 1 + seed % 6;
    const auto Z = oracle::random_matrix(T, 4, rng);
    const auto x = oracle::random_matrix(1, 9, rng);
    const auto out = f.dec.decode(f.store, Z, x, P);
    const auto ref = oracle::single_person_rollout(f.store, f.dec, oracle::to_rows(Z), oracle::to_rows(x)[0], P);
    ASSERT_EQ(out.poses.rows(), P);
    EXPECT_LE(oracle::max_abs_diff(oracle::to_rows(out.poses), ref), 1e-12) << "seed " << seed;
    for (const auto& s : out.trace) {
      EXPECT_EQ(s.r_hat, s.y_hat);
      EXPECT_EQ(s.interactions.rows(), 0u);
    }
  }
}

TEST(InteractiveDecoder, TeacherForcedReasoningIsTheTargetForOnePerson) {
  Fixture f(4, 5, 2, 1);
  std::mt19937_64 rng(2);
  const auto Z = oracle::random_matrix(3, 4, rng);
  const auto Y = oracle::random_matrix(4, 6, rng);
  const auto r = f.dec.teacher_forced_reasoning(f.store, Z, Y, 1);
  ASSERT_EQ(r.size(), 4u);
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(r[p](0, c), Y(p, c));
}

TEST(InteractiveDecoder, ShapesTraceAndRelationWeights) {
  Fixture f(4, 5, 3, 3, 1.5);
  std::mt19937_64 rng(4);
  const std::size_t N = 3, T = 4, P = 5;
  const auto out = f.dec.decode(f.store, oracle::random_matrix(N * T, 4, rng), oracle::random_matrix(N, 9, rng), P);
  EXPECT_EQ(out.poses.rows(), N * P);
  EXPECT_EQ(out.poses.cols(), 9u);
  ASSERT_EQ(out.trace.size(), P);
  for (std::size_t p = 0; p < P; ++p) {
    const auto& s = out.trace[p];
    EXPECT_EQ(s.step, p + 1);
    ASSERT_EQ(s.weights.rows(), N * (N - 1));
    for (std::size_t n = 0; n < N; ++n) {
      double sum = 0;
      for (std::size_t k = 0; k < N - 1; ++k) sum += s.weights(n * (N - 1) + k, 0);
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    // r = y + sum of interactions for each person.
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < 9; ++c) {
        double expect = s.y_hat(n, c);
        for (std::size_t k = 0; k < N - 1; ++k) expect += s.interactions(n * (N - 1) + k, c);
        EXPECT_NEAR(s.r_hat(n, c), expect, 1e-12);
      }
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < 9; ++c) EXPECT_EQ(out.poses(n * P + p, c), s.y_hat(n, c));
  }
}

TEST(InteractiveDecoder, ZeroReadoutRepeatsTheLastObservedPose) {
  Fixture f(4, 5, 2, 5);
  f.store[f.dec.readout.weight].value.fill(0);
  f.store[f.dec.readout.bias].value.fill(0);
  std::mt19937_64 rng(6);
  const auto x = oracle::random_matrix(2, 6, rng);
  const auto out = f.dec.decode(f.store, oracle::random_matrix(6, 4, rng), x, 4);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(out.poses(n * 4 + p, c), x(n, c));
}

TEST(InteractiveDecoder, HorizonAndStepErrors) {
  Fixture f(4, 5, 2, 7);
  std::mt19937_64 rng(8);
  const auto Z = oracle::random_matrix(4, 4, rng);
  const auto x = oracle::random_matrix(2, 6, rng);
  EXPECT_EQ(testutil::kind_of([&] { f.dec.decode(f.store, Z, x, 0); }), ErrorKind::horizon_out_of_range);
  Tape<double> tape;
  auto s = f.dec.first_step(tape, f.store, tape.constant(Z), tape.constant(x), 2, 2);
  s = f.dec.step(tape, f.store, s);
  EXPECT_EQ(testutil::kind_of([&] { f.dec.step(tape, f.store, s); }), ErrorKind::step_overflow);
  EXPECT_EQ(testutil::kind_of([&] { f.dec.decode(f.store, Z, oracle::random_matrix(3, 6, rng), 2); }),
            ErrorKind::shape_mismatch);
  ParamStore<double> store;
  EXPECT_EQ(testutil::kind_of([&] { InteractiveDecoder::create(store, DecoderConfig{4, 5, 7}); }), ErrorKind::config_invalid);
}

TEST(InteractiveDecoder, PersonPermutationEquivariance) {
  Fixture f(4, 5, 2, 9, 1.0);
  std::mt19937_64 rng(10);
  const std::size_t N = 3, T = 3, P = 4;
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto Z = oracle::random_matrix(N * T, 4, rng);
  const auto x = oracle::random_matrix(N, 6, rng);
  Matrix<double> Zp(N * T, 4), xp(N, 6);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < 4; ++c) Zp(n * T + t, c) = Z(perm[n] * T + t, c);
    for (std::size_t c = 0; c < 6; ++c) xp(n, c) = x(perm[n], c);
  }
  const auto a = f.dec.decode(f.store, Z, x, P).poses;
  const auto b = f.dec.decode(f.store, Zp, xp, P).poses;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(b(n * P + p, c), a(perm[n] * P + p, c), 1e-12);
}

TEST(InteractiveDecoder, GradientsMatchFiniteDifferences) {
  Fixture f(3, 4, 2, 11, 0.6);
  std::mt19937_64 rng(12);
  const std::size_t N = 3, T = 3, P = 3;
  const auto Z = oracle::random_matrix(N * T, 3, rng);
  const auto x = oracle::random_matrix(N, 6, rng);
  const auto w = oracle::random_matrix(N * P, 6, rng);
  const auto wr = oracle::random_matrix(N, 6, rng);
  const auto stats = gradcheck::parameters(
      f.store,
      [&](Tape<double>& tape) {
        const auto roll = f.dec.decode(tape, f.store, tape.constant(Z), tape.constant(x), N, P);
        return ad::add(ad::sum(ad::hadamard(roll.poses, tape.constant(w))),
                       ad::sum(ad::hadamard(roll.states.back().r_hat, tape.constant(wr))));
      },
      [](const std::string& name) { return name; });
  for (const auto& [name, s] : stats) EXPECT_LE(s.max_rel, 1e-4) << name;
}

TEST(InteractiveDecoder, NodeEmbeddingGradientMatchesFiniteDifferences) {
  Fixture f(3, 4, 2, 13, 0.6);
  std::mt19937_64 rng(14);
  const auto x = oracle::random_matrix(2, 6, rng);
  const auto w = oracle::random_matrix(6, 6, rng);
  const auto s = gradcheck::input(oracle::random_matrix(6, 3, rng), [&](Tape<double>& tape, Var<double> Z) {
    return ad::sum(ad::hadamard(f.dec.decode(tape, f.store, Z, tape.constant(x), 2, 3).poses, tape.constant(w)));
  });
  EXPECT_LE(s.max_rel, 1e-4);
}

TEST(InteractiveDecoder, TraceJsonHasOnePairListPerStep) {
  Fixture f(4, 5, 2, 15);
  std::mt19937_64 rng(16);
  const auto out = f.dec.decode(f.store, oracle::random_matrix(6, 4, rng), oracle::random_matrix(2, 6, rng), 3);
  const auto doc = trace_to_json(out.trace, 3);
  ASSERT_EQ(doc["steps"].size(), 3u);
  EXPECT_EQ(doc["steps"][0]["frame"], 4);
  EXPECT_EQ(doc["steps"][2]["pairs"].size(), 2u);
  EXPECT_NEAR(doc["steps"][1]["pairs"][0]["weight"].get<double>(), 1.0, 1e-12);
}
