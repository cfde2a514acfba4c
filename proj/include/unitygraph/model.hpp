#pragma once

// Full predictor: root-normalise, encode poses, message passing over the
// hypergraph, interactive decoding, reconstruction readout and loss.
//
// Normalisation subtracts each person's root joint at the first observed
// frame from every joint of that person (observed and future). Predictions
// are returned in world coordinates by adding the offset back.

#include <random>
#include <string>
#include <vector>

#include "unitygraph/config.hpp"
#include "unitygraph/hypergraph.hpp"
#include "unitygraph/interactive_decoder.hpp"
#include "unitygraph/message_passing.hpp"
#include "unitygraph/motion.hpp"
#include "unitygraph/objectives_metrics.hpp"
#include "unitygraph/pose_encoder.hpp"

namespace unitygraph {

/// Per-person root offset [N, 3] taken from frame 0 of the observed window.
inline std::vector<std::array<double, 3>> root_offsets(const MotionSequence& observed) {
  std::vector<std::array<double, 3>> out(observed.persons());
  for (std::size_t n = 0; n < observed.persons(); ++n)
    for (std::size_t c = 0; c < 3; ++c) out[n][c] = observed.at(n, 0, 0, c);
  return out;
}

/// Person-major [N*F, 3J] matrix with the given per-person offsets removed.
template <class S>
Matrix<S> normalised_matrix(const MotionSequence& seq, const std::vector<std::array<double, 3>>& offsets) {
  Matrix<S> m(seq.persons() * seq.frames(), seq.joints() * 3);
  for (std::size_t n = 0; n < seq.persons(); ++n)
    for (std::size_t f = 0; f < seq.frames(); ++f)
      for (std::size_t j = 0; j < seq.joints(); ++j)
        for (std::size_t c = 0; c < 3; ++c)
          m(n * seq.frames() + f, 3 * j + c) = static_cast<S>(seq.at(n, f, j, c) - offsets[n][c]);
  return m;
}

template <class S>
MotionSequence denormalised_sequence(const Matrix<S>& m, std::size_t persons, const Skeleton& skeleton, double fps,
                                     const std::vector<std::array<double, 3>>& offsets) {
  MotionSequence seq = MotionSequence::from_matrix(m, persons, skeleton, fps);
  for (std::size_t n = 0; n < persons; ++n)
    for (std::size_t f = 0; f < seq.frames(); ++f)
      for (std::size_t j = 0; j < seq.joints(); ++j)
        for (std::size_t c = 0; c < 3; ++c) seq.at(n, f, j, c) += offsets[n][c];
  return seq;
}

template <class S>
class Model {
 public:
  /// Builds and Glorot-initialises all parameters from config.seed.
  explicit Model(const RunConfig& config) : config_(config), skeleton_(standard_skeleton(config.joints)) {
    config_.validate();
    build();
    initialise();
  }

  /// Builds the parameter layout for a given skeleton without initialising (checkpoint loading).
  Model(const RunConfig& config, Skeleton skeleton, bool initialise_params) : config_(config), skeleton_(std::move(skeleton)) {
    config_.validate();
    if (skeleton_.joint_count() != config_.joints) {
      throw Error(ErrorKind::shape_mismatch, "skeleton joint count disagrees with config");
    }
    build();
    if (initialise_params) initialise();
  }

  const RunConfig& config() const noexcept { return config_; }
  const Skeleton& skeleton() const noexcept { return skeleton_; }
  ParamStore<S>& params() noexcept { return store_; }
  const ParamStore<S>& params() const noexcept { return store_; }
  const PoseEncoder& encoder() const noexcept { return encoder_; }
  const MessagePassing& message_passing() const noexcept { return message_passing_; }
  const InteractiveDecoder& decoder() const noexcept { return decoder_; }
  const ReconstructionHead& reconstruction() const noexcept { return reconstruction_; }

  struct Forward {
    Var<S> nodes0;       // [N*T, D]
    Var<S> nodes;        // Z, [N*T, D]
    Var<S> poses;        // predicted future, normalised, [N*P, 3J]
    Var<S> reconstruction;
    std::vector<typename InteractiveDecoder::State<S>> states;
    std::vector<Var<S>> r_hat;
    std::vector<Var<S>> r;  // empty unless targets were given and the inference loss is on
    std::optional<LossVars<S>> loss;
    std::vector<std::array<double, 3>> offsets;
  };

  void check_scene(const MotionSequence& observed) const {
    observed.validate();
    if (!(observed.skeleton() == skeleton_)) {
      throw Error(ErrorKind::shape_incompatible_checkpoint, "scene skeleton differs from the model skeleton");
    }
    if (observed.frames() != config_.observed) {
      throw Error(ErrorKind::shape_incompatible_checkpoint,
                  "model expects " + std::to_string(config_.observed) + " observed frames, scene has " +
                      std::to_string(observed.frames()));
    }
  }

  /// Forward pass. With a future window the loss is attached as well.
  Forward forward(Tape<S>& tape, const MotionSequence& observed, const MotionSequence* future = nullptr,
                  std::vector<AttentionRecord>* records = nullptr, MessageStats* stats = nullptr,
                  std::size_t horizon = 0) {
    check_scene(observed);
    const std::size_t N = observed.persons(), T = observed.frames();
    const std::size_t P = future != nullptr ? future->frames() : (horizon != 0 ? horizon : config_.future);
    Forward fw;
    fw.offsets = root_offsets(observed);
    const Matrix<S> x_mat = normalised_matrix<S>(observed, fw.offsets);
    const Var<S> X = tape.constant(x_mat);

    fw.nodes0 = encoder_.encode(tape, store_, X, skeleton_);
    const HypergraphTopology topo(N, T);
    auto mp = message_passing_.run(tape, store_, topo, fw.nodes0, records, stats);
    fw.nodes = mp.nodes;

    std::vector<std::size_t> last(N);
    for (std::size_t n = 0; n < N; ++n) last[n] = n * T + T - 1;
    const Var<S> x_T = ad::gather_rows(X, make_index(std::move(last)));
    auto roll = decoder_.decode(tape, store_, fw.nodes, x_T, N, P);
    fw.poses = roll.poses;
    for (const auto& s : roll.states) fw.r_hat.push_back(s.r_hat);
    fw.states = std::move(roll.states);
    fw.reconstruction = reconstruction_(tape, store_, fw.nodes);

    if (future != nullptr) {
      if (future->persons() != N || !(future->skeleton() == skeleton_)) {
        throw Error(ErrorKind::shape_mismatch, "future window does not match the observed scene");
      }
      const Var<S> Y = tape.constant(normalised_matrix<S>(*future, fw.offsets));
      const LossWeights w = config_.loss_weights();
      if (config_.use_inference_loss) {
        fw.r = decoder_.teacher_forced_reasoning(tape, store_, fw.nodes, Y, N);
      } else {
        fw.r = fw.r_hat;  // zero inference term, weight is zero as well
      }
      fw.loss = loss_terms(fw.poses, Y, fw.reconstruction, X, fw.r_hat, fw.r, w);
    }
    return fw;
  }

  /// Loss of one scene split (no gradient).
  LossReport evaluate_loss(const MotionSequence& observed, const MotionSequence& future) {
    Tape<S> tape;
    auto fw = forward(tape, observed, &future);
    std::vector<Matrix<S>> r_hat, r;
    for (const auto& v : fw.r_hat) r_hat.push_back(v.value());
    for (const auto& v : fw.r) r.push_back(v.value());
    const auto offsets = fw.offsets;
    return loss(fw.poses.value(), normalised_matrix<S>(future, offsets), fw.reconstruction.value(),
                normalised_matrix<S>(observed, offsets), r_hat, r, config_.loss_weights());
  }

  struct Prediction {
    MotionSequence future;  // world coordinates, P frames
    Matrix<S> poses;        // normalised [N*P, 3J]
    std::vector<ReasoningState<S>> trace;
    std::vector<AttentionRecord> attention;
  };

  Prediction predict(const MotionSequence& observed, std::size_t horizon = 0) {
    Tape<S> tape;
    Prediction out;
    auto fw = forward(tape, observed, nullptr, &out.attention, nullptr, horizon);
    out.poses = fw.poses.value();
    for (const auto& s : fw.states) out.trace.push_back(InteractiveDecoder::snapshot(s));
    out.future = denormalised_sequence(out.poses, observed.persons(), skeleton_, observed.fps(), fw.offsets);
    return out;
  }

 private:
  void build() {
    encoder_ = PoseEncoder::create(store_, EncoderConfig{config_.hidden_dim, config_.attention_heads});
    message_passing_ = MessagePassing::create(store_, config_.message_passing());
    decoder_ = InteractiveDecoder::create(store_, DecoderConfig{config_.hidden_dim, config_.decoder_hidden, 3 * config_.joints});
    reconstruction_ = ReconstructionHead::create(store_, config_.hidden_dim, 3 * config_.joints);
  }

  /// Glorot weights, zero biases, and zero output weights on the residual
  /// branches (pose readout, interaction values): the untrained model
  /// repeats the last observed pose and has r = y.
  void initialise() {
    std::mt19937_64 rng(config_.seed);
    glorot_init(store_, rng);
    for (std::size_t idx : {decoder_.readout.weight, decoder_.first_relation.value.weight, decoder_.relation.value.weight})
      store_[idx].value.fill(S(0));
  }

  RunConfig config_;
  Skeleton skeleton_;
  ParamStore<S> store_;
  PoseEncoder encoder_;
  MessagePassing message_passing_;
  InteractiveDecoder decoder_;
  ReconstructionHead reconstruction_;
};

/// Parameter counts per top-level group (encoder, hypergraph, decoder, reconstruction).
template <class S>
std::vector<std::pair<std::string, std::size_t>> parameter_groups(const ParamStore<S>& store) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& p : store) {
    const std::string group = p.name.substr(0, p.name.find('.'));
    if (out.empty() || out.back().first != group) out.emplace_back(group, 0);
    out.back().second += p.value.size();
  }
  return out;
}

}  // namespace unitygraph
