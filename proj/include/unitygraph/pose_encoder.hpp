#pragma once

// Per-frame pose encoder: multi-head attention over the skeleton graph
// (each joint attends to its bone neighbours and itself), a per-joint ReLU
// layer, mean pooling over joints and a linear output projection.
//
//   v_j  = x_j Wv,  q_j = x_j Wq,  k_j = x_j Wk        (per head block)
//   a_j  = sum_{i in nb(j)} softmax_i(q_j . k_i / sqrt(d_head)) v_i
//   g    = mean_j ReLU(a_j W1 + b1) W2 + b2

#include <cmath>
#include <string>
#include <vector>

#include "unitygraph/autodiff.hpp"
#include "unitygraph/layers.hpp"
#include "unitygraph/motion.hpp"

namespace unitygraph {

struct EncoderConfig {
  std::size_t hidden_dim = 64;
  std::size_t heads = 4;

  void validate() const {
    if (hidden_dim == 0 || heads == 0 || hidden_dim % heads != 0) {
      throw Error(ErrorKind::config_invalid, "encoder hidden_dim must be a positive multiple of attention_heads");
    }
  }
};

/// Joint-attention indices for a batch of poses sharing one skeleton.
struct JointGraph {
  std::size_t poses = 0;
  std::size_t joints = 0;
  Index query_rows;  // destination joint of every (joint, neighbour) pair
  Index key_rows;    // source joint
  Index pose_of_joint;

  JointGraph(const Skeleton& skeleton, std::size_t pose_count) : poses(pose_count), joints(skeleton.joint_count()) {
    const auto nb = skeleton.neighbourhoods();
    std::vector<std::size_t> q, k, owner;
    for (std::size_t p = 0; p < poses; ++p) {
      for (std::size_t j = 0; j < joints; ++j) {
        owner.push_back(p);
        for (std::size_t i : nb[j]) {
          q.push_back(p * joints + j);
          k.push_back(p * joints + i);
        }
      }
    }
    query_rows = make_index(std::move(q));
    key_rows = make_index(std::move(k));
    pose_of_joint = make_index(std::move(owner));
  }
};

struct PoseEncoder {
  EncoderConfig config;
  Linear query, key, value;  // 3 -> D, no bias
  Linear joint_ff;           // D -> D, per joint
  Linear output;             // D -> D after pooling

  template <class S>
  static PoseEncoder create(ParamStore<S>& store, const EncoderConfig& cfg, const std::string& prefix = "encoder") {
    cfg.validate();
    const std::size_t D = cfg.hidden_dim;
    PoseEncoder e;
    e.config = cfg;
    e.query = Linear::create(store, prefix + ".query", 3, D, false);
    e.key = Linear::create(store, prefix + ".key", 3, D, false);
    e.value = Linear::create(store, prefix + ".value", 3, D, false);
    e.joint_ff = Linear::create(store, prefix + ".joint_ff", D, D);
    e.output = Linear::create(store, prefix + ".output", D, D);
    return e;
  }

  /// poses: [M, J*3] -> node embeddings [M, D]. Rows never mix.
  template <class S>
  Var<S> encode(Tape<S>& tape, ParamStore<S>& store, Var<S> poses, const Skeleton& skeleton) const {
    const std::size_t J = skeleton.joint_count();
    if (poses.cols() != J * 3) throw Error(ErrorKind::shape_mismatch, "pose width does not match skeleton J*3");
    const JointGraph graph(skeleton, poses.rows());
    const std::size_t heads = config.heads;
    const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(config.hidden_dim / heads));

    Var<S> joints = ad::reshape(poses, poses.rows() * J, 3);
    Var<S> q = query(tape, store, joints);
    Var<S> k = key(tape, store, joints);
    Var<S> v = value(tape, store, joints);

    Var<S> scores = ad::scale(ad::rowdot_heads(ad::gather_rows(q, graph.query_rows), ad::gather_rows(k, graph.key_rows), heads), inv_sqrt);
    scores = ad::clamp(scores, S(-kLogitClamp), S(kLogitClamp));
    Var<S> weights = ad::segment_softmax(scores, graph.query_rows, joints.rows());
    Var<S> attended = ad::segment_sum(ad::scale_heads(ad::gather_rows(v, graph.key_rows), weights), graph.query_rows, joints.rows());

    Var<S> per_joint = ad::relu(joint_ff(tape, store, attended));
    Var<S> pooled = ad::segment_mean(per_joint, graph.pose_of_joint, poses.rows());
    return output(tape, store, pooled);
  }
};

/// Encodes one pose ([J, 3] or [1, J*3]) to a [1, D] embedding.
template <class S>
Matrix<S> encode_pose(const Matrix<S>& pose, const Skeleton& skeleton, const PoseEncoder& encoder, ParamStore<S>& store) {
  if (pose.size() != skeleton.joint_count() * 3) throw Error(ErrorKind::shape_mismatch, "pose does not match skeleton");
  Tape<S> tape;
  auto x = tape.constant(pose.reshaped(1, pose.size()));
  return encoder.encode(tape, store, x, skeleton).value();
}

/// Encodes every (person, frame) of a sequence: [N*T, D], row n*T + t.
template <class S>
Matrix<S> encode_scene(const MotionSequence& observed, const PoseEncoder& encoder, ParamStore<S>& store) {
  observed.validate();
  Tape<S> tape;
  auto x = tape.constant(observed.as_matrix<S>());
  return encoder.encode(tape, store, x, observed.skeleton()).value();
}

}  // namespace unitygraph
