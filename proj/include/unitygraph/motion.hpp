#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unitygraph/error.hpp"
#include "unitygraph/matrix.hpp"

namespace unitygraph {

/// Bone connectivity of a J-joint skeleton. Joint 0 is the root.
struct Skeleton {
  std::vector<std::string> joint_names;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t joint_count() const noexcept { return joint_names.size(); }

  void validate() const {
    const std::size_t J = joint_count();
    if (J == 0) throw Error(ErrorKind::malformed_file, "skeleton has no joints");
    std::vector<std::size_t> parent(J);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& [a, b] : edges) {
      if (a >= J || b >= J) throw Error(ErrorKind::malformed_file, "bone references a joint out of range");
      if (a == b) throw Error(ErrorKind::malformed_file, "self-loop bone");
      parent[find(a)] = find(b);
    }
    for (std::size_t j = 1; j < J; ++j)
      if (find(j) != find(0)) throw Error(ErrorKind::malformed_file, "skeleton is not connected");
  }

  /// Neighbour lists including each joint itself.
  std::vector<std::vector<std::size_t>> neighbourhoods() const {
    std::vector<std::vector<std::size_t>> out(joint_count());
    for (std::size_t j = 0; j < out.size(); ++j) out[j].push_back(j);
    for (const auto& [a, b] : edges) {
      out[a].push_back(b);
      out[b].push_back(a);
    }
    return out;
  }

  friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

namespace detail {

struct StandardJoint {
  const char* name;
  std::size_t parent;
  std::array<double, 3> offset;  // rest-pose offset from parent, body frame (x right, y forward, z up)
};

// Breadth-first order, so every prefix is a connected skeleton.
inline constexpr std::array<StandardJoint, 15> kStandardJoints{{
    {"pelvis", 0, {0.0, 0.0, 0.95}},
    {"thorax", 0, {0.0, 0.0, 0.45}},
    {"left_hip", 0, {-0.10, 0.0, -0.05}},
    {"right_hip", 0, {0.10, 0.0, -0.05}},
    {"head", 1, {0.0, 0.02, 0.25}},
    {"left_shoulder", 1, {-0.18, 0.0, -0.02}},
    {"right_shoulder", 1, {0.18, 0.0, -0.02}},
    {"left_knee", 2, {0.0, 0.0, -0.44}},
    {"right_knee", 3, {0.0, 0.0, -0.44}},
    {"left_elbow", 5, {0.0, 0.0, -0.28}},
    {"right_elbow", 6, {0.0, 0.0, -0.28}},
    {"left_ankle", 7, {0.0, 0.0, -0.42}},
    {"right_ankle", 8, {0.0, 0.0, -0.42}},
    {"left_wrist", 9, {0.0, 0.05, -0.25}},
    {"right_wrist", 10, {0.0, 0.05, -0.25}},
}};

}  // namespace detail

inline constexpr std::size_t kMaxStandardJoints = detail::kStandardJoints.size();

/// First J joints of the built-in 15-joint body skeleton.
inline Skeleton standard_skeleton(std::size_t J) {
  if (J == 0 || J > kMaxStandardJoints) {
    throw Error(ErrorKind::config_invalid, "standard skeleton supports 1..15 joints");
  }
  Skeleton s;
  for (std::size_t j = 0; j < J; ++j) {
    s.joint_names.emplace_back(detail::kStandardJoints[j].name);
    if (j > 0) s.edges.emplace_back(detail::kStandardJoints[j].parent, j);
  }
  return s;
}

/// Joint coordinates of N persons over a number of frames, in metres.
/// Layout is [person][frame][joint][xyz], row-major.
class MotionSequence {
 public:
  MotionSequence() = default;
  MotionSequence(std::size_t persons, std::size_t frames, Skeleton skeleton, double fps)
      : persons_(persons), frames_(frames), skeleton_(std::move(skeleton)), fps_(fps),
        positions_(persons * frames * skeleton_.joint_count() * 3, 0.0) {}
  MotionSequence(std::size_t persons, std::size_t frames, Skeleton skeleton, double fps,
                 std::vector<double> positions)
      : persons_(persons), frames_(frames), skeleton_(std::move(skeleton)), fps_(fps),
        positions_(std::move(positions)) {
    if (positions_.size() != persons_ * frames_ * skeleton_.joint_count() * 3) {
      throw Error(ErrorKind::shape_mismatch, "position buffer does not match [N, frames, J, 3]");
    }
  }

  std::size_t persons() const noexcept { return persons_; }
  std::size_t frames() const noexcept { return frames_; }
  std::size_t joints() const noexcept { return skeleton_.joint_count(); }
  double fps() const noexcept { return fps_; }
  const Skeleton& skeleton() const noexcept { return skeleton_; }
  const std::vector<double>& positions() const noexcept { return positions_; }

  double& at(std::size_t n, std::size_t f, std::size_t j, std::size_t c) {
    return positions_[index(n, f, j, c)];
  }
  double at(std::size_t n, std::size_t f, std::size_t j, std::size_t c) const {
    return positions_[index(n, f, j, c)];
  }

  /// The [J*3] pose of person n at frame f.
  std::span<const double> pose(std::size_t n, std::size_t f) const {
    return {positions_.data() + index(n, f, 0, 0), joints() * 3};
  }
  std::span<double> pose(std::size_t n, std::size_t f) {
    return {positions_.data() + index(n, f, 0, 0), joints() * 3};
  }

  void validate() const {
    if (persons_ == 0) throw Error(ErrorKind::shape_mismatch, "sequence has no persons");
    if (frames_ == 0) throw Error(ErrorKind::shape_mismatch, "sequence has no frames");
    if (!(fps_ > 0.0) || !std::isfinite(fps_)) throw Error(ErrorKind::malformed_file, "fps must be positive");
    skeleton_.validate();
    if (positions_.size() != persons_ * frames_ * joints() * 3) {
      throw Error(ErrorKind::shape_mismatch, "position buffer does not match [N, frames, J, 3]");
    }
    for (double v : positions_)
      if (!std::isfinite(v)) throw Error(ErrorKind::non_finite_value, "non-finite joint coordinate");
  }

  /// Copy of frames [begin, begin + count).
  MotionSequence frame_range(std::size_t begin, std::size_t count) const {
    if (begin + count > frames_) throw Error(ErrorKind::insufficient_frames, "frame range exceeds sequence");
    MotionSequence out(persons_, count, skeleton_, fps_);
    const std::size_t stride = joints() * 3;
    for (std::size_t n = 0; n < persons_; ++n)
      for (std::size_t f = 0; f < count; ++f)
        std::copy_n(positions_.data() + index(n, begin + f, 0, 0), stride, out.positions_.data() + out.index(n, f, 0, 0));
    return out;
  }

  /// Person-major matrix [N * frames, J * 3].
  template <class S>
  Matrix<S> as_matrix() const {
    Matrix<S> m(persons_ * frames_, joints() * 3);
    for (std::size_t i = 0; i < positions_.size(); ++i) m[i] = static_cast<S>(positions_[i]);
    return m;
  }

  template <class S>
  static MotionSequence from_matrix(const Matrix<S>& m, std::size_t persons, Skeleton skeleton, double fps) {
    const std::size_t J = skeleton.joint_count();
    if (persons == 0 || m.rows() % persons != 0 || m.cols() != J * 3) {
      throw Error(ErrorKind::shape_mismatch, "matrix does not describe [N * frames, J * 3]");
    }
    std::vector<double> pos(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) pos[i] = static_cast<double>(m[i]);
    return MotionSequence(persons, m.rows() / persons, std::move(skeleton), fps, std::move(pos));
  }

  friend bool operator==(const MotionSequence&, const MotionSequence&) = default;

 private:
  std::size_t index(std::size_t n, std::size_t f, std::size_t j, std::size_t c) const {
    return ((n * frames_ + f) * joints() + j) * 3 + c;
  }

  std::size_t persons_ = 0;
  std::size_t frames_ = 0;
  Skeleton skeleton_;
  double fps_ = 1.0;
  std::vector<double> positions_;
};

/// Observed window followed by the prediction window of one scene.
struct SceneSplit {
  MotionSequence observed;
  MotionSequence future;
};

inline SceneSplit split_scene(const MotionSequence& seq, std::size_t observed_frames, std::size_t future_frames) {
  if (observed_frames == 0 || future_frames == 0) {
    throw Error(ErrorKind::insufficient_frames, "observed and future windows must be non-empty");
  }
  if (seq.frames() < observed_frames + future_frames) {
    throw Error(ErrorKind::insufficient_frames,
                "scene has " + std::to_string(seq.frames()) + " frames, need " +
                    std::to_string(observed_frames + future_frames));
  }
  return {seq.frame_range(0, observed_frames), seq.frame_range(observed_frames, future_frames)};
}

/// Concatenates two sequences along time (same persons, skeleton and fps).
inline MotionSequence concat_frames(const MotionSequence& a, const MotionSequence& b) {
  if (a.persons() != b.persons() || !(a.skeleton() == b.skeleton()) || a.fps() != b.fps()) {
    throw Error(ErrorKind::shape_mismatch, "cannot concatenate sequences with different layouts");
  }
  MotionSequence out(a.persons(), a.frames() + b.frames(), a.skeleton(), a.fps());
  for (std::size_t n = 0; n < a.persons(); ++n) {
    for (std::size_t f = 0; f < a.frames(); ++f) std::ranges::copy(a.pose(n, f), out.pose(n, f).begin());
    for (std::size_t f = 0; f < b.frames(); ++f) std::ranges::copy(b.pose(n, f), out.pose(n, a.frames() + f).begin());
  }
  return out;
}

}  // namespace unitygraph
