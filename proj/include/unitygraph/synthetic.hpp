#pragma once

// Deterministic synthetic multi-person motion. Root trajectories come from a
// social-force integrator on the ground plane; limbs follow gait-phase
// oscillators whose phases entrain when people are close. Every cross-person
// term is scaled by `coupling`, so coupling = 0 makes people independent.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitygraph/error.hpp"
#include "unitygraph/motion.hpp"

namespace unitygraph {

enum class MotionStyle { walk, approach, stop_and_talk, group_walk };

inline std::string to_string(MotionStyle s) {
  switch (s) {
    case MotionStyle::walk: return "walk";
    case MotionStyle::approach: return "approach";
    case MotionStyle::stop_and_talk: return "stop_and_talk";
    case MotionStyle::group_walk: return "group_walk";
  }
  return "walk";
}

inline MotionStyle style_from_string(const std::string& s) {
  if (s == "walk") return MotionStyle::walk;
  if (s == "approach") return MotionStyle::approach;
  if (s == "stop_and_talk") return MotionStyle::stop_and_talk;
  if (s == "group_walk") return MotionStyle::group_walk;
  throw Error(ErrorKind::config_invalid, "unknown motion style " + s);
}

struct SyntheticSceneConfig {
  std::size_t persons = 3;
  std::size_t observed = 15;
  std::size_t future = 45;
  std::size_t joints = 15;
  std::uint64_t seed = 0;
  double coupling = 0.5;
  double arena_radius = 6.0;
  double fps = 15.0;
  /// Person n moves in style motion_styles[n % size].
  std::vector<MotionStyle> motion_styles{MotionStyle::walk};

  std::size_t frames() const noexcept { return observed + future; }

  void validate() const {
    auto bad = [](const std::string& what) { return Error(ErrorKind::config_invalid, what); };
    if (persons < 1) throw bad("persons must be >= 1");
    if (observed < 2) throw bad("observed window must be >= 2 frames");
    if (future < 1) throw bad("future window must be >= 1 frame");
    if (joints < 1 || joints > kMaxStandardJoints) throw bad("joints must be in [1, 15]");
    if (!(coupling >= 0.0 && coupling <= 1.0)) throw bad("coupling must be in [0, 1]");
    if (!(arena_radius >= 1.0)) throw bad("arena_radius must be >= 1 m");
    if (!(fps > 0.0)) throw bad("fps must be positive");
    if (motion_styles.empty()) throw bad("motion_styles must not be empty");
  }

  MotionStyle style_of(std::size_t n) const { return motion_styles[n % motion_styles.size()]; }
};

inline void to_json(nlohmann::json& j, const SyntheticSceneConfig& c) {
  std::vector<std::string> styles;
  for (auto s : c.motion_styles) styles.push_back(to_string(s));
  j = nlohmann::json{{"persons", c.persons}, {"T", c.observed},     {"P", c.future},
                     {"J", c.joints},        {"seed", c.seed},      {"coupling", c.coupling},
                     {"arena_radius", c.arena_radius}, {"fps", c.fps}, {"motion_styles", styles}};
}

inline void from_json(const nlohmann::json& j, SyntheticSceneConfig& c) {
  try {
    c.persons = j.value("persons", c.persons);
    c.observed = j.value("T", c.observed);
    c.future = j.value("P", c.future);
    c.joints = j.value("J", c.joints);
    c.seed = j.value("seed", c.seed);
    c.coupling = j.value("coupling", c.coupling);
    c.arena_radius = j.value("arena_radius", c.arena_radius);
    c.fps = j.value("fps", c.fps);
    if (j.contains("motion_styles")) {
      c.motion_styles.clear();
      for (const auto& s : j["motion_styles"]) c.motion_styles.push_back(style_from_string(s.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config_invalid, std::string("synthetic config: ") + e.what());
  }
}

namespace detail {

struct Vec2 {
  double x = 0, y = 0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 normalized(Vec2 v) {
  const double n = v.norm();
  return n > 1e-9 ? v * (1.0 / n) : Vec2{0, 0};
}

struct Walker {
  std::mt19937_64 rng;
  MotionStyle style = MotionStyle::walk;
  Vec2 pos, vel, goal;
  double heading = 0;
  double phase = 0;
  double gait_hz = 1.0;
  double speed = 1.2;
  double stop_time = 0;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  // Explicit mapping keeps the stream identical across standard libraries.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

inline Vec2 random_point_in_disc(std::mt19937_64& rng, double radius) {
  const double r = radius * std::sqrt(uniform(rng, 0.0, 1.0));
  const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  return {r * std::cos(a), r * std::sin(a)};
}

// Rotation about the body-frame lateral (x) axis.
inline std::array<double, 3> pitch(const std::array<double, 3>& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {v[0], v[1] * c - v[2] * s, v[1] * s + v[2] * c};
}

inline std::array<double, 3> operator+(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

// Joint positions in the body frame (x right, y forward, z up), origin on the floor under the pelvis.
inline std::array<std::array<double, 3>, kMaxStandardJoints> body_pose(double phase, double gait, double idle) {
  const auto& J = kStandardJoints;
  std::array<std::array<double, 3>, kMaxStandardJoints> p{};
  const double s = std::sin(phase);
  const double bob = 0.025 * gait * std::sin(2.0 * phase);
  const double hip_l = 0.45 * gait * s, hip_r = -hip_l;
  const double knee_l = -0.7 * gait * std::max(0.0, std::sin(phase - 0.6 * std::numbers::pi));
  const double knee_r = -0.7 * gait * std::max(0.0, std::sin(phase + 0.4 * std::numbers::pi));
  const double arm_l = -0.35 * gait * s + 0.25 * idle * std::sin(phase);
  const double arm_r = 0.35 * gait * s + 0.25 * idle * std::sin(phase + 0.5);
  const double elbow_l = 0.3 + 0.2 * gait * std::max(0.0, -s) + 0.6 * idle * (0.5 + 0.5 * std::sin(phase));
  const double elbow_r = 0.3 + 0.2 * gait * std::max(0.0, s) + 0.6 * idle * (0.5 + 0.5 * std::sin(phase + 0.5));
  const double lean = 0.05 * gait + 0.03 * idle * std::sin(phase);

  p[0] = {0.0, 0.0, J[0].offset[2] + bob};
  p[1] = p[0] + pitch(J[1].offset, lean);
  p[2] = p[0] + J[2].offset;
  p[3] = p[0] + J[3].offset;
  p[4] = p[1] + pitch(J[4].offset, lean);
  p[5] = p[1] + J[5].offset;
  p[6] = p[1] + J[6].offset;
  p[7] = p[2] + pitch(J[7].offset, hip_l);
  p[8] = p[3] + pitch(J[8].offset, hip_r);
  p[9] = p[5] + pitch(J[9].offset, arm_l);
  p[10] = p[6] + pitch(J[10].offset, arm_r);
  p[11] = p[7] + pitch(J[11].offset, hip_l + knee_l);
  p[12] = p[8] + pitch(J[12].offset, hip_r + knee_r);
  p[13] = p[9] + pitch(J[13].offset, arm_l + elbow_l);
  p[14] = p[10] + pitch(J[14].offset, arm_r + elbow_r);
  return p;
}

}  // namespace detail

/// Generates T + P frames for the configured scene. Pure function of config.
inline MotionSequence generate_synthetic(const SyntheticSceneConfig& config) {
  using detail::Vec2;
  config.validate();
  const std::size_t N = config.persons;
  const double c = config.coupling;
  const double walk_radius = config.arena_radius - 0.7;
  constexpr int kSubsteps = 4;
  const double dt = 1.0 / (config.fps * kSubsteps);
  const double duration = static_cast<double>(config.frames()) / config.fps;
  constexpr double kTau = 0.5;
  constexpr double kMaxSpeed = 2.0;

  std::vector<detail::Walker> people(N);
  for (std::size_t n = 0; n < N; ++n) {
    auto& w = people[n];
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(config.seed >> 32), static_cast<std::uint32_t>(n), 0x5eedu};
    w.rng.seed(seq);
    w.style = config.style_of(n);
    w.pos = detail::random_point_in_disc(w.rng, 0.8 * walk_radius);
    w.goal = detail::random_point_in_disc(w.rng, 0.8 * walk_radius);
    w.speed = detail::uniform(w.rng, 1.0, 1.4);
    w.gait_hz = detail::uniform(w.rng, 0.85, 0.95);
    w.phase = detail::uniform(w.rng, 0.0, 2.0 * std::numbers::pi);
    w.stop_time = duration * detail::uniform(w.rng, 0.2, 0.5);
    w.vel = detail::normalized(w.goal - w.pos) * w.speed;
    w.heading = std::atan2(w.vel.y, w.vel.x);
  }

  auto target_of = [N](std::size_t n) { return n == 0 ? std::size_t{1} : std::size_t{0}; };

  MotionSequence out(N, config.frames(), standard_skeleton(config.joints), config.fps);
  double time = 0.0;

  auto record = [&](std::size_t frame) {
    for (std::size_t n = 0; n < N; ++n) {
      const auto& w = people[n];
      const double gait = std::clamp(w.vel.norm() / 1.2, 0.0, 1.0);
      const auto body = detail::body_pose(w.phase, gait, 1.0 - gait);
      const Vec2 fwd{std::cos(w.heading), std::sin(w.heading)};
      const Vec2 right{fwd.y, -fwd.x};
      for (std::size_t j = 0; j < config.joints; ++j) {
        const Vec2 xy = w.pos + right * body[j][0] + fwd * body[j][1];
        out.at(n, frame, j, 0) = xy.x;
        out.at(n, frame, j, 1) = xy.y;
        out.at(n, frame, j, 2) = body[j][2];
      }
    }
  };

  record(0);
  for (std::size_t frame = 1; frame < config.frames(); ++frame) {
    for (int sub = 0; sub < kSubsteps; ++sub) {
      time += dt;
      std::vector<Vec2> accel(N);
      std::vector<double> dphase(N);
      for (std::size_t n = 0; n < N; ++n) {
        auto& w = people[n];
        if ((w.goal - w.pos).norm() < 0.5) w.goal = detail::random_point_in_disc(w.rng, 0.8 * walk_radius);
        const Vec2 to_goal = detail::normalized(w.goal - w.pos);
        Vec2 desired = to_goal * w.speed;

        switch (w.style) {
          case MotionStyle::walk:
            break;
          case MotionStyle::approach:
            if (N > 1) {
              const auto& o = people[target_of(n)];
              const Vec2 gap = o.pos - w.pos;
              const double closeness = std::clamp((gap.norm() - 0.9) / 0.6, 0.0, 1.0);
              const Vec2 dir = detail::normalized(to_goal * (1.0 - c) + detail::normalized(gap) * c);
              const double speed = w.speed * (1.0 + 0.4 * c) * (1.0 + c * (closeness - 1.0));
              desired = dir * speed + o.vel * (c * (1.0 - closeness));
            }
            break;
          case MotionStyle::stop_and_talk:
            if (time > w.stop_time) desired = Vec2{0, 0};
            break;
          case MotionStyle::group_walk:
            if (N > 1) {
              Vec2 mean_vel, centroid;
              for (std::size_t m = 0; m < N; ++m) {
                if (m == n) continue;
                mean_vel = mean_vel + people[m].vel;
                centroid = centroid + people[m].pos;
              }
              const double inv = 1.0 / static_cast<double>(N - 1);
              const Vec2 cohesion = (centroid * inv - w.pos) * 0.3;
              desired = desired * (1.0 - c) + (mean_vel * inv + cohesion) * c;
            }
            break;
        }

        Vec2 force = (desired - w.vel) * (1.0 / kTau);
        double coupling_phase = 0.0;
        for (std::size_t m = 0; m < N; ++m) {
          if (m == n) continue;
          const Vec2 gap = w.pos - people[m].pos;
          const double d = std::max(gap.norm(), 1e-6);
          force = force + detail::normalized(gap) * (c * 2.0 * std::exp((0.6 - d) / 0.3));
          coupling_phase += c * 6.0 * std::exp(-d / 1.5) * std::sin(people[m].phase - w.phase);
        }
        const double r = w.pos.norm();
        if (r > walk_radius - 1.0) force = force - detail::normalized(w.pos) * (4.0 * (r - (walk_radius - 1.0)));
        accel[n] = force;
        dphase[n] = 2.0 * std::numbers::pi * w.gait_hz + coupling_phase;
      }
      for (std::size_t n = 0; n < N; ++n) {
        auto& w = people[n];
        w.vel = w.vel + accel[n] * dt;
        const double sp = w.vel.norm();
        if (sp > kMaxSpeed) w.vel = w.vel * (kMaxSpeed / sp);
        w.pos = w.pos + w.vel * dt;
        const double r = w.pos.norm();
        if (r > walk_radius) {
          const Vec2 radial = w.pos * (1.0 / r);
          w.pos = radial * walk_radius;
          const double outward = w.vel.x * radial.x + w.vel.y * radial.y;
          if (outward > 0) w.vel = w.vel - radial * outward;
        }
        if (w.vel.norm() > 0.2) {
          const double target = std::atan2(w.vel.y, w.vel.x);
          double delta = std::remainder(target - w.heading, 2.0 * std::numbers::pi);
          w.heading += std::clamp(delta, -4.0 * dt, 4.0 * dt);
        }
        w.phase = std::fmod(w.phase + dphase[n] * dt, 2.0 * std::numbers::pi);
      }
    }
    record(frame);
  }
  return out;
}

}  // namespace unitygraph
