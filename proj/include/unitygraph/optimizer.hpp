#pragma once

// Adam with decoupled weight decay. Biases are not decayed.

#include <cmath>
#include <cstdint>
#include <vector>

#include "unitygraph/autodiff.hpp"

namespace unitygraph {

struct AdamWSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

/// Step-decay schedule: lr * decay^floor(epoch / every).
inline double scheduled_learning_rate(double base, double decay, std::size_t every, std::size_t epoch) {
  return base * std::pow(decay, static_cast<double>(epoch / every));
}

template <class S>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParamStore<S>& store, AdamWSettings settings) : settings_(settings) {
    for (const auto& p : store) {
      m_.emplace_back(p.value.rows(), p.value.cols());
      v_.emplace_back(p.value.rows(), p.value.cols());
    }
  }

  std::uint64_t steps() const noexcept { return step_; }
  const AdamWSettings& settings() const noexcept { return settings_; }
  std::vector<Matrix<S>>& first_moments() noexcept { return m_; }
  std::vector<Matrix<S>>& second_moments() noexcept { return v_; }
  const std::vector<Matrix<S>>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix<S>>& second_moments() const noexcept { return v_; }
  void set_steps(std::uint64_t s) noexcept { step_ = s; }

  /// Applies one update from store.grad with the given learning rate.
  void step(ParamStore<S>& store, double lr) {
    if (m_.size() != store.size()) throw Error(ErrorKind::shape_incompatible_checkpoint, "optimiser state size");
    ++step_;
    const double b1 = settings_.beta1, b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t k = 0; k < store.size(); ++k) {
      auto& p = store[k];
      const bool decay = !(p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0);
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        const double m = b1 * static_cast<double>(m_[k][i]) + (1.0 - b1) * g;
        const double v = b2 * static_cast<double>(v_[k][i]) + (1.0 - b2) * g * g;
        m_[k][i] = static_cast<S>(m);
        v_[k][i] = static_cast<S>(v);
        double w = static_cast<double>(p.value[i]);
        if (decay) w -= lr * settings_.weight_decay * w;
        w -= lr * (m / c1) / (std::sqrt(v / c2) + settings_.epsilon);
        p.value[i] = static_cast<S>(w);
      }
    }
  }

 private:
  AdamWSettings settings_;
  std::vector<Matrix<S>> m_;
  std::vector<Matrix<S>> v_;
  std::uint64_t step_ = 0;
};

/// Rescales all gradients so their global L2 norm is at most max_norm. Returns the norm before scaling.
template <class S>
double clip_gradients(ParamStore<S>& store, double max_norm) {
  double sq = 0;
  for (const auto& p : store)
    for (std::size_t i = 0; i < p.grad.size(); ++i) sq += static_cast<double>(p.grad[i]) * static_cast<double>(p.grad[i]);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S f = static_cast<S>(max_norm / norm);
    for (auto& p : store)
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] *= f;
  }
  return norm;
}

}  // namespace unitygraph
