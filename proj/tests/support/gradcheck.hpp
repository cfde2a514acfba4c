#pragma once

// Central finite-difference checks against the tape's analytic gradients.
// Relative error per entry is |a - n| / max(|a|, |n|, floor); the floor keeps
// entries whose true gradient is ~0 from reporting rounding noise as error.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "unitygraph/autodiff.hpp"

namespace gradcheck {

inline constexpr double kStep = 1e-5;
inline constexpr double kFloor = 1e-6;

struct Stats {
  double max_rel = 0;
  double max_abs = 0;
  std::size_t entries = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFloor});
}

using LossFn = std::function<unitygraph::Var<double>(unitygraph::Tape<double>&)>;
using GroupFn = std::function<std::string(const std::string&)>;

/// Checks every scalar parameter of the store; results keyed by group(name).
inline std::map<std::string, Stats> parameters(unitygraph::ParamStore<double>& store, const LossFn& loss,
                                               const GroupFn& group, double step = kStep) {
  store.zero_grad();
  {
    unitygraph::Tape<double> tape;
    tape.backward(loss(tape));
  }
  auto value = [&] {
    unitygraph::Tape<double> tape;
    return loss(tape).value()[0];
  };
  std::map<std::string, Stats> out;
  for (auto& p : store) {
    auto& s = out[group(p.name)];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double keep = p.value[i];
      p.value[i] = keep + step;
      const double up = value();
      p.value[i] = keep - step;
      const double down = value();
      p.value[i] = keep;
      const double numeric = (up - down) / (2 * step);
      s.max_rel = std::max(s.max_rel, relative_error(p.grad[i], numeric));
      s.max_abs = std::max(s.max_abs, std::abs(p.grad[i] - numeric));
      ++s.entries;
    }
  }
  return out;
}

/// Checks the gradient with respect to an input matrix x.
inline Stats input(const unitygraph::Matrix<double>& x,
                   const std::function<unitygraph::Var<double>(unitygraph::Tape<double>&, unitygraph::Var<double>)>& loss,
                   double step = kStep) {
  unitygraph::Matrix<double> grad;
  {
    unitygraph::Tape<double> tape;
    const auto v = tape.variable(x);
    tape.backward(loss(tape, v));
    grad = tape.grad_of(v);
  }
  auto value = [&](const unitygraph::Matrix<double>& at) {
    unitygraph::Tape<double> tape;
    return loss(tape, tape.constant(at)).value()[0];
  };
  Stats s;
  unitygraph::Matrix<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = value(probe);
    probe[i] = x[i] - step;
    const double down = value(probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2 * step);
    s.max_rel = std::max(s.max_rel, relative_error(grad[i], numeric));
    s.max_abs = std::max(s.max_abs, std::abs(grad[i] - numeric));
    ++s.entries;
  }
  return s;
}

}  // namespace gradcheck
