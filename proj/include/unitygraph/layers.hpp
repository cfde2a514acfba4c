#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "unitygraph/autodiff.hpp"

namespace unitygraph {

/// Affine map x W + b with parameters held in a ParamStore.
struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  bool has_bias = true;

  template <class S>
  static Linear create(ParamStore<S>& store, const std::string& name, std::size_t in, std::size_t out,
                       bool with_bias = true) {
    Linear l;
    l.weight = store.add(name + ".weight", in, out);
    l.has_bias = with_bias;
    if (with_bias) l.bias = store.add(name + ".bias", 1, out);
    return l;
  }

  template <class S>
  Var<S> operator()(Tape<S>& tape, ParamStore<S>& store, Var<S> x) const {
    Var<S> y = ad::matmul(x, tape.parameter(store, weight));
    return has_bias ? ad::add_row(y, tape.parameter(store, bias)) : y;
  }
};

/// Two-layer perceptron with a ReLU between the layers.
struct Mlp {
  Linear hidden;
  Linear output;

  template <class S>
  static Mlp create(ParamStore<S>& store, const std::string& name, std::size_t in, std::size_t width,
                    std::size_t out) {
    return {Linear::create(store, name + ".0", in, width), Linear::create(store, name + ".1", width, out)};
  }

  template <class S>
  Var<S> operator()(Tape<S>& tape, ParamStore<S>& store, Var<S> x) const {
    return output(tape, store, ad::relu(hidden(tape, store, x)));
  }
};

/// Glorot-uniform weights, zero biases. Parameters whose name ends in
/// ".bias" are zeroed; everything else is drawn from the generator.
template <class S>
void glorot_init(ParamStore<S>& store, std::mt19937_64& rng) {
  for (auto& p : store) {
    const bool is_bias = p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0;
    if (is_bias) {
      p.value.fill(S(0));
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      p.value[i] = static_cast<S>((2.0 * u - 1.0) * limit);
    }
  }
}

/// Logit clamp applied before every softmax in the model.
inline constexpr double kLogitClamp = 30.0;

}  // namespace unitygraph
