#pragma once

// Run configuration: one flat JSON document. Every scalar key is also a CLI
// override flag of the same name. The optional "synthetic" object supplies
// generator settings when no data directory is given; its persons / T / P / J
// are always taken from the top-level fields.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "unitygraph/error.hpp"
#include "unitygraph/message_passing.hpp"
#include "unitygraph/objectives_metrics.hpp"
#include "unitygraph/scene_io.hpp"
#include "unitygraph/synthetic.hpp"

namespace unitygraph {

enum class Precision { single, double_ };

inline std::string to_string(Precision p) { return p == Precision::single ? "single" : "double"; }

struct RunConfig {
  // data
  std::string data;  // dataset directory; empty selects synthetic scenes
  std::size_t train_scenes = 8;
  std::size_t test_scenes = 4;
  SyntheticSceneConfig synthetic;

  // shapes
  std::size_t persons = 3;
  std::size_t observed = 15;
  std::size_t future = 15;
  std::size_t joints = 8;
  std::size_t hidden_dim = 32;
  std::size_t decoder_hidden = 64;
  std::size_t mlp_hidden = 32;
  std::size_t layers = 3;
  std::size_t attention_heads = 4;

  // objective
  double lambda_pre = 0.7;
  double lambda_rec = 0.2;
  double lambda_inf = 0.1;

  // optimiser
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double lr_decay = 0.8;
  std::size_t decay_every = 10;  // epochs
  double max_grad_norm = 0.0;    // 0 disables clipping
  std::size_t batch_size = 8;
  std::size_t epochs = 500;

  // ablations
  bool use_short_term = true;
  bool use_long_term = true;
  bool use_spatial = true;
  bool use_inference_loss = true;
  bool use_reconstruction_loss = true;

  std::uint64_t seed = 0;
  Precision precision = Precision::double_;
  std::string out_dir = "run";
  std::size_t log_every = 10;

  LossWeights loss_weights() const {
    return {lambda_pre, use_reconstruction_loss ? lambda_rec : 0.0, use_inference_loss ? lambda_inf : 0.0};
  }

  MessagePassingConfig message_passing() const {
    MessagePassingConfig c;
    c.hidden_dim = hidden_dim;
    c.layers = layers;
    c.mlp_hidden = mlp_hidden;
    c.enabled = {use_short_term, use_long_term, use_spatial};
    return c;
  }

  /// Generator settings for scene i of a split (seed offset keeps splits disjoint).
  SyntheticSceneConfig synthetic_scene(std::size_t i, bool test) const {
    SyntheticSceneConfig s = synthetic;
    s.persons = persons;
    s.observed = observed;
    s.future = future;
    s.joints = joints;
    s.seed = synthetic.seed + (test ? 1'000'000u : 0u) + i;
    return s;
  }

  void validate() const {
    auto bad = [](const std::string& what) { return Error(ErrorKind::config_invalid, what); };
    if (persons == 0 || joints == 0) throw bad("persons and joints must be positive");
    if (observed < 2) throw bad("observed window T must be >= 2");
    if (future == 0) throw bad("future window P must be >= 1");
    if (hidden_dim == 0 || attention_heads == 0 || hidden_dim % attention_heads != 0) {
      throw bad("hidden_dim must be a positive multiple of attention_heads");
    }
    if (decoder_hidden == 0 || mlp_hidden == 0) throw bad("decoder_hidden and mlp_hidden must be positive");
    if (layers == 0) throw bad("layers must be >= 1");
    if (!use_short_term && !use_long_term && !use_spatial) throw bad("at least one hyperedge family must be enabled");
    if (!(learning_rate > 0.0)) throw bad("learning_rate must be > 0");
    if (!(weight_decay >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
        !(adam_epsilon > 0.0)) {
      throw bad("invalid optimiser settings");
    }
    if (!(lr_decay > 0.0 && lr_decay <= 1.0) || decay_every == 0) throw bad("invalid learning-rate schedule");
    if (!(max_grad_norm >= 0.0)) throw bad("max_grad_norm must be >= 0");
    if (batch_size == 0 || epochs == 0) throw bad("batch_size and epochs must be positive");
    if (data.empty() && train_scenes == 0) throw bad("train_scenes must be positive for synthetic data");
    loss_weights().validate();
    if (data.empty()) synthetic_scene(0, false).validate();
  }
};

namespace detail {

/// One accessor per scalar field, shared by JSON I/O and CLI overrides.
static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seed is stored through a size_t field");

struct FieldRef {
  std::string name;
  std::variant<std::string*, std::size_t*, double*, bool*, Precision*> target;
};

inline std::vector<FieldRef> fields(RunConfig& c) {
  return {
      {"data", &c.data},
      {"train_scenes", &c.train_scenes},
      {"test_scenes", &c.test_scenes},
      {"persons", &c.persons},
      {"observed", &c.observed},
      {"future", &c.future},
      {"joints", &c.joints},
      {"hidden_dim", &c.hidden_dim},
      {"decoder_hidden", &c.decoder_hidden},
      {"mlp_hidden", &c.mlp_hidden},
      {"layers", &c.layers},
      {"attention_heads", &c.attention_heads},
      {"lambda_pre", &c.lambda_pre},
      {"lambda_rec", &c.lambda_rec},
      {"lambda_inf", &c.lambda_inf},
      {"learning_rate", &c.learning_rate},
      {"weight_decay", &c.weight_decay},
      {"beta1", &c.beta1},
      {"beta2", &c.beta2},
      {"adam_epsilon", &c.adam_epsilon},
      {"lr_decay", &c.lr_decay},
      {"decay_every", &c.decay_every},
      {"max_grad_norm", &c.max_grad_norm},
      {"batch_size", &c.batch_size},
      {"epochs", &c.epochs},
      {"use_short_term", &c.use_short_term},
      {"use_long_term", &c.use_long_term},
      {"use_spatial", &c.use_spatial},
      {"use_inference_loss", &c.use_inference_loss},
      {"use_reconstruction_loss", &c.use_reconstruction_loss},
      {"seed", &c.seed},
      {"precision", &c.precision},
      {"out_dir", &c.out_dir},
      {"log_every", &c.log_every},
  };
}

inline Precision precision_from_string(const std::string& s) {
  if (s == "single" || s == "float") return Precision::single;
  if (s == "double") return Precision::double_;
  throw Error(ErrorKind::config_invalid, "precision must be single or double, got " + s);
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& config) {
  RunConfig c = config;
  nlohmann::json j;
  for (auto& f : detail::fields(c)) {
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Precision>) {
            j[f.name] = to_string(*p);
          } else {
            j[f.name] = *p;
          }
        },
        f.target);
  }
  j["synthetic"] = c.synthetic;
  return j;
}

/// Assigns one field from its textual form (CLI override).
inline void set_field(RunConfig& c, const std::string& name, const std::string& text) {
  for (auto& f : detail::fields(c)) {
    if (f.name != name) continue;
    try {
      std::visit(
          [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, std::string>) {
              *p = text;
            } else if constexpr (std::is_same_v<T, Precision>) {
              *p = detail::precision_from_string(text);
            } else if constexpr (std::is_same_v<T, bool>) {
              if (text == "true" || text == "1") *p = true;
              else if (text == "false" || text == "0") *p = false;
              else throw Error(ErrorKind::config_invalid, "expected true/false for " + name);
            } else if constexpr (std::is_same_v<T, double>) {
              std::size_t used = 0;
              *p = std::stod(text, &used);
              if (used != text.size()) throw std::invalid_argument(text);
            } else {
              if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
              std::size_t used = 0;
              *p = static_cast<T>(std::stoull(text, &used));
              if (used != text.size()) throw std::invalid_argument(text);
            }
          },
          f.target);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::config_invalid, "cannot parse value '" + text + "' for " + name);
    }
    return;
  }
  throw Error(ErrorKind::config_invalid, "unknown config field " + name);
}

inline std::vector<std::string> config_field_names() {
  RunConfig c;
  std::vector<std::string> names;
  for (const auto& f : detail::fields(c)) names.push_back(f.name);
  return names;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::config_invalid, "config root must be an object");
  RunConfig c;
  auto known = config_field_names();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "synthetic") {
      from_json(it.value(), c.synthetic);
      continue;
    }
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw Error(ErrorKind::config_invalid, "unknown config field " + it.key());
    }
    const auto& v = it.value();
    set_field(c, it.key(), v.is_string() ? v.get<std::string>() : v.dump());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::config_invalid, e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::config_invalid, std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

/// UNITYGRAPH_SEED, when set, replaces the configured seed.
inline void apply_seed_env(RunConfig& c) {
  if (const char* s = std::getenv("UNITYGRAPH_SEED"); s != nullptr && *s != '\0') set_field(c, "seed", s);
}

}  // namespace unitygraph
