#pragma once

// Single-file checkpoint:
//   bytes 0..7   "UGCK0001"
//   bytes 8..15  manifest length L, uint64 little-endian
//   next L bytes JSON manifest (config, skeleton, epoch, rng, dtype, parameter
//                table name -> shape -> element offset, optimiser offsets)
//   remainder    raw little-endian payload: parameters, then Adam first and
//                second moments in parameter order
// Written to a temporary file and renamed into place.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitygraph/config.hpp"
#include "unitygraph/model.hpp"
#include "unitygraph/optimizer.hpp"
#include "unitygraph/scene_io.hpp"

namespace unitygraph {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

inline constexpr char kCheckpointMagic[9] = "UGCK0001";

template <class S>
constexpr const char* dtype_name() {
  return sizeof(S) == 4 ? "float32" : "float64";
}

template <class S>
struct TrainingSnapshot {
  Model<S> model;
  AdamW<S> optimizer;
  std::size_t epoch = 0;
  std::mt19937_64 rng;
};

inline nlohmann::json skeleton_to_json(const Skeleton& s) {
  auto edges = nlohmann::json::array();
  for (const auto& [a, b] : s.edges) edges.push_back({a, b});
  return {{"joint_names", s.joint_names}, {"edges", std::move(edges)}};
}

inline Skeleton skeleton_from_json(const nlohmann::json& j) {
  Skeleton s;
  s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
  for (const auto& e : j.at("edges")) s.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
  s.validate();
  return s;
}

template <class S>
std::string checkpoint_bytes(const Model<S>& model, const AdamW<S>& opt, std::size_t epoch, const std::mt19937_64& rng) {
  const auto& store = model.params();
  nlohmann::json manifest;
  manifest["dtype"] = dtype_name<S>();
  manifest["epoch"] = epoch;
  manifest["config"] = to_json(model.config());
  manifest["skeleton"] = skeleton_to_json(model.skeleton());
  std::ostringstream rs;
  rs << rng;
  manifest["rng"] = rs.str();

  std::vector<S> payload;
  auto params = nlohmann::json::array();
  for (const auto& p : store) {
    params.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"offset", payload.size()}});
    payload.insert(payload.end(), p.value.storage().begin(), p.value.storage().end());
  }
  manifest["params"] = std::move(params);
  const bool has_opt = opt.first_moments().size() == store.size();
  nlohmann::json adam{{"step", opt.steps()},
                      {"learning_rate", opt.settings().learning_rate},
                      {"beta1", opt.settings().beta1},
                      {"beta2", opt.settings().beta2},
                      {"epsilon", opt.settings().epsilon},
                      {"weight_decay", opt.settings().weight_decay},
                      {"present", has_opt}};
  if (has_opt) {
    adam["first_offset"] = payload.size();
    for (const auto& m : opt.first_moments()) payload.insert(payload.end(), m.storage().begin(), m.storage().end());
    adam["second_offset"] = payload.size();
    for (const auto& v : opt.second_moments()) payload.insert(payload.end(), v.storage().begin(), v.storage().end());
  }
  manifest["adam"] = std::move(adam);
  manifest["payload_elements"] = payload.size();

  const std::string text = manifest.dump();
  std::string out(kCheckpointMagic, 8);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  out.append(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(S));
  return out;
}

template <class S>
void save_checkpoint(const std::filesystem::path& path, const Model<S>& model, const AdamW<S>& opt, std::size_t epoch,
                     const std::mt19937_64& rng) {
  write_file_atomic(path, checkpoint_bytes(model, opt, epoch, rng));
}

struct CheckpointFile {
  nlohmann::json manifest;
  std::string payload;  // raw bytes
};

inline CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  auto bad = [&](const std::string& what) { return Error(ErrorKind::malformed_file, path.string() + ": " + what); };
  if (bytes.size() < 16 || bytes.compare(0, 8, kCheckpointMagic) != 0) throw bad("not a checkpoint file");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (len > bytes.size() - 16) throw bad("truncated manifest");
  CheckpointFile f;
  try {
    f.manifest = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::parse_error& e) {
    throw bad(std::string("manifest: ") + e.what());
  }
  f.payload = bytes.substr(16 + len);
  return f;
}

inline Precision checkpoint_precision(const std::filesystem::path& path) {
  const auto f = read_checkpoint_file(path);
  return f.manifest.value("dtype", "") == "float32" ? Precision::single : Precision::double_;
}

template <class S>
TrainingSnapshot<S> load_checkpoint(const std::filesystem::path& path) {
  const auto f = read_checkpoint_file(path);
  const auto& m = f.manifest;
  auto bad = [&](const std::string& what) { return Error(ErrorKind::malformed_file, path.string() + ": " + what); };
  try {
    if (m.at("dtype").get<std::string>() != dtype_name<S>()) {
      throw Error(ErrorKind::shape_incompatible_checkpoint, "checkpoint dtype is " + m.at("dtype").get<std::string>());
    }
    const std::size_t elements = m.at("payload_elements").get<std::size_t>();
    if (f.payload.size() != elements * sizeof(S)) throw bad("payload size disagrees with manifest");
    std::vector<S> payload(elements);
    std::memcpy(payload.data(), f.payload.data(), f.payload.size());

    RunConfig cfg = run_config_from_json(m.at("config"));
    TrainingSnapshot<S> snap{Model<S>(cfg, skeleton_from_json(m.at("skeleton")), false), AdamW<S>(), 0, {}};
    auto& store = snap.model.params();
    const auto& table = m.at("params");
    if (table.size() != store.size()) throw Error(ErrorKind::shape_incompatible_checkpoint, "parameter count differs");
    for (std::size_t k = 0; k < store.size(); ++k) {
      auto& p = store[k];
      const auto& e = table[k];
      if (e.at("name").get<std::string>() != p.name || e.at("shape").at(0).get<std::size_t>() != p.value.rows() ||
          e.at("shape").at(1).get<std::size_t>() != p.value.cols()) {
        throw Error(ErrorKind::shape_incompatible_checkpoint, "parameter " + p.name + " does not match the manifest");
      }
      const std::size_t off = e.at("offset").get<std::size_t>();
      if (off + p.value.size() > elements) throw bad("parameter offset out of range");
      std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(off), p.value.size(), p.value.data());
    }

    const auto& adam = m.at("adam");
    AdamWSettings st{adam.at("learning_rate").get<double>(), adam.at("beta1").get<double>(),
                     adam.at("beta2").get<double>(), adam.at("epsilon").get<double>(),
                     adam.at("weight_decay").get<double>()};
    snap.optimizer = AdamW<S>(store, st);
    snap.optimizer.set_steps(adam.at("step").get<std::uint64_t>());
    if (adam.at("present").get<bool>()) {
      std::size_t a = adam.at("first_offset").get<std::size_t>(), b = adam.at("second_offset").get<std::size_t>();
      for (std::size_t k = 0; k < store.size(); ++k) {
        auto& mm = snap.optimizer.first_moments()[k];
        auto& vv = snap.optimizer.second_moments()[k];
        if (a + mm.size() > elements || b + vv.size() > elements) throw bad("optimiser offset out of range");
        std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(a), mm.size(), mm.data());
        std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(b), vv.size(), vv.data());
        a += mm.size();
        b += vv.size();
      }
    }
    snap.epoch = m.at("epoch").get<std::size_t>();
    std::istringstream rs(m.at("rng").get<std::string>());
    rs >> snap.rng;
    if (!rs) throw bad("random-number-generator state is unreadable");
    return snap;
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
}

}  // namespace unitygraph
