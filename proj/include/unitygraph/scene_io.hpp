#pragma once

// Canonical JSON scene files and dataset manifests.
//
// Scene:    {"format_version": 1, "fps": f, "frames": F, "persons": N,
//            "positions": [N][F][J][3], "skeleton": {"edges": [[i, j]...],
//            "joint_names": [...]}}
// Keys are written sorted, compact, numbers in shortest round-trip form.
// Manifest: {"scenes": [{"path": "relative.json", "split": "train"}, ...]}

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitygraph/error.hpp"
#include "unitygraph/motion.hpp"

namespace unitygraph {

inline constexpr int kSceneFormatVersion = 1;

inline nlohmann::json scene_to_json(const MotionSequence& seq) {
  nlohmann::json skeleton;
  skeleton["joint_names"] = seq.skeleton().joint_names;
  auto edges = nlohmann::json::array();
  for (const auto& [a, b] : seq.skeleton().edges) edges.push_back({a, b});
  skeleton["edges"] = std::move(edges);

  auto positions = nlohmann::json::array();
  for (std::size_t n = 0; n < seq.persons(); ++n) {
    auto person = nlohmann::json::array();
    for (std::size_t f = 0; f < seq.frames(); ++f) {
      auto frame = nlohmann::json::array();
      for (std::size_t j = 0; j < seq.joints(); ++j)
        frame.push_back({seq.at(n, f, j, 0), seq.at(n, f, j, 1), seq.at(n, f, j, 2)});
      person.push_back(std::move(frame));
    }
    positions.push_back(std::move(person));
  }

  nlohmann::json doc;
  doc["format_version"] = kSceneFormatVersion;
  doc["fps"] = seq.fps();
  doc["persons"] = seq.persons();
  doc["frames"] = seq.frames();
  doc["skeleton"] = std::move(skeleton);
  doc["positions"] = std::move(positions);
  return doc;
}

/// Canonical serialized text, newline terminated.
inline std::string scene_to_string(const MotionSequence& seq) {
  return scene_to_json(seq).dump() + "\n";
}

inline MotionSequence scene_from_json(const nlohmann::json& doc) {
  auto malformed = [](const std::string& what) { return Error(ErrorKind::malformed_file, what); };
  try {
    if (!doc.is_object()) throw malformed("scene root must be an object");
    if (doc.value("format_version", -1) != kSceneFormatVersion) throw malformed("unsupported format_version");
    if (!doc.contains("fps") || !doc["fps"].is_number()) throw malformed("missing numeric fps");
    if (!doc.contains("skeleton") || !doc["skeleton"].is_object()) throw malformed("missing skeleton");
    if (!doc.contains("positions") || !doc["positions"].is_array()) throw malformed("missing positions array");

    Skeleton skel;
    const auto& js = doc["skeleton"];
    if (!js.contains("joint_names") || !js["joint_names"].is_array()) throw malformed("missing joint_names");
    for (const auto& name : js["joint_names"]) {
      if (!name.is_string()) throw malformed("joint name must be a string");
      skel.joint_names.push_back(name.get<std::string>());
    }
    if (js.contains("edges")) {
      for (const auto& e : js["edges"]) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned()) {
          throw malformed("edge must be a pair of joint indices");
        }
        skel.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
      }
    }
    skel.validate();

    const auto& pos = doc["positions"];
    const std::size_t N = pos.size();
    if (N == 0) throw malformed("positions has no persons");
    const std::size_t F = pos[0].is_array() ? pos[0].size() : 0;
    const std::size_t J = skel.joint_count();
    if (doc.contains("persons") && doc["persons"].get<std::size_t>() != N) {
      throw Error(ErrorKind::shape_mismatch, "declared persons disagree with positions array");
    }
    if (doc.contains("frames") && doc["frames"].get<std::size_t>() != F) {
      throw Error(ErrorKind::shape_mismatch, "declared frames (" + std::to_string(doc["frames"].get<std::size_t>()) +
                                                  ") disagree with positions array (" + std::to_string(F) + ")");
    }

    std::vector<double> flat;
    flat.reserve(N * F * J * 3);
    for (const auto& person : pos) {
      if (!person.is_array() || person.size() != F) throw Error(ErrorKind::shape_mismatch, "ragged frame count");
      for (const auto& frame : person) {
        if (!frame.is_array() || frame.size() != J) throw Error(ErrorKind::shape_mismatch, "joint count disagrees with skeleton");
        for (const auto& joint : frame) {
          if (!joint.is_array() || joint.size() != 3) throw Error(ErrorKind::shape_mismatch, "joint must have 3 coordinates");
          for (const auto& c : joint) {
            if (c.is_null()) throw Error(ErrorKind::non_finite_value, "null coordinate");
            if (!c.is_number()) throw malformed("coordinate must be a number");
            flat.push_back(c.get<double>());
          }
        }
      }
    }
    MotionSequence seq(N, F, std::move(skel), doc["fps"].get<double>(), std::move(flat));
    seq.validate();
    return seq;
  } catch (const nlohmann::json::exception& e) {
    throw malformed(e.what());
  }
}

inline MotionSequence scene_from_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::malformed_file, e.what());
  }
  return scene_from_json(doc);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::data_missing, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary file and rename so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io_failure, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::io_failure, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io_failure, "rename to " + path.string() + " failed: " + ec.message());
}

inline MotionSequence load_scene(const std::filesystem::path& path) {
  return scene_from_string(read_text_file(path));
}

inline void save_scene(const MotionSequence& seq, const std::filesystem::path& path) {
  write_file_atomic(path, scene_to_string(seq));
}

struct ManifestEntry {
  std::string path;
  std::string split;
};

/// Directory of scene files listed by manifest.json.
struct Dataset {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  static Dataset open(const std::filesystem::path& dir) {
    const auto manifest = dir / "manifest.json";
    if (!std::filesystem::exists(manifest)) throw Error(ErrorKind::data_missing, "no manifest.json in " + dir.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_text_file(manifest));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::malformed_file, std::string("manifest: ") + e.what());
    }
    if (!doc.contains("scenes") || !doc["scenes"].is_array()) throw Error(ErrorKind::malformed_file, "manifest lacks scenes");
    Dataset ds{dir, {}};
    for (const auto& s : doc["scenes"]) {
      if (!s.contains("path") || !s.contains("split")) throw Error(ErrorKind::malformed_file, "manifest entry lacks path/split");
      const auto split = s["split"].get<std::string>();
      if (split != "train" && split != "val" && split != "test") {
        throw Error(ErrorKind::malformed_file, "unknown split tag " + split);
      }
      ds.entries.push_back({s["path"].get<std::string>(), split});
    }
    return ds;
  }

  std::vector<MotionSequence> load_split(const std::string& split) const {
    std::vector<MotionSequence> out;
    for (const auto& e : entries)
      if (e.split == split) out.push_back(load_scene(root / e.path));
    return out;
  }
};

inline void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestEntry>& entries) {
  nlohmann::json doc;
  doc["scenes"] = nlohmann::json::array();
  for (const auto& e : entries) doc["scenes"].push_back({{"path", e.path}, {"split", e.split}});
  write_file_atomic(dir / "manifest.json", doc.dump(2) + "\n");
}

}  // namespace unitygraph
