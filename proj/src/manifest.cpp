#include "s5/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "s5/error.hpp"
#include "s5/io.hpp"

namespace s5 {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::foreground: return "foreground";
    case Role::interference: return "interference";
    case Role::noise: return "noise";
  }
  return "unknown";
}

Role parse_role(std::string_view text) {
  if (text == "foreground") return Role::foreground;
  if (text == "interference") return Role::interference;
  if (text == "noise") return Role::noise;
  throw std::invalid_argument("unknown stem role: " + std::string(text));
}

std::vector<const StemEntry*> SceneManifest::with_role(Role role) const {
  std::vector<const StemEntry*> out;
  for (const auto& s : stems) {
    if (s.role == role) out.push_back(&s);
  }
  return out;
}

std::vector<ClassId> SceneManifest::foreground_classes() const {
  std::vector<ClassId> out;
  for (const auto* s : with_role(Role::foreground)) {
    if (s->class_id) out.push_back(*s->class_id);
  }
  return out;
}

void validate(const SceneManifest& m, std::size_t num_classes) {
  const auto bad = [&](const std::string& why) {
    return std::invalid_argument("scene " + m.scene_id + ": " + why);
  };
  if (m.scene_id.empty()) throw std::invalid_argument("manifest without scene_id");
  if (m.sample_rate <= 0) throw bad("sample rate must be positive");
  const auto fg = m.with_role(Role::foreground);
  const auto intf = m.with_role(Role::interference);
  const auto noise = m.with_role(Role::noise);
  if (fg.empty() || fg.size() > kMaxForeground) throw bad("needs 1-3 foreground stems");
  if (intf.size() > kMaxInterference) throw bad("at most 2 interference stems");
  if (noise.size() != 1) throw bad("needs exactly 1 noise stem");
  std::set<ClassId> seen;
  for (const auto* s : fg) {
    if (!s->class_id) throw bad("foreground stem without class_id");
    if (*s->class_id >= num_classes) throw bad("class_id out of vocabulary");
    if (!seen.insert(*s->class_id).second) throw bad("duplicate foreground class");
  }
  for (const auto& s : m.stems) {
    if (s.role != Role::foreground && s.class_id) {
      throw bad("class_id on a non-foreground stem");
    }
    if (!std::isfinite(s.gain)) throw bad("non-finite gain");
  }
}

std::string to_json_line(const SceneManifest& m) {
  json stems = json::array();
  for (const auto& s : m.stems) {
    json j = {{"path", s.path}, {"role", to_string(s.role)}, {"gain", s.gain}};
    if (s.class_id) j["class_id"] = *s.class_id;
    if (s.snr_db) j["snr_db"] = *s.snr_db;
    stems.push_back(std::move(j));
  }
  json j = {{"scene_id", m.scene_id},
            {"mixture_path", m.mixture_path},
            {"sample_rate", m.sample_rate},
            {"stems", std::move(stems)}};
  return j.dump();
}

SceneManifest parse_manifest_line(std::string_view line,
                                  const std::filesystem::path& base_dir) {
  SceneManifest m;
  try {
    const json j = json::parse(line);
    m.scene_id = j.at("scene_id").get<std::string>();
    m.mixture_path = j.at("mixture_path").get<std::string>();
    m.sample_rate = j.at("sample_rate").get<int>();
    for (const auto& js : j.at("stems")) {
      StemEntry s;
      s.path = js.at("path").get<std::string>();
      s.role = parse_role(js.at("role").get<std::string>());
      s.gain = js.at("gain").get<double>();
      if (js.contains("class_id") && !js["class_id"].is_null()) {
        s.class_id = js["class_id"].get<ClassId>();
      }
      if (js.contains("snr_db") && !js["snr_db"].is_null()) {
        s.snr_db = js["snr_db"].get<double>();
      }
      m.stems.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest line: ") + e.what());
  }
  m.base_dir = base_dir;
  return m;
}

std::vector<SceneManifest> read_manifests(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw IoError("cannot open manifest " + jsonl.string());
  const auto base = jsonl.parent_path();
  std::vector<SceneManifest> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_manifest_line(line, base));
  }
  return out;
}

void write_manifests(const std::filesystem::path& jsonl,
                     const std::vector<SceneManifest>& manifests) {
  std::string text;
  for (const auto& m : manifests) {
    text += to_json_line(m);
    text += '\n';
  }
  write_file_atomic(jsonl, text);
}

LoadedScene load_scene(const SceneManifest& m) {
  const auto load = [&](const std::string& rel) {
    AudioBuffer b = read_wav(m.base_dir / rel);
    if (b.sample_rate() != m.sample_rate) {
      throw IoError("scene " + m.scene_id + ": sample-rate mismatch in " + rel);
    }
    return b;
  };
  LoadedScene scene;
  scene.mixture = load(m.mixture_path);
  AudioBuffer sum = AudioBuffer::zeros_like(scene.mixture);
  for (const auto& s : m.stems) {
    AudioBuffer raw = load(s.path);
    if (!raw.same_shape(scene.mixture)) {
      throw IoError("scene " + m.scene_id + ": stem " + s.path +
                    " does not match the mixture length");
    }
    scene.stems.push_back(apply_gain(raw, s.gain));
    sum = add_scaled(sum, scene.stems.back(), 1.0);
  }
  const double ref = energy(scene.mixture);
  const double err = energy(subtract(scene.mixture, sum));
  if (err > kMixtureTolerance * kMixtureTolerance * std::max(ref, 1e-300)) {
    std::ostringstream os;
    os << "scene " << m.scene_id << ": mixture differs from gain-weighted stem sum"
       << " (relative error " << std::sqrt(err / std::max(ref, 1e-300)) << ")";
    throw IoError(os.str());
  }
  return scene;
}

}  // namespace s5
