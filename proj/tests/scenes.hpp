#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "s5/manifest.hpp"
#include "s5/mixer.hpp"

namespace s5::test {

inline const SourceBank& shared_bank() {
  static const SourceBank bank = procedural_bank(18);
  return bank;
}

// Synthesizes `count` scenes under `dir` and writes dir/scenes.jsonl.
inline std::vector<SceneManifest> make_scenes(const std::filesystem::path& dir, std::size_t count,
                                              std::uint64_t seed, int fg_min = 1, int fg_max = 3,
                                              double duration = 0.25) {
  BatchSpec spec;
  spec.fg_min = fg_min;
  spec.fg_max = fg_max;
  spec.duration = duration;
  spec.seed = seed;
  std::vector<SceneManifest> out;
  for (std::size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "scene_%04zu", i);
    auto s = synthesize_scene(spec.scene(i), shared_bank(), 18, id);
    write_scene(dir, s);
    out.push_back(s.manifest);
  }
  write_manifests(dir / "scenes.jsonl", out);
  return out;
}

}  // namespace s5::test
