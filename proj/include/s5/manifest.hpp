#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s5/audio.hpp"

namespace s5 {

using ClassId = std::size_t;

enum class Role { foreground, interference, noise };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct StemEntry {
  std::string path;  // relative to the manifest file's directory
  Role role = Role::foreground;
  std::optional<ClassId> class_id;  // foreground only
  double gain = 1.0;
  // Realized SNR against the noise stem; absent for the noise stem itself.
  std::optional<double> snr_db;

  friend bool operator==(const StemEntry&, const StemEntry&) = default;
};

inline constexpr std::size_t kMaxForeground = 3;
inline constexpr std::size_t kMaxInterference = 2;

/// Ground truth for one mixture.
struct SceneManifest {
  std::string scene_id;
  std::string mixture_path;
  std::vector<StemEntry> stems;
  int sample_rate = kDefaultSampleRate;
  // Directory relative paths resolve against. Not serialized.
  std::filesystem::path base_dir;

  std::vector<const StemEntry*> with_role(Role role) const;
  std::vector<ClassId> foreground_classes() const;

  friend bool operator==(const SceneManifest& a, const SceneManifest& b) {
    return a.scene_id == b.scene_id && a.mixture_path == b.mixture_path &&
           a.stems == b.stems && a.sample_rate == b.sample_rate;
  }
};

/// Role counts (1-3 fg, 0-2 interference, exactly 1 noise), distinct
/// foreground classes below `num_classes`, finite gains.
void validate(const SceneManifest& manifest, std::size_t num_classes);

std::string to_json_line(const SceneManifest& manifest);
SceneManifest parse_manifest_line(std::string_view line,
                                  const std::filesystem::path& base_dir = {});

std::vector<SceneManifest> read_manifests(const std::filesystem::path& jsonl);
void write_manifests(const std::filesystem::path& jsonl,
                     const std::vector<SceneManifest>& manifests);

/// Audio of one scene. `stems` are gain-scaled (the contribution of each stem
/// to the mixture) in manifest order.
struct LoadedScene {
  AudioBuffer mixture;
  std::vector<AudioBuffer> stems;
};

inline constexpr double kMixtureTolerance = 1e-6;

/// Loads mixture and stems, checks sample rates and that the mixture equals
/// the gain-weighted stem sum within 1e-6 relative (L2) error.
LoadedScene load_scene(const SceneManifest& manifest);

}  // namespace s5
