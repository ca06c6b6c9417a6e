#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "s5/audio.hpp"
#include "s5/manifest.hpp"

namespace s5 {

struct DbRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Recipe for one scene. SNRs of foreground and interference stems are drawn
/// uniformly from their ranges and measured against the noise stem.
struct SceneSpec {
  int n_foreground = 1;
  int n_interference = 0;
  DbRange fg_snr{5.0, 20.0};
  DbRange intf_snr{0.0, 15.0};
  double duration = 1.0;  // seconds
  std::uint64_t seed = 0;
  int sample_rate = kDefaultSampleRate;

  void validate() const;
};

/// Batch recipe: per-scene stem counts are drawn uniformly from the closed
/// count ranges, then each scene is synthesized from its own SceneSpec.
struct BatchSpec {
  int fg_min = 1, fg_max = 3;
  int intf_min = 0, intf_max = 2;
  DbRange fg_snr{5.0, 20.0};
  DbRange intf_snr{0.0, 15.0};
  double duration = 1.0;
  std::uint64_t seed = 0;
  int sample_rate = kDefaultSampleRate;

  /// Accepts {"n_foreground": 2 | [1,3], "n_interference": ..., "fg_snr_range":
  /// [lo,hi], "intf_snr_range": [lo,hi], "duration": s, "seed": n,
  /// "sample_rate": hz}; missing keys keep their defaults.
  static BatchSpec from_json(const std::string& text);
  std::string to_json() const;

  SceneSpec scene(std::size_t index) const;
};

/// Decoded source material. Every target class must have at least one clip.
struct SourceBank {
  struct Target {
    ClassId class_id;
    std::string path;
    AudioBuffer clip;
  };
  struct Clip {
    std::string path;
    AudioBuffer clip;
  };
  std::vector<Target> targets;
  std::vector<Clip> interference;
  std::vector<Clip> noise;
  int sample_rate = kDefaultSampleRate;

  std::vector<ClassId> classes() const;

  /// bank.json: {"sample_rate": hz, "targets": [{"class": name, "path": p}],
  /// "interference": [p...], "noise": [p...]}, paths relative to the file.
  static SourceBank load(const std::filesystem::path& bank_json,
                         const ClassVocabulary& vocab);
  void save(const std::filesystem::path& bank_json, const ClassVocabulary& vocab) const;
};

/// Tones, chirps and AM tones per class, inharmonic bursts for interference
/// and white noise for background; deterministic in `seed`.
SourceBank procedural_bank(std::size_t num_classes, int sample_rate = kDefaultSampleRate,
                           std::uint64_t seed = 1234, std::size_t clips_per_class = 2);

/// Gain g with 10*log10(power(g*src)/power(noise)) == target_db.
double gain_for_snr(const AudioBuffer& src, const AudioBuffer& noise, double target_db);

/// Noise stems are scaled to this mean-square level before SNRs are applied.
inline constexpr double kNoisePower = 1e-3;

struct SynthesizedScene {
  AudioBuffer mixture;
  SceneManifest manifest;
  std::vector<AudioBuffer> stems;  // unscaled, manifest order
};

/// Stems are written as <scene_id>/{fg1..,intf1..,noise}.wav and the
/// mixture as <scene_id>/mixture.wav, relative to the manifest directory.
SynthesizedScene synthesize_scene(const SceneSpec& spec, const SourceBank& bank,
                                  std::size_t num_classes,
                                  std::optional<std::string> scene_id = std::nullopt);

/// Writes the mixture and stems under `out_dir` and sets manifest.base_dir.
void write_scene(const std::filesystem::path& out_dir, SynthesizedScene& scene);

}  // namespace s5
