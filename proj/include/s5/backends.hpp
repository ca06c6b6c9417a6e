#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "s5/manifest.hpp"
#include "s5/pipeline.hpp"

namespace s5 {

/// Ground truth available to test stand-ins (never to the orchestrator).
struct SceneTruth {
  SceneManifest manifest;
  LoadedScene audio;
  std::size_t num_classes = 18;

  static std::shared_ptr<const SceneTruth> load(const SceneManifest& manifest,
                                                std::size_t num_classes);

  /// Gain-scaled foreground stems padded with silence to 3 slots, then
  /// interference padded to 2 slots, then noise.
  std::vector<AudioBuffer> role_ordered_stems() const;
  /// Class of each foreground slot (nullopt for padding).
  std::vector<std::optional<ClassId>> slot_classes() const;
  /// Ground-truth foreground stem of `cls`, if present in the scene.
  const AudioBuffer* stem_of_class(ClassId cls) const;
};

/// Logit levels used by the oracle classifier.
inline constexpr double kOracleLogitFloor = -5.0;
inline constexpr double kOracleLogitSpan = 15.0;

/// Classifier that scores a waveform by its normalized correlation with each
/// ground-truth foreground stem: l_k = -5 + 15 max(0, corr_k) for classes in
/// the scene, -5 otherwise. Silent input gets all -5 (energy well above the
/// default threshold).
std::shared_ptr<const ClassifierBackend> make_oracle_classifier(
    std::shared_ptr<const SceneTruth> truth);

/// Returns ground-truth stems in role order. With `degradation_snr`, seeded
/// white noise is added to every non-silent stem at exactly that SNR. The
/// class-decoder logits are the oracle classifier's logits on the clean
/// stems; activity is 1 for occupied foreground slots, 0 otherwise.
std::shared_ptr<const SeparatorBackend> make_oracle_separator(
    std::shared_ptr<const SceneTruth> truth, std::optional<double> degradation_snr = std::nullopt,
    std::uint64_t seed = 0);

/// Returns the ground-truth stem of the clue's class (silence if the class is
/// not in the scene).
std::shared_ptr<const ExtractorBackend> make_oracle_extractor(
    std::shared_ptr<const SceneTruth> truth);

/// Returns target + (enrollment - target) / sqrt(2): every call halves the
/// error energy of the enrollment w.r.t. the stem of the clue's class.
std::shared_ptr<const ExtractorBackend> make_halving_extractor(
    std::shared_ptr<const SceneTruth> truth);

/// Replays precomputed outputs from DIR/<scene_id>/:
///   fg1.wav fg2.wav fg3.wav intf1.wav intf2.wav noise.wav logits.json
///   tse<t>_fg<j>.wav   (extraction round t, slot j; needed for non-silent slots)
/// logits.json: {"separator": {"logits": [[C] x 3], "activity": [3]},
///               "classifier": [[[C] or null] x 3 per stage]}
/// All files are validated when the backend is constructed.
struct FileBackend {
  std::shared_ptr<const SeparatorBackend> separator;
  std::shared_ptr<const ClassifierBackend> classifier;
  std::shared_ptr<const ExtractorBackend> extractor;

  Backends bundle() const { return {separator, classifier, extractor}; }
};

FileBackend make_file_backend(const std::filesystem::path& dir, const std::string& scene_id,
                              int sample_rate, std::size_t num_classes);

/// Writes the file-backend layout for one scene as the oracle backends would
/// produce it over `iterations` extraction rounds.
void write_oracle_dump(const std::filesystem::path& dir, const SceneTruth& truth, int iterations);

/// Parsed --backend value: "oracle", "oracle-degraded:<snr dB>", "files:<dir>".
/// The degraded oracle pairs the noisy separator with the error-halving
/// extractor so refinement rounds improve on it.
struct BackendSpec {
  enum class Kind { oracle, oracle_degraded, files };
  Kind kind = Kind::oracle;
  double snr_db = 0.0;
  std::filesystem::path dir;

  static BackendSpec parse(const std::string& text);
  std::string to_string() const;
};

Backends make_backends(const BackendSpec& spec, const SceneManifest& manifest,
                       std::size_t num_classes, std::uint64_t seed);

}  // namespace s5
