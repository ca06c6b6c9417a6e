#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s5/audio.hpp"
#include "s5/error.hpp"
#include "s5/silence_gate.hpp"

namespace s5 {

inline constexpr std::size_t kForegroundSlots = 3;
inline constexpr std::size_t kSeparatorOutputs = 6;  // 3 fg, 2 interference, 1 noise
inline constexpr int kMaxTseIterations = 8;

/// Where a backend call happens: stage 0 is separation + classification,
/// stage t >= 1 is the t-th extraction round. `slot` is the foreground slot.
struct StageSlot {
  int stage = 0;
  std::size_t slot = 0;
};

/// Self-generated guidance for one foreground slot: the current waveform
/// (enrollment clue) and its class decision (class clue).
struct ClueSet {
  AudioBuffer enrollment;
  ClassDecision decision;

  bool silent() const { return decision.silent(); }
  /// One-hot class vector (length C); empty for SILENCE.
  std::vector<double> class_clue() const;

  friend bool operator==(const ClueSet&, const ClueSet&) = default;
};

struct SeparationOutput {
  std::vector<AudioBuffer> stems;  // fg1..3, intf1..2, noise
  std::array<LogitVector, kForegroundSlots> logits;
  std::array<double, kForegroundSlots> activity{};
};

class SeparatorBackend {
 public:
  virtual ~SeparatorBackend() = default;
  virtual SeparationOutput separate(const AudioBuffer& mixture) const = 0;
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual LogitVector classify(const AudioBuffer& waveform, const StageSlot& at) const = 0;
};

class ExtractorBackend {
 public:
  virtual ~ExtractorBackend() = default;
  virtual AudioBuffer extract(const AudioBuffer& mixture, const ClueSet& clue,
                              const StageSlot& at) const = 0;
};

struct Backends {
  std::shared_ptr<const SeparatorBackend> separator;
  std::shared_ptr<const ClassifierBackend> classifier;
  std::shared_ptr<const ExtractorBackend> extractor;
};

/// A backend threw; the message carries the stage and backend role.
class BackendError : public Error {
 public:
  using Error::Error;
};

enum class GateMode { energy, binary };
/// Stage-1 class source: the classifier backend ("CP 1-1") or the
/// separator's own class decoder ("CP 1").
enum class LabelSource { classifier, separator };

struct PipelineConfig {
  int tse_iterations = 2;
  GateMode gate_mode = GateMode::energy;  // governs stage-1 outputs only
  ThresholdTable thresholds = ThresholdTable::uniform(18);
  bool classifier_stage_reuse = false;  // extraction rounds keep prior labels
  LabelSource stage1_labels = LabelSource::classifier;

  /// "FSS 1 + CP 1", "FSS 1 + CP 1-1", "FSS 2 + CP 1-1", "FSS n + CP n".
  static PipelineConfig from_mode(const std::string& mode, ThresholdTable thresholds);
  std::string mode_name() const;
  void validate() const;
};

struct StageRecord {
  std::vector<ClueSet> clues;  // one per foreground slot
  friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

struct PipelineResult {
  std::vector<StageRecord> stages;  // stage 0 first

  const std::vector<ClueSet>& final_clues() const { return stages.back().clues; }
  friend bool operator==(const PipelineResult&, const PipelineResult&) = default;
};

std::vector<ClueSet> run_stage1(const AudioBuffer& mixture, const SeparatorBackend& sep,
                                const ClassifierBackend& clf, const PipelineConfig& cfg);

/// One extraction round. SILENCE clues pass through without calling the
/// extractor; the others are extracted, then re-classified through the energy
/// gate (or keep their label under classifier_stage_reuse).
std::vector<ClueSet> run_tse_stage(const AudioBuffer& mixture, std::span<const ClueSet> clues,
                                   const ExtractorBackend& ext, const ClassifierBackend& clf,
                                   const PipelineConfig& cfg, int stage = 1);

PipelineResult run_pipeline(const AudioBuffer& mixture, const Backends& backends,
                            const PipelineConfig& cfg);

/// Residual FiLM: h + (gamma * h + beta), elementwise.
std::vector<double> res_film(std::span<const double> features, std::span<const double> gamma,
                             std::span<const double> beta);

/// Stack of equally sized (frames x bins) planes, channel-major.
struct FeatureStack {
  std::size_t channels = 0;
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> data;

  FeatureStack() = default;
  FeatureStack(std::size_t channels, std::size_t frames, std::size_t bins,
               std::vector<double> data);
  std::span<const double> plane(std::size_t c) const;
  friend bool operator==(const FeatureStack&, const FeatureStack&) = default;
};

/// Channel-axis concatenation, mixture channels first.
FeatureStack clue_concat(const FeatureStack& mixture, const FeatureStack& enrollment);

}  // namespace s5
