#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "s5/audio.hpp"
#include "s5/pipeline.hpp"
#include "s5/silence_gate.hpp"

namespace s5 {

using LabelSet = std::set<ClassId>;
using TrackLabels = std::array<Label, kForegroundSlots>;

/// Ground-truth foreground stems keyed by class.
struct ReferenceScene {
  std::map<ClassId, AudioBuffer> stems;
  LabelSet labels() const;
};

struct PredictedSource {
  AudioBuffer waveform;
  Label label;
};

/// Exactly three slots; non-SILENCE labels must be distinct.
struct ScenePrediction {
  std::array<PredictedSource, kForegroundSlots> slots;

  LabelSet labels() const;
  TrackLabels tracks() const;
  /// Throws std::invalid_argument on a duplicated non-SILENCE label.
  void validate() const;

  static ScenePrediction from_clues(const std::vector<ClueSet>& clues);
};

/// sdr(ref, est) - sdr(ref, mixture), both clamped.
double sdri(const AudioBuffer& ref, const AudioBuffer& est, const AudioBuffer& mixture);

struct CaSdri {
  double value = 0.0;
  bool empty = false;                  // truth and prediction both without classes
  std::map<ClassId, double> per_class;  // P_k over the union
};

/// Class-aware SDRi: mean of P_k over the union of true and predicted classes,
/// P_k = SDRi for classes in both sets and 0 otherwise.
CaSdri ca_sdri(const ReferenceScene& truth, const ScenePrediction& pred,
               const AudioBuffer& mixture);

/// Mean SNR improvement over classes present in both truth and prediction.
/// Throws when there is no such class.
double snri(const ReferenceScene& truth, const ScenePrediction& pred, const AudioBuffer& mixture);

double acc_mix(const std::vector<LabelSet>& truth, const std::vector<LabelSet>& pred);
double acc_src(const std::vector<TrackLabels>& truth, const std::vector<TrackLabels>& pred);

/// Orders the true track labels to line up with the predicted slots: a slot
/// whose label occurs in the truth gets that label, the remaining true labels
/// fill the other slots in their original order.
TrackLabels align_tracks(const TrackLabels& truth, const TrackLabels& pred);

struct SceneRow {
  std::string scene_id;
  double ca_sdri = 0.0;
  bool empty = false;
  std::optional<double> snri;  // absent when no class matched
  bool exact_match = false;
  std::size_t src_correct = 0;
  std::size_t src_total = kForegroundSlots;
  std::map<ClassId, double> per_class;
  LabelSet truth_labels;
  LabelSet pred_labels;
};

SceneRow evaluate_scene(const std::string& scene_id, const ReferenceScene& truth,
                        const TrackLabels& truth_tracks, const ScenePrediction& pred,
                        const AudioBuffer& mixture);

struct EvalReport {
  std::vector<SceneRow> rows;
  std::size_t scenes = 0;
  double mean_ca_sdri = 0.0;
  std::optional<double> mean_snri;  // over scenes with an SNRi value
  double acc_mix = 0.0;
  double acc_src = 0.0;
  std::size_t empty_scenes = 0;
  std::map<ClassId, double> per_class_mean;  // over scenes where k is in the union

  std::string to_json(const ClassVocabulary& vocab) const;
  static EvalReport from_json(const std::string& text, const ClassVocabulary& vocab);
  /// scene_id,ca_sdri,snri,exact_match,src_correct_count
  std::string to_csv() const;
};

EvalReport aggregate_report(std::vector<SceneRow> rows);

}  // namespace s5
