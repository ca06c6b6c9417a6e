#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s5/audio.hpp"
#include "s5/losses.hpp"
#include "s5/manifest.hpp"

namespace s5 {

/// A class id, or std::nullopt for SILENCE.
using Label = std::optional<ClassId>;

std::string label_name(const Label& label, const ClassVocabulary& vocab);
/// Inverse of label_name; "SILENCE" maps to std::nullopt.
Label parse_label(const std::string& text, const ClassVocabulary& vocab);

inline constexpr const char* kSilenceName = "SILENCE";

struct ClassDecision {
  Label label;
  LogitVector logits;
  double energy = 0.0;
  std::optional<double> threshold_used;

  bool silent() const { return !label.has_value(); }
  friend bool operator==(const ClassDecision&, const ClassDecision&) = default;
};

/// Halfway between the active (-6) and silent (-1) training margins.
inline constexpr double kDefaultSilenceThreshold = -3.5;

/// Per-class energy thresholds; energy above the threshold of the predicted
/// class means silence.
class ThresholdTable {
 public:
  ThresholdTable() = default;
  explicit ThresholdTable(std::vector<double> values);

  static ThresholdTable uniform(std::size_t classes, double value = kDefaultSilenceThreshold);
  /// +inf everywhere: the gate never fires.
  static ThresholdTable disabled(std::size_t classes);

  std::size_t size() const { return values_.size(); }
  double operator[](ClassId c) const { return values_.at(c); }
  const std::vector<double>& values() const { return values_; }

  /// {class_name: threshold}; infinities are written as "inf" / "-inf".
  std::string to_json(const ClassVocabulary& vocab) const;
  /// Every vocabulary class must be present.
  static ThresholdTable from_json(const std::string& text, const ClassVocabulary& vocab);

 private:
  std::vector<double> values_;
};

/// argmax (lowest index on ties), then SILENCE iff energy > threshold[argmax].
ClassDecision decide(std::span<const double> logits, const ThresholdTable& thresholds);

/// Binary activity branch: true (silent) unless p_active > 0.5.
bool binary_silence(double p_active);

/// argmax label, silence decided by the binary activity branch.
ClassDecision decide_binary(std::span<const double> logits, double p_active);

struct CalibrationSample {
  LogitVector logits;
  bool silence = false;
};

/// Balanced accuracy as an exact fraction; recalls are averaged over the
/// kinds (silent / active) that are present.
struct BalancedScore {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator<(const BalancedScore& a, const BalancedScore& b) {
    return static_cast<unsigned __int128>(a.num) * b.den <
           static_cast<unsigned __int128>(b.num) * a.den;
  }
  friend bool operator==(const BalancedScore& a, const BalancedScore& b) {
    return static_cast<unsigned __int128>(a.num) * b.den ==
           static_cast<unsigned __int128>(b.num) * a.den;
  }
};

/// Score of the rule "energy > threshold => silence".
BalancedScore balanced_accuracy(std::span<const double> energies, const std::vector<bool>& silent,
                                double threshold);

struct ThresholdChoice {
  double threshold = 0.0;
  BalancedScore score;
};

/// Offset of the sentinel candidates placed below/above the observed range.
inline constexpr double kSweepPadding = 1.0;

/// Exhaustive sweep over {min - 1, midpoints of sorted distinct energies,
/// max + 1}; ties go to the lowest candidate.
ThresholdChoice best_threshold(std::span<const double> energies, const std::vector<bool>& silent);

struct Calibration {
  ThresholdTable table;
  std::vector<std::optional<BalancedScore>> per_class;  // nullopt: no samples, global used
  ThresholdChoice global;
};

/// Per-class sweep over the samples whose argmax is that class; classes
/// with no samples get the global threshold.
Calibration calibrate_thresholds(std::span<const CalibrationSample> samples);

}  // namespace s5
