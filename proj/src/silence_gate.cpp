#include "s5/silence_gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace s5 {

using nlohmann::json;

namespace {

ClassId argmax(std::span<const double> logits) {
  // std::max_element returns the first maximum, i.e. the lowest index on ties.
  return static_cast<ClassId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace

std::string label_name(const Label& label, const ClassVocabulary& vocab) {
  return label ? vocab.name(*label) : std::string(kSilenceName);
}

Label parse_label(const std::string& text, const ClassVocabulary& vocab) {
  if (text == kSilenceName) return std::nullopt;
  auto id = vocab.find(text);
  if (!id) throw std::invalid_argument("unknown class label '" + text + "'");
  return *id;
}

ThresholdTable::ThresholdTable(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (std::isnan(v)) throw std::invalid_argument("threshold is NaN");
  }
}

ThresholdTable ThresholdTable::uniform(std::size_t classes, double value) {
  return ThresholdTable(std::vector<double>(classes, value));
}

ThresholdTable ThresholdTable::disabled(std::size_t classes) {
  return uniform(classes, std::numeric_limits<double>::infinity());
}

std::string ThresholdTable::to_json(const ClassVocabulary& vocab) const {
  if (vocab.size() != values_.size()) {
    throw std::invalid_argument("threshold table size differs from vocabulary");
  }
  json j = json::object();
  for (std::size_t c = 0; c < values_.size(); ++c) {
    const double v = values_[c];
    if (std::isinf(v)) {
      j[vocab.name(c)] = v > 0 ? "inf" : "-inf";
    } else {
      j[vocab.name(c)] = v;
    }
  }
  return j.dump(2);
}

ThresholdTable ThresholdTable::from_json(const std::string& text, const ClassVocabulary& vocab) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed threshold table: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("threshold table must be a JSON object");
  std::vector<double> values(vocab.size());
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    const auto& name = vocab.name(c);
    if (!j.contains(name)) throw std::invalid_argument("threshold table lacks class " + name);
    const auto& v = j[name];
    if (v.is_number()) {
      values[c] = v.get<double>();
    } else if (v == "inf") {
      values[c] = std::numeric_limits<double>::infinity();
    } else if (v == "-inf") {
      values[c] = -std::numeric_limits<double>::infinity();
    } else {
      throw std::invalid_argument("threshold for " + name + " is not a number");
    }
  }
  for (const auto& [key, _] : j.items()) {
    if (!vocab.find(key)) throw std::invalid_argument("threshold table has unknown class " + key);
  }
  return ThresholdTable(std::move(values));
}

ClassDecision decide(std::span<const double> logits, const ThresholdTable& thresholds) {
  if (logits.size() != thresholds.size()) {
    throw std::invalid_argument("decide: logits length differs from threshold table");
  }
  ClassDecision d;
  d.logits.assign(logits.begin(), logits.end());
  d.energy = energy_score(logits);
  const ClassId top = argmax(logits);
  d.threshold_used = thresholds[top];
  if (!(d.energy > thresholds[top])) d.label = top;
  return d;
}

bool binary_silence(double p_active) {
  if (!(p_active >= 0.0 && p_active <= 1.0)) {
    throw std::invalid_argument("activity probability must lie in [0, 1]");
  }
  return !(p_active > 0.5);
}

ClassDecision decide_binary(std::span<const double> logits, double p_active) {
  ClassDecision d;
  d.logits.assign(logits.begin(), logits.end());
  d.energy = energy_score(logits);
  if (!binary_silence(p_active)) d.label = argmax(logits);
  return d;
}

BalancedScore balanced_accuracy(std::span<const double> energies, const std::vector<bool>& silent,
                                double threshold) {
  if (energies.size() != silent.size()) {
    throw std::invalid_argument("balanced_accuracy: size mismatch");
  }
  std::uint64_t pos = 0, neg = 0, tp = 0, tn = 0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const bool predicted_silent = energies[i] > threshold;
    if (silent[i]) {
      ++pos;
      tp += predicted_silent ? 1 : 0;
    } else {
      ++neg;
      tn += predicted_silent ? 0 : 1;
    }
  }
  if (pos > 0 && neg > 0) return {tp * neg + tn * pos, 2 * pos * neg};
  if (pos > 0) return {tp, pos};
  if (neg > 0) return {tn, neg};
  throw std::invalid_argument("balanced_accuracy: no samples");
}

ThresholdChoice best_threshold(std::span<const double> energies, const std::vector<bool>& silent) {
  if (energies.empty()) throw std::invalid_argument("best_threshold: no samples");
  std::vector<double> sorted(energies.begin(), energies.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<double> candidates;
  candidates.push_back(sorted.front() - kSweepPadding);
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  }
  candidates.push_back(sorted.back() + kSweepPadding);

  ThresholdChoice best{candidates.front(), balanced_accuracy(energies, silent, candidates.front())};
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto score = balanced_accuracy(energies, silent, candidates[i]);
    if (best.score < score) best = {candidates[i], score};
  }
  return best;
}

Calibration calibrate_thresholds(std::span<const CalibrationSample> samples) {
  if (samples.empty()) throw std::invalid_argument("calibrate_thresholds: no samples");
  const std::size_t classes = samples.front().logits.size();
  if (classes < 2) throw std::invalid_argument("calibrate_thresholds: need at least 2 classes");

  std::vector<double> energies;
  std::vector<bool> silent;
  std::vector<ClassId> predicted;
  bool any_silent = false, any_active = false;
  for (const auto& s : samples) {
    if (s.logits.size() != classes) {
      throw std::invalid_argument("calibrate_thresholds: logits of unequal length");
    }
    energies.push_back(energy_score(s.logits));
    silent.push_back(s.silence);
    predicted.push_back(argmax(s.logits));
    (s.silence ? any_silent : any_active) = true;
  }
  if (!any_silent || !any_active) {
    throw std::invalid_argument(
        "calibrate_thresholds: degenerate input, need both silent and active samples");
  }

  const ThresholdChoice global = best_threshold(energies, silent);
  std::vector<double> table(classes, global.threshold);
  std::vector<std::optional<BalancedScore>> per_class(classes);
  for (ClassId c = 0; c < classes; ++c) {
    std::vector<double> e;
    std::vector<bool> s;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (predicted[i] != c) continue;
      e.push_back(energies[i]);
      s.push_back(silent[i]);
    }
    if (e.empty()) continue;
    const auto choice = best_threshold(e, s);
    table[c] = choice.threshold;
    per_class[c] = choice.score;
  }
  return {ThresholdTable(std::move(table)), std::move(per_class), global};
}

}  // namespace s5
