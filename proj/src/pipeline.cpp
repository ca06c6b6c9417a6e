#include "s5/pipeline.hpp"

#include <regex>
#include <stdexcept>

namespace s5 {

namespace {

template <typename F>
auto guarded(const std::string& where, F&& call) -> decltype(call()) {
  try {
    return call();
  } catch (const BackendError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(where + ": " + e.what());
  }
}

std::string where(int stage, std::size_t slot, const char* role) {
  return "stage " + std::to_string(stage + 1) + " " + role + " (slot " +
         std::to_string(slot + 1) + ")";
}

void check_output(const AudioBuffer& mixture, const AudioBuffer& out, const std::string& what) {
  if (!out.same_shape(mixture) || out.sample_rate() != mixture.sample_rate()) {
    throw BackendError(what + ": output not shaped like the mixture");
  }
}

void check_logits(const LogitVector& logits, const PipelineConfig& cfg, const std::string& what) {
  if (logits.size() != cfg.thresholds.size()) {
    throw BackendError(what + ": expected " + std::to_string(cfg.thresholds.size()) +
                       " logits, got " + std::to_string(logits.size()));
  }
}

}  // namespace

std::vector<double> ClueSet::class_clue() const {
  if (!decision.label) return {};
  std::vector<double> v(decision.logits.size(), 0.0);
  v.at(*decision.label) = 1.0;
  return v;
}

PipelineConfig PipelineConfig::from_mode(const std::string& mode, ThresholdTable thresholds) {
  static const std::regex pattern(R"(\s*FSS\s*(\d+)\s*\+\s*CP\s*(\d+)(-1)?\s*)",
                                  std::regex::icase);
  std::smatch m;
  if (!std::regex_match(mode, m, pattern)) {
    throw std::invalid_argument("unrecognized pipeline mode '" + mode + "'");
  }
  const int fss = std::stoi(m[1]);
  const int cp = std::stoi(m[2]);
  const bool cp_reclassified = m[3].matched;
  PipelineConfig cfg;
  cfg.thresholds = std::move(thresholds);
  if (fss < 1) throw std::invalid_argument("FSS index starts at 1");
  cfg.tse_iterations = fss - 1;
  if (fss == 1 && cp == 1 && !cp_reclassified) {
    cfg.stage1_labels = LabelSource::separator;
  } else if (cp == 1 && cp_reclassified) {
    cfg.classifier_stage_reuse = fss > 1;
  } else if (cp != fss || cp_reclassified) {
    throw std::invalid_argument("unsupported pipeline mode '" + mode + "'");
  }
  cfg.validate();
  return cfg;
}

std::string PipelineConfig::mode_name() const {
  const std::string fss = "FSS " + std::to_string(tse_iterations + 1);
  if (tse_iterations == 0 && stage1_labels == LabelSource::separator) return fss + " + CP 1";
  if (tse_iterations == 0 || classifier_stage_reuse) return fss + " + CP 1-1";
  return fss + " + CP " + std::to_string(tse_iterations + 1);
}

void PipelineConfig::validate() const {
  if (tse_iterations < 0) throw std::invalid_argument("tse_iterations must be >= 0");
  if (tse_iterations > kMaxTseIterations) {
    throw std::invalid_argument("tse_iterations " + std::to_string(tse_iterations) +
                                " exceeds the guard of " + std::to_string(kMaxTseIterations));
  }
  if (thresholds.size() < 2) throw std::invalid_argument("threshold table needs >= 2 classes");
}

std::vector<ClueSet> run_stage1(const AudioBuffer& mixture, const SeparatorBackend& sep,
                                const ClassifierBackend& clf, const PipelineConfig& cfg) {
  if (mixture.empty()) throw std::invalid_argument("empty mixture");
  const SeparationOutput out =
      guarded("stage 1 separator", [&] { return sep.separate(mixture); });
  if (out.stems.size() != kSeparatorOutputs) {
    throw BackendError("stage 1 separator: expected 6 stems, got " +
                       std::to_string(out.stems.size()));
  }
  for (const auto& s : out.stems) check_output(mixture, s, "stage 1 separator");

  std::vector<ClueSet> clues;
  for (std::size_t j = 0; j < kForegroundSlots; ++j) {
    const AudioBuffer& stem = out.stems[j];
    LogitVector logits;
    if (cfg.stage1_labels == LabelSource::separator) {
      logits = out.logits[j];
      check_logits(logits, cfg, "stage 1 separator class decoder");
    } else {
      const auto w = where(0, j, "classifier");
      logits = guarded(w, [&] { return clf.classify(stem, {0, j}); });
      check_logits(logits, cfg, w);
    }
    ClassDecision d = cfg.gate_mode == GateMode::energy
                          ? decide(logits, cfg.thresholds)
                          : guarded("stage 1 binary gate",
                                    [&] { return decide_binary(logits, out.activity[j]); });
    clues.push_back({stem, std::move(d)});
  }
  return clues;
}

std::vector<ClueSet> run_tse_stage(const AudioBuffer& mixture, std::span<const ClueSet> clues,
                                   const ExtractorBackend& ext, const ClassifierBackend& clf,
                                   const PipelineConfig& cfg, int stage) {
  std::vector<ClueSet> refined;
  refined.reserve(clues.size());
  for (std::size_t j = 0; j < clues.size(); ++j) {
    const ClueSet& clue = clues[j];
    if (clue.silent()) {
      refined.push_back(clue);
      continue;
    }
    const auto we = where(stage, j, "extractor");
    AudioBuffer wave = guarded(we, [&] { return ext.extract(mixture, clue, {stage, j}); });
    check_output(mixture, wave, we);
    ClassDecision d;
    if (cfg.classifier_stage_reuse) {
      d = clue.decision;
    } else {
      const auto wc = where(stage, j, "classifier");
      const LogitVector logits = guarded(wc, [&] { return clf.classify(wave, {stage, j}); });
      check_logits(logits, cfg, wc);
      d = decide(logits, cfg.thresholds);
    }
    refined.push_back({std::move(wave), std::move(d)});
  }
  return refined;
}

PipelineResult run_pipeline(const AudioBuffer& mixture, const Backends& backends,
                            const PipelineConfig& cfg) {
  cfg.validate();
  if (!backends.separator || !backends.classifier ||
      (cfg.tse_iterations > 0 && !backends.extractor)) {
    throw std::invalid_argument("run_pipeline: missing backend");
  }
  PipelineResult result;
  result.stages.push_back({run_stage1(mixture, *backends.separator, *backends.classifier, cfg)});
  for (int t = 1; t <= cfg.tse_iterations; ++t) {
    result.stages.push_back({run_tse_stage(mixture, result.stages.back().clues,
                                           *backends.extractor, *backends.classifier, cfg, t)});
  }
  return result;
}

std::vector<double> res_film(std::span<const double> features, std::span<const double> gamma,
                             std::span<const double> beta) {
  if (features.size() != gamma.size() || features.size() != beta.size()) {
    throw std::invalid_argument("res_film: length mismatch");
  }
  std::vector<double> out(features.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = features[i] + (gamma[i] * features[i] + beta[i]);
  }
  return out;
}

FeatureStack::FeatureStack(std::size_t c, std::size_t t, std::size_t f, std::vector<double> d)
    : channels(c), frames(t), bins(f), data(std::move(d)) {
  if (data.size() != channels * frames * bins) {
    throw std::invalid_argument("feature stack: data size does not match its extents");
  }
}

std::span<const double> FeatureStack::plane(std::size_t c) const {
  if (c >= channels) throw std::out_of_range("feature stack channel out of range");
  return std::span<const double>(data).subspan(c * frames * bins, frames * bins);
}

FeatureStack clue_concat(const FeatureStack& mixture, const FeatureStack& enrollment) {
  if (mixture.frames != enrollment.frames || mixture.bins != enrollment.bins) {
    throw std::invalid_argument("clue_concat: time/frequency extents differ");
  }
  std::vector<double> data = mixture.data;
  data.insert(data.end(), enrollment.data.begin(), enrollment.data.end());
  return FeatureStack(mixture.channels + enrollment.channels, mixture.frames, mixture.bins,
                      std::move(data));
}

}  // namespace s5
