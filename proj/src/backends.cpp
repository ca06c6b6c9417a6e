#include "s5/backends.hpp"

#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "s5/io.hpp"
#include "s5/random.hpp"

namespace s5 {

using nlohmann::json;

std::shared_ptr<const SceneTruth> SceneTruth::load(const SceneManifest& manifest,
                                                   std::size_t num_classes) {
  validate(manifest, num_classes);
  auto t = std::make_shared<SceneTruth>();
  t->manifest = manifest;
  t->audio = load_scene(manifest);
  t->num_classes = num_classes;
  return t;
}

std::vector<AudioBuffer> SceneTruth::role_ordered_stems() const {
  const AudioBuffer silence = AudioBuffer::zeros_like(audio.mixture);
  std::vector<AudioBuffer> fg, intf, noise;
  for (std::size_t i = 0; i < manifest.stems.size(); ++i) {
    switch (manifest.stems[i].role) {
      case Role::foreground: fg.push_back(audio.stems[i]); break;
      case Role::interference: intf.push_back(audio.stems[i]); break;
      case Role::noise: noise.push_back(audio.stems[i]); break;
    }
  }
  fg.resize(kForegroundSlots, silence);
  intf.resize(kMaxInterference, silence);
  std::vector<AudioBuffer> out = std::move(fg);
  out.insert(out.end(), intf.begin(), intf.end());
  out.insert(out.end(), noise.begin(), noise.end());
  return out;
}

std::vector<std::optional<ClassId>> SceneTruth::slot_classes() const {
  std::vector<std::optional<ClassId>> out;
  for (ClassId c : manifest.foreground_classes()) out.emplace_back(c);
  out.resize(kForegroundSlots);
  return out;
}

const AudioBuffer* SceneTruth::stem_of_class(ClassId cls) const {
  for (std::size_t i = 0; i < manifest.stems.size(); ++i) {
    const auto& s = manifest.stems[i];
    if (s.role == Role::foreground && s.class_id == cls) return &audio.stems[i];
  }
  return nullptr;
}

namespace {

LogitVector oracle_logits(const SceneTruth& truth, const AudioBuffer& wave) {
  LogitVector logits(truth.num_classes, kOracleLogitFloor);
  const double we = energy(wave);
  if (we == 0.0) return logits;
  for (std::size_t i = 0; i < truth.manifest.stems.size(); ++i) {
    const auto& entry = truth.manifest.stems[i];
    if (entry.role != Role::foreground) continue;
    const AudioBuffer& stem = truth.audio.stems[i];
    const double se = energy(stem);
    if (se == 0.0) continue;
    const double corr = dot(wave, stem) / std::sqrt(we * se);
    logits[*entry.class_id] = kOracleLogitFloor + kOracleLogitSpan * std::max(0.0, corr);
  }
  return logits;
}

class OracleClassifier final : public ClassifierBackend {
 public:
  explicit OracleClassifier(std::shared_ptr<const SceneTruth> truth) : truth_(std::move(truth)) {}
  LogitVector classify(const AudioBuffer& waveform, const StageSlot&) const override {
    return oracle_logits(*truth_, waveform);
  }

 private:
  std::shared_ptr<const SceneTruth> truth_;
};

class OracleSeparator final : public SeparatorBackend {
 public:
  OracleSeparator(std::shared_ptr<const SceneTruth> truth, std::optional<double> snr,
                  std::uint64_t seed)
      : truth_(std::move(truth)) {
    const auto clean = truth_->role_ordered_stems();
    for (std::size_t j = 0; j < kForegroundSlots; ++j) {
      output_.logits[j] = oracle_logits(*truth_, clean[j]);
      output_.activity[j] = energy(clean[j]) > 0.0 ? 1.0 : 0.0;
    }
    if (!snr) {
      output_.stems = clean;
      return;
    }
    const std::uint64_t base = stable_hash(truth_->manifest.scene_id, seed);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const double se = energy(clean[i]);
      if (se == 0.0) {
        output_.stems.push_back(clean[i]);
        continue;
      }
      Rng rng(base + i);
      std::vector<double> noise(clean[i].size());
      for (double& x : noise) x = rng.normal();
      const AudioBuffer n(std::move(noise), clean[i].channels(), clean[i].sample_rate());
      const double scale = std::sqrt(se / (std::pow(10.0, *snr / 10.0) * energy(n)));
      output_.stems.push_back(add_scaled(clean[i], n, scale));
    }
  }

  SeparationOutput separate(const AudioBuffer& mixture) const override {
    if (!mixture.same_shape(truth_->audio.mixture)) {
      throw std::invalid_argument("oracle separator: mixture does not belong to this scene");
    }
    return output_;
  }

 private:
  std::shared_ptr<const SceneTruth> truth_;
  SeparationOutput output_;
};

class OracleExtractor final : public ExtractorBackend {
 public:
  OracleExtractor(std::shared_ptr<const SceneTruth> truth, bool halving)
      : truth_(std::move(truth)), halving_(halving) {}

  AudioBuffer extract(const AudioBuffer& mixture, const ClueSet& clue,
                      const StageSlot&) const override {
    const AudioBuffer* stem = clue.decision.label ? truth_->stem_of_class(*clue.decision.label)
                                                  : nullptr;
    const AudioBuffer target = stem ? *stem : AudioBuffer::zeros_like(mixture);
    if (!halving_) return target;
    return add_scaled(target, subtract(clue.enrollment, target), 1.0 / std::sqrt(2.0));
  }

 private:
  std::shared_ptr<const SceneTruth> truth_;
  bool halving_;
};

// --- file-backed replay ---------------------------------------------------

struct FileData {
  std::string scene_id;
  std::vector<AudioBuffer> stems;
  SeparationOutput separation;
  std::vector<std::array<std::optional<LogitVector>, kForegroundSlots>> classifier;
  std::map<std::pair<int, std::size_t>, AudioBuffer> extracted;
};

class FileSeparator final : public SeparatorBackend {
 public:
  explicit FileSeparator(std::shared_ptr<const FileData> d) : d_(std::move(d)) {}
  SeparationOutput separate(const AudioBuffer& mixture) const override {
    for (const auto& s : d_->separation.stems) {
      if (!s.same_shape(mixture)) {
        throw std::invalid_argument("scene " + d_->scene_id +
                                    ": stored stems do not match the mixture length");
      }
    }
    return d_->separation;
  }

 private:
  std::shared_ptr<const FileData> d_;
};

class FileClassifier final : public ClassifierBackend {
 public:
  explicit FileClassifier(std::shared_ptr<const FileData> d) : d_(std::move(d)) {}
  LogitVector classify(const AudioBuffer&, const StageSlot& at) const override {
    const auto stage = static_cast<std::size_t>(at.stage);
    if (stage >= d_->classifier.size() || at.slot >= kForegroundSlots ||
        !d_->classifier[stage][at.slot]) {
      throw std::invalid_argument("scene " + d_->scene_id + ": logits.json has no classifier " +
                                  "logits for stage " + std::to_string(at.stage + 1) +
                                  " slot " + std::to_string(at.slot + 1));
    }
    return *d_->classifier[stage][at.slot];
  }

 private:
  std::shared_ptr<const FileData> d_;
};

class FileExtractor final : public ExtractorBackend {
 public:
  explicit FileExtractor(std::shared_ptr<const FileData> d) : d_(std::move(d)) {}
  AudioBuffer extract(const AudioBuffer& mixture, const ClueSet&,
                      const StageSlot& at) const override {
    auto it = d_->extracted.find({at.stage, at.slot});
    if (it == d_->extracted.end()) {
      throw std::invalid_argument("scene " + d_->scene_id + ": missing tse" +
                                  std::to_string(at.stage) + "_fg" +
                                  std::to_string(at.slot + 1) + ".wav");
    }
    if (!it->second.same_shape(mixture)) {
      throw std::invalid_argument("scene " + d_->scene_id +
                                  ": stored extraction does not match the mixture length");
    }
    return it->second;
  }

 private:
  std::shared_ptr<const FileData> d_;
};

const std::vector<std::string>& separator_files() {
  static const std::vector<std::string> names{"fg1.wav",   "fg2.wav",   "fg3.wav",
                                              "intf1.wav", "intf2.wav", "noise.wav"};
  return names;
}

LogitVector read_logits(const json& j, std::size_t classes, const std::string& scene) {
  auto v = j.get<LogitVector>();
  if (v.size() != classes) {
    throw IoError("scene " + scene + ": logits.json has " + std::to_string(v.size()) +
                  " logits, expected " + std::to_string(classes));
  }
  return v;
}

}  // namespace

std::shared_ptr<const ClassifierBackend> make_oracle_classifier(
    std::shared_ptr<const SceneTruth> truth) {
  return std::make_shared<OracleClassifier>(std::move(truth));
}

std::shared_ptr<const SeparatorBackend> make_oracle_separator(
    std::shared_ptr<const SceneTruth> truth, std::optional<double> degradation_snr,
    std::uint64_t seed) {
  if (degradation_snr && !std::isfinite(*degradation_snr)) {
    throw std::invalid_argument("degradation SNR must be finite");
  }
  return std::make_shared<OracleSeparator>(std::move(truth), degradation_snr, seed);
}

std::shared_ptr<const ExtractorBackend> make_oracle_extractor(
    std::shared_ptr<const SceneTruth> truth) {
  return std::make_shared<OracleExtractor>(std::move(truth), false);
}

std::shared_ptr<const ExtractorBackend> make_halving_extractor(
    std::shared_ptr<const SceneTruth> truth) {
  return std::make_shared<OracleExtractor>(std::move(truth), true);
}

FileBackend make_file_backend(const std::filesystem::path& dir, const std::string& scene_id,
                              int sample_rate, std::size_t num_classes) {
  namespace fs = std::filesystem;
  const fs::path root = dir / scene_id;
  const auto fail = [&](const std::string& why) { return IoError("scene " + scene_id + ": " + why); };
  if (!fs::is_directory(root)) throw fail("missing directory " + root.string());

  static const std::regex tse_name(R"(tse([1-9][0-9]*)_fg([1-3])\.wav)");
  std::set<std::string> present;
  for (const auto& e : fs::directory_iterator(root)) present.insert(e.path().filename().string());
  for (const auto& name : separator_files()) {
    if (!present.count(name)) throw fail("missing file " + name);
  }
  if (!present.count("logits.json")) throw fail("missing logits file logits.json");

  auto d = std::make_shared<FileData>();
  d->scene_id = scene_id;
  const auto load = [&](const std::string& name) {
    AudioBuffer b = read_wav(root / name);
    if (b.sample_rate() != sample_rate) throw fail("sample-rate mismatch in " + name);
    return b;
  };
  for (const auto& name : present) {
    std::smatch m;
    if (name == "logits.json" ||
        std::find(separator_files().begin(), separator_files().end(), name) !=
            separator_files().end()) {
      continue;
    }
    if (std::regex_match(name, m, tse_name)) {
      d->extracted[{std::stoi(m[1]), static_cast<std::size_t>(std::stoi(m[2]) - 1)}] = load(name);
      continue;
    }
    throw fail("unexpected file " + name);
  }
  for (const auto& name : separator_files()) d->separation.stems.push_back(load(name));
  for (const auto& s : d->separation.stems) {
    if (!s.same_shape(d->separation.stems.front())) throw fail("stems differ in length");
  }

  try {
    const json j = json::parse(read_file(root / "logits.json"));
    const auto& sep = j.at("separator");
    const auto& sl = sep.at("logits");
    const auto& act = sep.at("activity");
    if (sl.size() != kForegroundSlots || act.size() != kForegroundSlots) {
      throw fail("logits.json separator block needs 3 slots");
    }
    for (std::size_t s = 0; s < kForegroundSlots; ++s) {
      d->separation.logits[s] = read_logits(sl[s], num_classes, scene_id);
      d->separation.activity[s] = act[s].get<double>();
    }
    for (const auto& stage : j.value("classifier", json::array())) {
      if (stage.size() != kForegroundSlots) throw fail("logits.json classifier stage needs 3 slots");
      std::array<std::optional<LogitVector>, kForegroundSlots> row;
      for (std::size_t s = 0; s < kForegroundSlots; ++s) {
        if (!stage[s].is_null()) row[s] = read_logits(stage[s], num_classes, scene_id);
      }
      d->classifier.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw fail(std::string("malformed logits.json: ") + e.what());
  }

  return {std::make_shared<FileSeparator>(d), std::make_shared<FileClassifier>(d),
          std::make_shared<FileExtractor>(d)};
}

void write_oracle_dump(const std::filesystem::path& dir, const SceneTruth& truth,
                       int iterations) {
  const auto root = dir / truth.manifest.scene_id;
  const auto stems = truth.role_ordered_stems();
  for (std::size_t i = 0; i < stems.size(); ++i) {
    write_wav(root / separator_files()[i], stems[i]);
  }
  json sep_logits = json::array();
  json activity = json::array();
  json stage_logits = json::array();
  for (std::size_t j = 0; j < kForegroundSlots; ++j) {
    const auto l = oracle_logits(truth, stems[j]);
    sep_logits.push_back(l);
    stage_logits.push_back(l);
    activity.push_back(energy(stems[j]) > 0.0 ? 1.0 : 0.0);
  }
  json classifier = json::array();
  for (int t = 0; t <= iterations; ++t) classifier.push_back(stage_logits);
  const json j = {{"separator", {{"logits", sep_logits}, {"activity", activity}}},
                  {"classifier", classifier}};
  write_file_atomic(root / "logits.json", j.dump() + "\n");
  for (int t = 1; t <= iterations; ++t) {
    for (std::size_t s = 0; s < kForegroundSlots; ++s) {
      if (energy(stems[s]) == 0.0) continue;
      write_wav(root / ("tse" + std::to_string(t) + "_fg" + std::to_string(s + 1) + ".wav"),
                stems[s]);
    }
  }
}

BackendSpec BackendSpec::parse(const std::string& text) {
  BackendSpec b;
  if (text == "oracle") return b;
  const std::string degraded = "oracle-degraded:";
  const std::string files = "files:";
  if (text.rfind(degraded, 0) == 0) {
    b.kind = Kind::oracle_degraded;
    const std::string num = text.substr(degraded.size());
    std::size_t used = 0;
    try {
      b.snr_db = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != num.size() || !std::isfinite(b.snr_db)) {
      throw std::invalid_argument("bad degradation SNR in backend '" + text + "'");
    }
    return b;
  }
  if (text.rfind(files, 0) == 0 && text.size() > files.size()) {
    b.kind = Kind::files;
    b.dir = text.substr(files.size());
    return b;
  }
  throw std::invalid_argument("unknown backend '" + text +
                              "' (expected oracle, oracle-degraded:SNR or files:DIR)");
}

std::string BackendSpec::to_string() const {
  switch (kind) {
    case Kind::oracle: return "oracle";
    case Kind::oracle_degraded: {
      json j = snr_db;  // shortest round-trip representation
      return "oracle-degraded:" + j.dump();
    }
    case Kind::files: return "files:" + dir.string();
  }
  return {};
}

Backends make_backends(const BackendSpec& spec, const SceneManifest& manifest,
                       std::size_t num_classes, std::uint64_t seed) {
  if (spec.kind == BackendSpec::Kind::files) {
    return make_file_backend(spec.dir, manifest.scene_id, manifest.sample_rate, num_classes)
        .bundle();
  }
  auto truth = SceneTruth::load(manifest, num_classes);
  if (spec.kind == BackendSpec::Kind::oracle) {
    return {make_oracle_separator(truth), make_oracle_classifier(truth),
            make_oracle_extractor(truth)};
  }
  return {make_oracle_separator(truth, spec.snr_db, seed), make_oracle_classifier(truth),
          make_halving_extractor(truth)};
}

}  // namespace s5
