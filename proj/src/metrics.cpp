#include "s5/metrics.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace s5 {

using nlohmann::json;

LabelSet ReferenceScene::labels() const {
  LabelSet out;
  for (const auto& [k, _] : stems) out.insert(k);
  return out;
}

LabelSet ScenePrediction::labels() const {
  LabelSet out;
  for (const auto& s : slots) {
    if (s.label) out.insert(*s.label);
  }
  return out;
}

TrackLabels ScenePrediction::tracks() const {
  TrackLabels t;
  for (std::size_t j = 0; j < slots.size(); ++j) t[j] = slots[j].label;
  return t;
}

void ScenePrediction::validate() const {
  LabelSet seen;
  for (const auto& s : slots) {
    if (s.label && !seen.insert(*s.label).second) {
      throw std::invalid_argument("prediction repeats class " + std::to_string(*s.label) +
                                  "; class-based matching is ambiguous");
    }
  }
}

ScenePrediction ScenePrediction::from_clues(const std::vector<ClueSet>& clues) {
  if (clues.size() != kForegroundSlots) {
    throw std::invalid_argument("a scene prediction needs exactly 3 slots");
  }
  ScenePrediction p;
  for (std::size_t j = 0; j < kForegroundSlots; ++j) {
    p.slots[j] = {clues[j].enrollment, clues[j].decision.label};
  }
  return p;
}

double sdri(const AudioBuffer& ref, const AudioBuffer& est, const AudioBuffer& mixture) {
  return sdr(ref, est) - sdr(ref, mixture);
}

namespace {

const AudioBuffer& predicted_stem(const ScenePrediction& pred, ClassId k) {
  for (const auto& s : pred.slots) {
    if (s.label == k) return s.waveform;
  }
  throw std::logic_error("class missing from prediction");
}

}  // namespace

CaSdri ca_sdri(const ReferenceScene& truth, const ScenePrediction& pred,
               const AudioBuffer& mixture) {
  pred.validate();
  const LabelSet t = truth.labels();
  const LabelSet p = pred.labels();
  LabelSet all = t;
  all.insert(p.begin(), p.end());

  CaSdri out;
  if (all.empty()) {
    out.empty = true;
    return out;
  }
  double sum = 0.0;
  for (ClassId k : all) {
    double pk = 0.0;
    if (t.count(k) && p.count(k)) {
      pk = sdri(truth.stems.at(k), predicted_stem(pred, k), mixture);
    }
    out.per_class[k] = pk;
    sum += pk;
  }
  out.value = sum / static_cast<double>(all.size());
  return out;
}

double snri(const ReferenceScene& truth, const ScenePrediction& pred, const AudioBuffer& mixture) {
  pred.validate();
  const LabelSet p = pred.labels();
  double sum = 0.0;
  std::size_t matched = 0;
  for (const auto& [k, stem] : truth.stems) {
    if (!p.count(k)) continue;
    sum += sdr(stem, predicted_stem(pred, k)) - sdr(stem, mixture);
    ++matched;
  }
  if (matched == 0) throw std::invalid_argument("snri: no class matched between truth and prediction");
  return sum / static_cast<double>(matched);
}

double acc_mix(const std::vector<LabelSet>& truth, const std::vector<LabelSet>& pred) {
  if (truth.size() != pred.size()) throw std::invalid_argument("acc_mix: length mismatch");
  if (truth.empty()) throw std::invalid_argument("acc_mix: no scenes");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double acc_src(const std::vector<TrackLabels>& truth, const std::vector<TrackLabels>& pred) {
  if (truth.size() != pred.size()) throw std::invalid_argument("acc_src: shape mismatch");
  if (truth.empty()) throw std::invalid_argument("acc_src: no scenes");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = 0; j < kForegroundSlots; ++j) hits += truth[i][j] == pred[i][j] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size() * kForegroundSlots);
}

TrackLabels align_tracks(const TrackLabels& truth, const TrackLabels& pred) {
  std::vector<Label> pool(truth.begin(), truth.end());
  TrackLabels out;
  std::array<bool, kForegroundSlots> filled{};
  for (std::size_t j = 0; j < kForegroundSlots; ++j) {
    auto it = std::find(pool.begin(), pool.end(), pred[j]);
    if (it != pool.end()) {
      out[j] = *it;
      filled[j] = true;
      pool.erase(it);
    }
  }
  auto next = pool.begin();
  for (std::size_t j = 0; j < kForegroundSlots; ++j) {
    if (!filled[j]) out[j] = *next++;
  }
  return out;
}

SceneRow evaluate_scene(const std::string& scene_id, const ReferenceScene& truth,
                        const TrackLabels& truth_tracks, const ScenePrediction& pred,
                        const AudioBuffer& mixture) {
  SceneRow row;
  row.scene_id = scene_id;
  const CaSdri ca = ca_sdri(truth, pred, mixture);
  row.ca_sdri = ca.value;
  row.empty = ca.empty;
  row.per_class = ca.per_class;
  row.truth_labels = truth.labels();
  row.pred_labels = pred.labels();
  row.exact_match = row.truth_labels == row.pred_labels;
  bool any_match = false;
  for (ClassId k : row.pred_labels) any_match = any_match || row.truth_labels.count(k);
  if (any_match) row.snri = snri(truth, pred, mixture);
  const TrackLabels predicted = pred.tracks();
  const TrackLabels aligned = align_tracks(truth_tracks, predicted);
  for (std::size_t j = 0; j < kForegroundSlots; ++j) {
    row.src_correct += aligned[j] == predicted[j] ? 1 : 0;
  }
  return row;
}

EvalReport aggregate_report(std::vector<SceneRow> rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate_report: no scenes");
  EvalReport r;
  r.scenes = rows.size();
  double ca = 0.0, sn = 0.0;
  std::size_t sn_count = 0, exact = 0, correct = 0, total = 0;
  std::map<ClassId, std::pair<double, std::size_t>> per_class;
  for (const auto& row : rows) {
    ca += row.ca_sdri;
    if (row.snri) {
      sn += *row.snri;
      ++sn_count;
    }
    exact += row.exact_match ? 1 : 0;
    correct += row.src_correct;
    total += row.src_total;
    r.empty_scenes += row.empty ? 1 : 0;
    for (const auto& [k, pk] : row.per_class) {
      per_class[k].first += pk;
      per_class[k].second += 1;
    }
  }
  const auto n = static_cast<double>(rows.size());
  r.mean_ca_sdri = ca / n;
  if (sn_count > 0) r.mean_snri = sn / static_cast<double>(sn_count);
  r.acc_mix = static_cast<double>(exact) / n;
  r.acc_src = static_cast<double>(correct) / static_cast<double>(total);
  for (const auto& [k, acc] : per_class) {
    r.per_class_mean[k] = acc.first / static_cast<double>(acc.second);
  }
  r.rows = std::move(rows);
  return r;
}

std::string EvalReport::to_json(const ClassVocabulary& vocab) const {
  const auto names = [&](const LabelSet& s) {
    json a = json::array();
    for (ClassId k : s) a.push_back(vocab.name(k));
    return a;
  };
  const auto by_name = [&](const std::map<ClassId, double>& m) {
    json o = json::object();
    for (const auto& [k, v] : m) o[vocab.name(k)] = v;
    return o;
  };
  json scenes_j = json::array();
  for (const auto& row : rows) {
    scenes_j.push_back({{"scene_id", row.scene_id},
                        {"ca_sdri", row.ca_sdri},
                        {"empty", row.empty},
                        {"snri", row.snri ? json(*row.snri) : json(nullptr)},
                        {"exact_match", row.exact_match},
                        {"src_correct_count", row.src_correct},
                        {"src_total", row.src_total},
                        {"per_class", by_name(row.per_class)},
                        {"truth_labels", names(row.truth_labels)},
                        {"pred_labels", names(row.pred_labels)}});
  }
  json j = {{"aggregate",
             {{"scenes", scenes},
              {"ca_sdri", mean_ca_sdri},
              {"snri", mean_snri ? json(*mean_snri) : json(nullptr)},
              {"acc_mix", acc_mix},
              {"acc_src", acc_src},
              {"empty_scenes", empty_scenes},
              {"per_class_ca_sdri", by_name(per_class_mean)}}},
            {"scenes", scenes_j}};
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text, const ClassVocabulary& vocab) {
  const auto id = [&](const std::string& name) {
    auto k = vocab.find(name);
    if (!k) throw std::invalid_argument("report names unknown class " + name);
    return *k;
  };
  EvalReport r;
  try {
    const json j = json::parse(text);
    std::vector<SceneRow> rows;
    for (const auto& s : j.at("scenes")) {
      SceneRow row;
      row.scene_id = s.at("scene_id").get<std::string>();
      row.ca_sdri = s.at("ca_sdri").get<double>();
      row.empty = s.at("empty").get<bool>();
      if (!s.at("snri").is_null()) row.snri = s["snri"].get<double>();
      row.exact_match = s.at("exact_match").get<bool>();
      row.src_correct = s.at("src_correct_count").get<std::size_t>();
      row.src_total = s.at("src_total").get<std::size_t>();
      for (const auto& [name, v] : s.at("per_class").items()) row.per_class[id(name)] = v.get<double>();
      for (const auto& n : s.at("truth_labels")) row.truth_labels.insert(id(n.get<std::string>()));
      for (const auto& n : s.at("pred_labels")) row.pred_labels.insert(id(n.get<std::string>()));
      rows.push_back(std::move(row));
    }
    r = aggregate_report(std::move(rows));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "scene_id,ca_sdri,snri,exact_match,src_correct_count\n";
  for (const auto& row : rows) {
    os << row.scene_id << ',' << row.ca_sdri << ',';
    if (row.snri) os << *row.snri;
    os << ',' << (row.exact_match ? 1 : 0) << ',' << row.src_correct << '\n';
  }
  return os.str();
}

}  // namespace s5
