#include "s5/batch.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "s5/error.hpp"
#include "s5/io.hpp"

namespace s5 {

using nlohmann::json;

std::size_t default_workers() {
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

json decision_json(const ClassDecision& d, const ClassVocabulary& vocab) {
  return {{"label", label_name(d.label, vocab)},
          {"energy", d.energy},
          {"threshold", d.threshold_used && std::isfinite(*d.threshold_used)
                            ? json(*d.threshold_used)
                            : json(nullptr)}};
}

std::string slot_file(std::size_t j) { return "fg" + std::to_string(j + 1) + ".wav"; }

}  // namespace

std::string decisions_line(const std::string& scene_id, const PipelineResult& result,
                           const PipelineConfig& cfg, const ClassVocabulary& vocab) {
  json stages = json::array();
  for (const auto& st : result.stages) {
    json row = json::array();
    for (const auto& c : st.clues) row.push_back(decision_json(c.decision, vocab));
    stages.push_back(std::move(row));
  }
  json final_slots = json::array();
  const auto& fin = result.final_clues();
  for (std::size_t j = 0; j < fin.size(); ++j) {
    json d = decision_json(fin[j].decision, vocab);
    d["path"] = scene_id + "/" + slot_file(j);
    final_slots.push_back(std::move(d));
  }
  json j = {{"scene_id", scene_id},
            {"mode", cfg.mode_name()},
            {"stages", std::move(stages)},
            {"final", std::move(final_slots)}};
  return j.dump();
}

std::vector<PipelineResult> run_batch(const std::vector<SceneManifest>& scenes,
                                      const BackendSpec& backend, const PipelineConfig& cfg,
                                      const ClassVocabulary& vocab, std::uint64_t seed,
                                      std::size_t workers, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (cfg.thresholds.size() != vocab.size()) {
    throw std::invalid_argument("threshold table size differs from vocabulary");
  }
  std::vector<PipelineResult> results(scenes.size());
  std::vector<std::string> lines(scenes.size());
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    const auto& m = scenes[i];
    try {
      validate(m, vocab.size());
      const Backends b = make_backends(backend, m, vocab.size(), seed);
      const AudioBuffer mixture = read_wav(m.base_dir / m.mixture_path);
      results[i] = run_pipeline(mixture, b, cfg);
      const auto& fin = results[i].final_clues();
      for (std::size_t j = 0; j < fin.size(); ++j) {
        write_wav(out_dir / m.scene_id / slot_file(j), fin[j].enrollment);
      }
      lines[i] = decisions_line(m.scene_id, results[i], cfg, vocab);
    } catch (const std::exception& e) {
      throw Error("scene " + m.scene_id + ": " + e.what());
    }
  });
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_file_atomic(out_dir / "decisions.jsonl", text);
  return results;
}

std::map<std::string, ScenePrediction> read_predictions(const std::filesystem::path& results_dir,
                                                        const ClassVocabulary& vocab) {
  std::ifstream in(results_dir / "decisions.jsonl");
  if (!in) throw IoError("cannot open " + (results_dir / "decisions.jsonl").string());
  std::map<std::string, ScenePrediction> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto id = j.at("scene_id").get<std::string>();
      const auto& fin = j.at("final");
      if (fin.size() != kForegroundSlots) throw IoError("scene " + id + ": needs 3 final slots");
      ScenePrediction p;
      for (std::size_t s = 0; s < kForegroundSlots; ++s) {
        p.slots[s].label = parse_label(fin[s].at("label").get<std::string>(), vocab);
        p.slots[s].waveform = read_wav(results_dir / fin[s].at("path").get<std::string>());
      }
      if (!out.emplace(id, std::move(p)).second) throw IoError("duplicate scene " + id);
    } catch (const json::exception& e) {
      throw IoError(std::string("malformed decisions line: ") + e.what());
    }
  }
  return out;
}

ReferenceScene reference_of(const SceneManifest& m, const LoadedScene& audio) {
  ReferenceScene ref;
  for (std::size_t i = 0; i < m.stems.size(); ++i) {
    if (m.stems[i].role == Role::foreground) ref.stems.emplace(*m.stems[i].class_id, audio.stems[i]);
  }
  return ref;
}

TrackLabels truth_tracks(const SceneManifest& m) {
  TrackLabels t;
  std::size_t j = 0;
  for (ClassId c : m.foreground_classes()) t.at(j++) = c;
  return t;
}

EvalReport evaluate_batch(const std::vector<SceneManifest>& scenes,
                          const std::map<std::string, ScenePrediction>& predictions,
                          std::size_t workers) {
  std::vector<SceneRow> rows(scenes.size());
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    const auto& m = scenes[i];
    auto it = predictions.find(m.scene_id);
    if (it == predictions.end()) throw Error("no prediction for scene " + m.scene_id);
    try {
      const LoadedScene audio = load_scene(m);
      rows[i] = evaluate_scene(m.scene_id, reference_of(m, audio), truth_tracks(m), it->second,
                               audio.mixture);
    } catch (const std::exception& e) {
      throw Error("scene " + m.scene_id + ": " + e.what());
    }
  });
  return aggregate_report(std::move(rows));
}

}  // namespace s5
