#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "s5/backends.hpp"
#include "s5/manifest.hpp"
#include "s5/metrics.hpp"
#include "s5/pipeline.hpp"

namespace s5 {

/// Runs fn(0..n-1) on up to `workers` threads. Every index runs even if
/// another fails; the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

std::size_t default_workers();

/// Per-scene line of decisions.jsonl.
std::string decisions_line(const std::string& scene_id, const PipelineResult& result,
                           const PipelineConfig& cfg, const ClassVocabulary& vocab);

/// Runs the pipeline over every scene and writes, under out_dir,
/// <scene_id>/fg{1..3}.wav (final waveforms) and decisions.jsonl.
std::vector<PipelineResult> run_batch(const std::vector<SceneManifest>& scenes,
                                      const BackendSpec& backend, const PipelineConfig& cfg,
                                      const ClassVocabulary& vocab, std::uint64_t seed,
                                      std::size_t workers, const std::filesystem::path& out_dir);

/// Reads decisions.jsonl and the final waveforms written by run_batch.
std::map<std::string, ScenePrediction> read_predictions(const std::filesystem::path& results_dir,
                                                        const ClassVocabulary& vocab);

ReferenceScene reference_of(const SceneManifest& manifest, const LoadedScene& audio);
TrackLabels truth_tracks(const SceneManifest& manifest);

EvalReport evaluate_batch(const std::vector<SceneManifest>& scenes,
                          const std::map<std::string, ScenePrediction>& predictions,
                          std::size_t workers);

}  // namespace s5
