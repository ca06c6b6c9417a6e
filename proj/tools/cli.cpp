#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "s5/backends.hpp"
#include "s5/batch.hpp"
#include "s5/io.hpp"
#include "s5/losses.hpp"
#include "s5/manifest.hpp"
#include "s5/metrics.hpp"
#include "s5/mixer.hpp"
#include "s5/pipeline.hpp"
#include "s5/silence_gate.hpp"

#ifndef S5_VERSION
#define S5_VERSION "0.0.0"
#endif

namespace s5::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kBankEnv = "S5_BANK";

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

struct Logger {
  std::ostream* sink = nullptr;
  Level level = Level::warn;
  void operator()(Level at, const std::string& msg) const {
    if (sink && at <= level) *sink << msg << '\n';
  }
};

struct Globals {
  std::string log_level = "warn";
  std::size_t workers = 0;  // 0: available parallelism
  std::string vocab_path;

  std::size_t worker_count() const { return workers == 0 ? default_workers() : workers; }
  ClassVocabulary vocab() const {
    return vocab_path.empty() ? ClassVocabulary::placeholder()
                              : ClassVocabulary::from_file(vocab_path);
  }
};

std::string absolute(const std::string& p) {
  return p.empty() ? p : fs::absolute(p).lexically_normal().string();
}

// Provenance record: enough to re-run the command with `s5 replay`.
void write_provenance(const fs::path& where, const std::string& command,
                      const std::vector<std::string>& argv, json config) {
  json j = {{"tool", "s5"},
            {"version", S5_VERSION},
            {"command", command},
            {"argv", argv},
            {"config", std::move(config)}};
  write_file_atomic(where, j.dump(2) + "\n");
}

// argv with every path-valued option made absolute, for provenance.
std::vector<std::string> resolved_argv(const std::vector<std::string>& args,
                                       const std::vector<std::string>& path_flags) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    out.push_back(args[i]);
    const bool is_path = std::find(path_flags.begin(), path_flags.end(), args[i]) != path_flags.end();
    if (is_path && i + 1 < args.size()) out.push_back(absolute(args[++i]));
  }
  for (auto& a : out) {
    if (a.rfind("files:", 0) == 0) a = "files:" + absolute(a.substr(6));
  }
  return out;
}

fs::path sibling_provenance(const fs::path& file) {
  fs::path p = file;
  p.replace_extension(".run.json");
  return p;
}

// --- mix -------------------------------------------------------------------

struct MixArgs {
  std::string spec, bank, out, oracle_dump, prefix = "scene";
  std::size_t count = 1;
  int dump_iterations = 2;
};

SourceBank resolve_bank(const std::string& bank_path, const ClassVocabulary& vocab,
                        int sample_rate, const fs::path& out_dir, std::string& used,
                        const Logger& log) {
  std::string path = bank_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kBankEnv)) path = env;
  }
  if (!path.empty()) {
    used = absolute(path);
    return SourceBank::load(path, vocab);
  }
  SourceBank bank = procedural_bank(vocab.size(), sample_rate);
  const fs::path generated = out_dir / "bank" / "bank.json";
  bank.save(generated, vocab);
  used = absolute(generated.string());
  log(Level::info, "generated procedural bank at " + used);
  return bank;
}

std::vector<SceneManifest> mix_scenes(const BatchSpec& spec, const SourceBank& bank,
                                      const ClassVocabulary& vocab, std::size_t count,
                                      const std::string& prefix, const fs::path& out_dir,
                                      std::size_t workers) {
  std::vector<SceneManifest> manifests(count);
  parallel_for(count, workers, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "_%04zu", i);
    SynthesizedScene scene = synthesize_scene(spec.scene(i), bank, vocab.size(), prefix + id);
    write_scene(out_dir, scene);
    manifests[i] = scene.manifest;
  });
  write_manifests(out_dir / "scenes.jsonl", manifests);
  return manifests;
}

int cmd_mix(const MixArgs& a, const Globals& g, const std::vector<std::string>& argv,
            std::ostream& out, const Logger& log) {
  const auto vocab = g.vocab();
  const BatchSpec spec = BatchSpec::from_json(read_file(a.spec));
  if (a.count == 0) throw std::invalid_argument("--count must be positive");
  std::string bank_used;
  const SourceBank bank = resolve_bank(a.bank, vocab, spec.sample_rate, a.out, bank_used, log);
  auto manifests = mix_scenes(spec, bank, vocab, a.count, a.prefix, a.out, g.worker_count());
  if (!a.oracle_dump.empty()) {
    if (a.dump_iterations < 0 || a.dump_iterations > kMaxTseIterations) {
      throw std::invalid_argument("--dump-iterations out of range");
    }
    parallel_for(manifests.size(), g.worker_count(), [&](std::size_t i) {
      write_oracle_dump(a.oracle_dump, *SceneTruth::load(manifests[i], vocab.size()),
                        a.dump_iterations);
    });
  }
  write_provenance(fs::path(a.out) / "run.json", "mix",
                   resolved_argv(argv, {"--spec", "--bank", "--out", "--oracle-dump", "--vocab"}),
                   {{"spec", json::parse(spec.to_json())},
                    {"bank", bank_used},
                    {"count", a.count},
                    {"prefix", a.prefix}});
  out << "wrote " << manifests.size() << " scenes to " << (fs::path(a.out) / "scenes.jsonl").string()
      << "\n";
  return kExitOk;
}

// --- run -------------------------------------------------------------------

struct RunArgs {
  std::string manifest, backend = "oracle", thresholds, out, gate = "energy", mode,
                        stage1_labels = "classifier";
  int iterations = 2;
  bool reuse_labels = false;
  std::uint64_t seed = 0;
};

PipelineConfig make_config(const RunArgs& a, const ClassVocabulary& vocab) {
  ThresholdTable table = a.thresholds.empty()
                             ? ThresholdTable::uniform(vocab.size())
                             : ThresholdTable::from_json(read_file(a.thresholds), vocab);
  PipelineConfig cfg;
  if (!a.mode.empty()) {
    cfg = PipelineConfig::from_mode(a.mode, std::move(table));
  } else {
    cfg.thresholds = std::move(table);
    cfg.tse_iterations = a.iterations;
    cfg.classifier_stage_reuse = a.reuse_labels;
    cfg.stage1_labels =
        a.stage1_labels == "separator" ? LabelSource::separator : LabelSource::classifier;
  }
  cfg.gate_mode = a.gate == "binary" ? GateMode::binary : GateMode::energy;
  cfg.validate();
  return cfg;
}

json config_json(const PipelineConfig& cfg, const ClassVocabulary& vocab) {
  return {{"mode", cfg.mode_name()},
          {"tse_iterations", cfg.tse_iterations},
          {"gate_mode", cfg.gate_mode == GateMode::energy ? "energy" : "binary"},
          {"classifier_stage_reuse", cfg.classifier_stage_reuse},
          {"stage1_labels", cfg.stage1_labels == LabelSource::classifier ? "classifier" : "separator"},
          {"thresholds", json::parse(cfg.thresholds.to_json(vocab))}};
}

int cmd_run(const RunArgs& a, const Globals& g, const std::vector<std::string>& argv,
            std::ostream& out, const Logger& log) {
  const auto vocab = g.vocab();
  const PipelineConfig cfg = make_config(a, vocab);
  const BackendSpec backend = BackendSpec::parse(a.backend);
  const auto scenes = read_manifests(a.manifest);
  log(Level::info, "running " + cfg.mode_name() + " on " + std::to_string(scenes.size()) + " scenes");
  run_batch(scenes, backend, cfg, vocab, a.seed, g.worker_count(), a.out);
  json c = config_json(cfg, vocab);
  c["backend"] = backend.to_string();
  c["seed"] = a.seed;
  c["manifest"] = absolute(a.manifest);
  write_provenance(fs::path(a.out) / "run.json", "run",
                   resolved_argv(argv, {"--manifest", "--thresholds", "--out", "--vocab"}), c);
  out << "wrote results for " << scenes.size() << " scenes to " << a.out << "\n";
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string truth, pred, out;
};

EvalReport evaluate(const std::string& truth, const std::string& pred, const std::string& out_path,
                    const ClassVocabulary& vocab, std::size_t workers) {
  const auto scenes = read_manifests(truth);
  const auto predictions = read_predictions(pred, vocab);
  EvalReport report = evaluate_batch(scenes, predictions, workers);
  write_file_atomic(out_path, report.to_json(vocab));
  fs::path csv = out_path;
  csv.replace_extension(".csv");
  write_file_atomic(csv, report.to_csv());
  return report;
}

void print_summary(const EvalReport& r, std::ostream& out) {
  out << "scenes " << r.scenes << "  CA-SDRi " << r.mean_ca_sdri << " dB  SNRi ";
  if (r.mean_snri) {
    out << *r.mean_snri << " dB";
  } else {
    out << "n/a";
  }
  out << "  Acc_mix " << r.acc_mix << "  Acc_src " << r.acc_src << "\n";
}

int cmd_eval(const EvalArgs& a, const Globals& g, const std::vector<std::string>& argv,
             std::ostream& out) {
  const auto vocab = g.vocab();
  const EvalReport r = evaluate(a.truth, a.pred, a.out, vocab, g.worker_count());
  write_provenance(sibling_provenance(a.out), "eval",
                   resolved_argv(argv, {"--truth", "--pred", "--out", "--vocab"}),
                   {{"truth", absolute(a.truth)}, {"pred", absolute(a.pred)}});
  print_summary(r, out);
  return kExitOk;
}

// --- calibrate -------------------------------------------------------------

struct CalibrateArgs {
  std::string scores, out;
};

int cmd_calibrate(const CalibrateArgs& a, const Globals& g, const std::vector<std::string>& argv,
                  std::ostream& out) {
  const auto vocab = g.vocab();
  std::ifstream in(a.scores);
  if (!in) throw IoError("cannot open " + a.scores);
  std::vector<CalibrationSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      samples.push_back({j.at("logits").get<LogitVector>(), j.at("silence").get<bool>()});
    } catch (const json::exception& e) {
      throw IoError(std::string("malformed scores line: ") + e.what());
    }
    if (samples.back().logits.size() != vocab.size()) {
      throw std::invalid_argument("scores line has " + std::to_string(samples.back().logits.size()) +
                                  " logits, vocabulary has " + std::to_string(vocab.size()));
    }
  }
  const Calibration cal = calibrate_thresholds(samples);
  write_file_atomic(a.out, cal.table.to_json(vocab) + "\n");
  write_provenance(sibling_provenance(a.out), "calibrate",
                   resolved_argv(argv, {"--scores", "--out", "--vocab"}),
                   {{"scores", absolute(a.scores)}, {"samples", samples.size()}});
  out << "calibrated " << vocab.size() << " thresholds from " << samples.size()
      << " samples; global threshold " << cal.global.threshold << " (balanced accuracy "
      << cal.global.score.value() << ")\n";
  return kExitOk;
}

// --- pipeline-demo ---------------------------------------------------------

struct DemoArgs {
  std::uint64_t seed = 7;
  std::string out = "demo";
  std::size_t count = 20;
  double snr = 10.0;
  int iterations = 2;
  double duration = 0.5;
};

int cmd_demo(const DemoArgs& a, const Globals& g, const std::vector<std::string>& argv,
             std::ostream& out, const Logger& log) {
  const auto vocab = g.vocab();
  const fs::path root = a.out;
  BatchSpec spec;
  spec.seed = a.seed;
  spec.duration = a.duration;
  const SourceBank bank = procedural_bank(vocab.size(), spec.sample_rate, a.seed);
  log(Level::info, "mixing " + std::to_string(a.count) + " scenes");
  const auto scenes = mix_scenes(spec, bank, vocab, a.count, "scene", root / "scenes", g.worker_count());

  PipelineConfig cfg;
  cfg.thresholds = ThresholdTable::uniform(vocab.size());
  cfg.tse_iterations = a.iterations;
  cfg.validate();
  BackendSpec backend;
  backend.kind = BackendSpec::Kind::oracle_degraded;
  backend.snr_db = a.snr;
  log(Level::info, "running " + cfg.mode_name() + " with " + backend.to_string());
  run_batch(scenes, backend, cfg, vocab, a.seed, g.worker_count(), root / "results");

  const EvalReport r = evaluate((root / "scenes" / "scenes.jsonl").string(),
                                (root / "results").string(), (root / "report.json").string(),
                                vocab, g.worker_count());
  json c = config_json(cfg, vocab);
  c["backend"] = backend.to_string();
  c["seed"] = a.seed;
  c["count"] = a.count;
  c["duration"] = a.duration;
  c["scene_spec"] = json::parse(spec.to_json());
  write_provenance(root / "run.json", "pipeline-demo", resolved_argv(argv, {"--out", "--vocab"}), c);
  print_summary(r, out);
  return kExitOk;
}

std::string error_line(const std::string& command, const std::string& message, int code) {
  return json({{"error", message}, {"command", command}, {"exit", code}}).dump();
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-guided separation, classification and extraction toolkit", "s5"};
  app.set_version_flag("--version", S5_VERSION);
  app.require_subcommand(1);

  Globals g;
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  app.add_option("--workers", g.workers, "worker threads (default: available parallelism)");
  app.add_option("--vocab", g.vocab_path, "class vocabulary, one name per line")
      ->check(CLI::ExistingFile);

  MixArgs mix;
  auto* mix_cmd = app.add_subcommand("mix", "synthesize scenes and a JSONL manifest");
  mix_cmd->add_option("--spec", mix.spec, "scene spec JSON")->required()->check(CLI::ExistingFile);
  mix_cmd->add_option("--bank", mix.bank,
                      std::string("bank.json (default: $") + kBankEnv +
                          ", else a generated procedural bank)");
  mix_cmd->add_option("--out", mix.out, "output directory")->required();
  mix_cmd->add_option("--count", mix.count, "number of scenes");
  mix_cmd->add_option("--prefix", mix.prefix, "scene id prefix");
  mix_cmd->add_option("--oracle-dump", mix.oracle_dump, "also write the file-backend layout here");
  mix_cmd->add_option("--dump-iterations", mix.dump_iterations, "extraction rounds in the dump");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run the multi-stage pipeline over a manifest");
  run_cmd->add_option("--manifest", run.manifest, "scenes.jsonl")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--backend", run.backend, "oracle | oracle-degraded:SNR | files:DIR");
  run_cmd->add_option("--iterations", run.iterations, "extraction rounds after stage 1");
  run_cmd->add_option("--thresholds", run.thresholds, "threshold table JSON")->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "results directory")->required();
  run_cmd->add_option("--gate", run.gate, "stage-1 silence gate")
      ->check(CLI::IsMember({"energy", "binary"}));
  run_cmd->add_option("--mode", run.mode, "preset, e.g. \"FSS 3 + CP 3\"");
  run_cmd->add_option("--stage1-labels", run.stage1_labels, "classifier or separator")
      ->check(CLI::IsMember({"classifier", "separator"}));
  run_cmd->add_flag("--reuse-labels", run.reuse_labels, "keep stage-1 labels in extraction rounds");
  run_cmd->add_option("--seed", run.seed, "seed for degraded backends");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "score pipeline outputs against ground truth");
  eval_cmd->add_option("--truth", ev.truth, "scenes.jsonl")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred", ev.pred, "results directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", ev.out, "report.json (a .csv is written alongside)")->required();

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "fit per-class silence thresholds");
  cal_cmd->add_option("--scores", cal.scores, "JSONL of {logits, silence}")
      ->required()
      ->check(CLI::ExistingFile);
  cal_cmd->add_option("--out", cal.out, "thresholds.json")->required();

  std::string loss_case;
  auto* loss_cmd = app.add_subcommand("losses", "evaluate a loss on a serialized case");
  loss_cmd->add_option("--case", loss_case, "case JSON")->required()->check(CLI::ExistingFile);

  DemoArgs demo;
  auto* demo_cmd = app.add_subcommand("pipeline-demo", "mix, run a degraded oracle, evaluate");
  demo_cmd->add_option("--seed", demo.seed, "scene and degradation seed");
  demo_cmd->add_option("--out", demo.out, "output directory");
  demo_cmd->add_option("--count", demo.count, "number of scenes");
  demo_cmd->add_option("--snr", demo.snr, "degradation SNR in dB");
  demo_cmd->add_option("--iterations", demo.iterations, "extraction rounds");
  demo_cmd->add_option("--duration", demo.duration, "scene length in seconds");

  std::string replay_path;
  auto* replay_cmd = app.add_subcommand("replay", "re-run the command recorded in a run.json");
  replay_cmd->add_option("record", replay_path, "run.json")->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv{"s5"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << S5_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << error_line("", e.what(), kExitUsage) << "\n";
    for (auto* sub : app.get_subcommands()) {
      err << sub->help();
      return kExitUsage;
    }
    err << app.help();
    return kExitUsage;
  }

  Logger log{&err};
  log.level = g.log_level == "error" ? Level::error
              : g.log_level == "info" ? Level::info
              : g.log_level == "debug" ? Level::debug
                                       : Level::warn;
  if (g.workers == 0 && app.count("--workers")) {
    err << error_line("", "--workers must be positive", kExitUsage) << "\n";
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "mix") return cmd_mix(mix, g, args, out, log);
    if (command == "run") return cmd_run(run, g, args, out, log);
    if (command == "eval") return cmd_eval(ev, g, args, out);
    if (command == "calibrate") return cmd_calibrate(cal, g, args, out);
    if (command == "losses") {
      out << evaluate_loss_case(read_file(loss_case)) << "\n";
      return kExitOk;
    }
    if (command == "pipeline-demo") return cmd_demo(demo, g, args, out, log);
    if (command == "replay") {
      const json rec = json::parse(read_file(replay_path));
      return dispatch(rec.at("argv").get<std::vector<std::string>>(), out, err);
    }
  } catch (const std::exception& e) {
    err << error_line(command, e.what(), kExitRuntime) << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace s5::cli
