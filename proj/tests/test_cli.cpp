#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "s5/batch.hpp"
#include "s5/io.hpp"
#include "support.hpp"

using namespace s5;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome s5_main(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const std::filesystem::path& x) { return x.string(); }

}  // namespace

TEST_CASE("mix, run and eval round trip") {
  test::TempDir dir("s5_cli");
  write_file_atomic(dir / "spec.json", R"({"n_foreground": [1, 3], "n_interference": [0, 2], "duration": 0.25, "seed": 3})");
  auto r = s5_main({"--workers", "2", "mix", "--spec", p(dir / "spec.json"), "--out", p(dir / "m"),
                    "--count", "4", "--oracle-dump", p(dir / "dump")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(std::filesystem::exists(dir / "m/scenes.jsonl"));
  CHECK(std::filesystem::exists(dir / "m/run.json"));
  CHECK(std::filesystem::exists(dir / "m/bank/bank.json"));
  CHECK(std::filesystem::exists(dir / "dump/scene_0000/logits.json"));
  CHECK(read_manifests(dir / "m/scenes.jsonl").size() == 4);

  r = s5_main({"run", "--manifest", p(dir / "m/scenes.jsonl"), "--backend", "oracle", "--out", p(dir / "r")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(std::filesystem::exists(dir / "r/scene_0003/fg3.wav"));
  CHECK(std::filesystem::exists(dir / "r/decisions.jsonl"));

  r = s5_main({"eval", "--truth", p(dir / "m/scenes.jsonl"), "--pred", p(dir / "r"), "--out", p(dir / "report.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(std::filesystem::exists(dir / "report.csv"));
  CHECK(std::filesystem::exists(dir / "report.run.json"));
  const auto report = json::parse(read_file(dir / "report.json"));
  CHECK(report["aggregate"]["acc_src"] == 1.0);
  CHECK(report["aggregate"]["acc_mix"] == 1.0);
  // Every matched class sits at the clamp: P_k = 60 - sdr(stem, mixture).
  for (const auto& scene : read_manifests(dir / "m/scenes.jsonl")) {
    const auto loaded = load_scene(scene);
    const auto ref = reference_of(scene, loaded);
    double expected = 0;
    for (const auto& [k, stem] : ref.stems) expected += 60.0 - sdr(stem, loaded.mixture);
    expected /= static_cast<double>(ref.stems.size());
    bool found = false;
    for (const auto& row : report["scenes"]) {
      if (row["scene_id"] == scene.scene_id) {
        found = true;
        CHECK(row["ca_sdri"].get<double>() == doctest::Approx(expected).epsilon(1e-12));
      }
    }
    CHECK(found);
  }

  // File backend replay of the oracle dump gives the same report.
  r = s5_main({"run", "--manifest", p(dir / "m/scenes.jsonl"), "--backend", "files:" + p(dir / "dump"),
               "--out", p(dir / "rf")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = s5_main({"eval", "--truth", p(dir / "m/scenes.jsonl"), "--pred", p(dir / "rf"), "--out", p(dir / "rf.json")});
  REQUIRE(r.code == 0);
  CHECK(json::parse(read_file(dir / "rf.json"))["aggregate"] == report["aggregate"]);

  // Replay reproduces the report byte for byte.
  const auto before = read_file(dir / "report.json");
  std::filesystem::remove(dir / "report.json");
  r = s5_main({"replay", p(dir / "report.run.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_file(dir / "report.json") == before);
}

TEST_CASE("provenance records absolute paths, config and seed") {
  test::TempDir dir("s5_prov");
  auto r = s5_main({"--workers", "1", "pipeline-demo", "--seed", "5", "--count", "2", "--out", p(dir / "d")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto run = json::parse(read_file(dir / "d/run.json"));
  CHECK(run["tool"] == "s5");
  CHECK(run["command"] == "pipeline-demo");
  CHECK(run["config"]["seed"] == 5);
  CHECK(run.contains("version"));
  const auto argv = run["argv"].get<std::vector<std::string>>();
  const auto at = std::find(argv.begin(), argv.end(), "--out");
  REQUIRE(at != argv.end());
  CHECK(std::filesystem::path(*(at + 1)).is_absolute());
}

TEST_CASE("errors and exit codes") {
  test::TempDir dir("s5_err");
  write_file_atomic(dir / "spec.json", R"({"n_foreground": 1, "duration": 0.1, "seed": 1})");
  REQUIRE(s5_main({"mix", "--spec", p(dir / "spec.json"), "--out", p(dir / "m")}).code == 0);

  auto r = s5_main({"run", "--manifest", p(dir / "m/scenes.jsonl"), "--iterations", "9", "--out", p(dir / "r")});
  CHECK(r.code == cli::kExitRuntime);
  const auto err = json::parse(r.err);
  CHECK(err["error"].get<std::string>().find("guard") != std::string::npos);
  CHECK(r.err.find('\n') == r.err.size() - 1);
  CHECK_FALSE(std::filesystem::exists(dir / "r"));

  r = s5_main({"run", "--no-such-flag"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(s5_main({}).code == cli::kExitUsage);
  CHECK(s5_main({"frobnicate"}).code == cli::kExitUsage);
  CHECK(s5_main({"eval", "--truth", p(dir / "missing.jsonl"), "--pred", p(dir.path()), "--out", "x.json"}).code ==
        cli::kExitUsage);

  // Missing decisions file: I/O failure at run time.
  r = s5_main({"eval", "--truth", p(dir / "m/scenes.jsonl"), "--pred", p(dir.path()), "--out", p(dir / "e.json")});
  CHECK(r.code == cli::kExitRuntime);
  CHECK(json::parse(r.err).contains("error"));

  r = s5_main({"--help"});
  CHECK(r.code == 0);
  for (const char* sub : {"mix", "run", "eval", "calibrate", "losses", "pipeline-demo"}) {
    CHECK(r.out.find(sub) != std::string::npos);
  }
}

TEST_CASE("calibrate and losses") {
  test::TempDir dir("s5_cal");
  std::string lines;
  for (int i = 0; i < 6; ++i) {
    std::vector<double> l(18, -9.0);
    l[i % 2] = i < 3 ? 8.0 : -2.0;
    lines += json({{"logits", l}, {"silence", i >= 3}}).dump() + "\n";
  }
  write_file_atomic(dir / "scores.jsonl", lines);
  auto r = s5_main({"calibrate", "--scores", p(dir / "scores.jsonl"), "--out", p(dir / "t.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto vocab = ClassVocabulary::placeholder();
  const auto table = ThresholdTable::from_json(read_file(dir / "t.json"), vocab);
  CHECK(table.size() == 18);
  CHECK(std::filesystem::exists(dir / "t.run.json"));

  // The calibrated table drives the run command.
  write_file_atomic(dir / "spec.json", R"({"n_foreground": 2, "duration": 0.1, "seed": 1})");
  REQUIRE(s5_main({"mix", "--spec", p(dir / "spec.json"), "--out", p(dir / "m")}).code == 0);
  r = s5_main({"run", "--manifest", p(dir / "m/scenes.jsonl"), "--thresholds", p(dir / "t.json"), "--mode",
               "FSS 1 + CP 1", "--out", p(dir / "r")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_file(dir / "r/decisions.jsonl").find("FSS 1 + CP 1\"") != std::string::npos);

  write_file_atomic(dir / "case.json", R"({"loss": "kl_uniform", "p": [0, 1]})");
  r = s5_main({"losses", "--case", p(dir / "case.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto out = json::parse(r.out);
  CHECK(out["value"].get<double>() == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(out["gradient"].size() == 2);
}

TEST_CASE("inputs are left untouched") {
  test::TempDir dir("s5_ro");
  write_file_atomic(dir / "spec.json", R"({"n_foreground": 2, "duration": 0.1, "seed": 4})");
  REQUIRE(s5_main({"mix", "--spec", p(dir / "spec.json"), "--out", p(dir / "m")}).code == 0);
  const auto manifest = read_file(dir / "m/scenes.jsonl");
  const auto mixture = read_file(dir / "m/scene_0000/mixture.wav");
  REQUIRE(s5_main({"run", "--manifest", p(dir / "m/scenes.jsonl"), "--backend", "oracle-degraded:5", "--out",
                   p(dir / "r")})
              .code == 0);
  REQUIRE(s5_main({"eval", "--truth", p(dir / "m/scenes.jsonl"), "--pred", p(dir / "r"), "--out",
                   p(dir / "e.json")})
              .code == 0);
  CHECK(read_file(dir / "m/scenes.jsonl") == manifest);
  CHECK(read_file(dir / "m/scene_0000/mixture.wav") == mixture);
}
