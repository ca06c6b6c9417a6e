#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "oracle.hpp"
#include "s5/metrics.hpp"
#include "support.hpp"

using namespace s5;
using doctest::Approx;

namespace {

// Mixture [1, 1, 1, 1]; references are indicator-like so every SDRi is known.
const AudioBuffer kMix = AudioBuffer::mono({1, 1, 1, 1});

// Estimate with sdr(ref, est) - sdr(ref, mix) == target for ref = e_i.
AudioBuffer estimate_with_sdri(std::size_t i, double target) {
  // sdr(e_i, mix) = 10 log10(1/3); pick est = e_i + r * e_j with the right error.
  const double mix_sdr = 10 * std::log10(1.0 / 3.0);
  const double err = std::pow(10.0, -(target + mix_sdr) / 10.0);
  std::vector<double> v(4, 0.0);
  v[i] = 1.0;
  v[(i + 1) % 4] = std::sqrt(err);
  return AudioBuffer::mono(v);
}

AudioBuffer unit(std::size_t i) {
  std::vector<double> v(4, 0.0);
  v[i] = 1.0;
  return AudioBuffer::mono(v);
}

PredictedSource silence() { return {AudioBuffer::zeros_like(kMix), std::nullopt}; }

}  // namespace

TEST_CASE("sdri") {
  const auto ref = AudioBuffer::mono({1, 0});
  const auto mix = AudioBuffer::mono({1, 1});
  CHECK(sdri(ref, mix, mix) == 0.0);
  CHECK(sdri(ref, AudioBuffer::mono({1, 0.5}), mix) == Approx(6.0206).epsilon(1e-5));
  CHECK(sdri(ref, ref, mix) == 60.0);
  CHECK_THROWS(sdri(AudioBuffer::mono({0, 0}), mix, mix));
}

TEST_CASE("ca_sdri arithmetic") {
  ReferenceScene truth{{{0, unit(0)}, {1, unit(1)}}};
  ScenePrediction p{{PredictedSource{estimate_with_sdri(0, 10), 0}, PredictedSource{estimate_with_sdri(1, 6), 1},
                     silence()}};
  auto r = ca_sdri(truth, p, kMix);
  CHECK(r.value == Approx(8.0).epsilon(1e-12));
  CHECK(r.per_class.at(0) == Approx(10.0).epsilon(1e-12));
  CHECK_FALSE(r.empty);

  ReferenceScene only_a{{{0, unit(0)}}};
  ScenePrediction fp{{PredictedSource{estimate_with_sdri(0, 6), 0}, PredictedSource{unit(2), 1}, silence()}};
  CHECK(ca_sdri(only_a, fp, kMix).value == Approx(3.0).epsilon(1e-12));

  ScenePrediction none{{silence(), silence(), silence()}};
  r = ca_sdri(truth, none, kMix);
  CHECK(r.value == 0.0);
  CHECK(r.per_class.size() == 2);

  r = ca_sdri(ReferenceScene{}, none, kMix);
  CHECK(r.value == 0.0);
  CHECK(r.empty);

  ScenePrediction dup{{PredictedSource{unit(0), 0}, PredictedSource{unit(1), 0}, silence()}};
  CHECK_THROWS_AS(ca_sdri(truth, dup, kMix), std::invalid_argument);
}

TEST_CASE("ca_sdri penalty direction and relabeling") {
  Rng rng(9);
  for (int t = 0; t < 30; ++t) {
    ReferenceScene truth;
    std::array<PredictedSource, 3> slots;
    const auto mix = test::random_mono(rng, 32);
    for (ClassId k = 0; k < 2; ++k) {
      truth.stems[k] = test::random_mono(rng, 32);
      // Estimates closer to the reference than the mixture: P_k >= 0.
      slots[k] = {add_scaled(truth.stems[k], subtract(mix, truth.stems[k]), 0.1), k};
    }
    slots[2] = {AudioBuffer::zeros_like(mix), std::nullopt};
    const double base = ca_sdri(truth, ScenePrediction{slots}, mix).value;

    auto with_fp = slots;
    with_fp[2] = {mix, ClassId{7}};
    CHECK(ca_sdri(truth, ScenePrediction{with_fp}, mix).value <= base);

    auto without_tp = slots;
    without_tp[1].label = std::nullopt;
    CHECK(ca_sdri(truth, ScenePrediction{without_tp}, mix).value <= base);

    // Relabel 0 -> 5, 1 -> 3 on both sides.
    ReferenceScene relabeled{{{5, truth.stems[0]}, {3, truth.stems[1]}}};
    auto rs = slots;
    rs[0].label = 5;
    rs[1].label = 3;
    CHECK(ca_sdri(relabeled, ScenePrediction{rs}, mix).value == Approx(base).epsilon(1e-14));
  }
}

TEST_CASE("snri") {
  ReferenceScene truth{{{2, AudioBuffer::mono({1, 0})}}};
  const auto mix = AudioBuffer::mono({1, 1});
  ScenePrediction p{{PredictedSource{mix, 2}, silence(), silence()}};
  p.slots[1].waveform = p.slots[2].waveform = AudioBuffer::zeros_like(mix);
  CHECK(snri(truth, p, mix) == 0.0);
  p.slots[0].waveform = AudioBuffer::mono({1, std::sqrt(0.5)});
  CHECK(snri(truth, p, mix) == Approx(10 * std::log10(2.0)).epsilon(1e-12));
  p.slots[0].waveform = AudioBuffer::mono({1, 0});
  CHECK(snri(truth, p, mix) == 60.0);
  p.slots[0].label = 4;
  CHECK_THROWS(snri(truth, p, mix));
}

TEST_CASE("acc_mix") {
  const std::vector<LabelSet> a{{0}, {0, 1}};
  CHECK(acc_mix(a, a) == 1.0);
  CHECK(acc_mix(a, {{0}, {0}}) == 0.5);
  CHECK(acc_mix(a, {{0, 5}, {0, 1, 5}}) == 0.0);
  CHECK_THROWS(acc_mix(a, {{0}}));
  CHECK_THROWS(acc_mix({}, {}));
}

TEST_CASE("acc_src") {
  const TrackLabels t1{0, 1, std::nullopt}, t2{2, std::nullopt, std::nullopt};
  CHECK(acc_src({t1, t2}, {t1, t2}) == 1.0);
  CHECK(acc_src({t1, t2}, {t1, TrackLabels{2, 4, std::nullopt}}) == Approx(5.0 / 6.0));
  CHECK(acc_src({t2}, {TrackLabels{2, 1, std::nullopt}}) == Approx(2.0 / 3.0));
  const TrackLabels quiet{};
  CHECK(acc_src({quiet, quiet}, {quiet, quiet}) == 1.0);
  CHECK_THROWS(acc_src({t1}, {}));
}

TEST_CASE("align_tracks lines up labels with predicted slots") {
  const TrackLabels truth{3, 7, std::nullopt};
  const TrackLabels pred{std::nullopt, 3, 9};
  const auto a = align_tracks(truth, pred);
  CHECK(a[0] == std::nullopt);
  CHECK(a[1] == ClassId{3});
  CHECK(a[2] == ClassId{7});
}

TEST_CASE("report aggregation") {
  SceneRow a, b;
  a.scene_id = "a";
  a.ca_sdri = 10;
  a.snri = 10;
  a.exact_match = true;
  a.src_correct = 3;
  a.per_class = {{0, 10.0}};
  a.truth_labels = a.pred_labels = {0};
  b.scene_id = "b";
  b.ca_sdri = 6;
  b.src_correct = 2;
  b.per_class = {{0, 12.0}, {1, 0.0}};
  b.truth_labels = {0, 1};
  b.pred_labels = {0};
  b.snri = 12;

  const auto one = aggregate_report({a});
  CHECK(one.mean_ca_sdri == 10);
  CHECK(one.mean_snri == 10);
  CHECK(one.acc_mix == 1.0);
  CHECK(one.acc_src == 1.0);

  const auto r = aggregate_report({a, b});
  CHECK(r.mean_ca_sdri == 8);
  CHECK(r.acc_mix == 0.5);
  CHECK(r.acc_src == Approx(5.0 / 6.0));
  CHECK(r.per_class_mean.at(0) == 11.0);
  CHECK(r.per_class_mean.at(1) == 0.0);

  const auto vocab = ClassVocabulary::placeholder();
  const auto back = EvalReport::from_json(r.to_json(vocab), vocab);
  CHECK(back.mean_ca_sdri == r.mean_ca_sdri);
  CHECK(back.mean_snri == r.mean_snri);
  CHECK(back.acc_mix == r.acc_mix);
  CHECK(back.acc_src == r.acc_src);
  CHECK(back.per_class_mean == r.per_class_mean);
  CHECK(back.to_json(vocab) == r.to_json(vocab));

  const auto csv = r.to_csv();
  CHECK(csv.rfind("scene_id,ca_sdri,snri,exact_match,src_correct_count\n", 0) == 0);
  CHECK(csv.find("\nb,6") != std::string::npos);
  CHECK_THROWS(aggregate_report({}));

  SceneRow empty_row;
  empty_row.scene_id = "e";
  empty_row.empty = true;
  const auto e = aggregate_report({empty_row});
  CHECK(e.empty_scenes == 1);
  CHECK_FALSE(e.mean_snri);
}

TEST_CASE("scene metrics agree with the direct oracle") {
  Rng rng(77);
  std::vector<TrackLabels> truth_tracks, pred_tracks;
  std::vector<std::vector<std::optional<std::size_t>>> ot, op;
  std::vector<LabelSet> tl, pl;
  std::vector<std::set<std::size_t>> otl, opl;
  for (int s = 0; s < 40; ++s) {
    const std::size_t n = 16;
    ReferenceScene truth;
    std::map<std::size_t, std::vector<double>> otruth;
    const std::size_t nfg = 1 + rng.below(3);
    std::vector<ClassId> classes;
    while (classes.size() < nfg) {
      const ClassId k = rng.below(5);
      if (std::find(classes.begin(), classes.end(), k) == classes.end()) classes.push_back(k);
    }
    AudioBuffer mix = test::random_mono(rng, n, 0.3);
    TrackLabels tt{};
    for (std::size_t i = 0; i < nfg; ++i) {
      const auto stem = test::random_mono(rng, n);
      truth.stems[classes[i]] = stem;
      otruth[classes[i]] = {stem.data().begin(), stem.data().end()};
      mix = add_scaled(mix, stem, 1.0);
      tt[i] = classes[i];
    }
    ScenePrediction pred;
    std::vector<oracle::Slot> oslots;
    std::set<ClassId> used;
    for (std::size_t j = 0; j < 3; ++j) {
      Label l;
      if (rng.below(4) != 0) {
        const ClassId k = rng.below(5);
        if (used.insert(k).second) l = k;
      }
      const auto w = test::random_mono(rng, n);
      pred.slots[j] = {w, l};
      oslots.push_back({{w.data().begin(), w.data().end()}, l});
    }
    const std::vector<double> omix(mix.data().begin(), mix.data().end());
    CHECK(ca_sdri(truth, pred, mix).value == Approx(oracle::ca_sdri(otruth, oslots, omix)).epsilon(1e-9));
    const auto row = evaluate_scene("s", truth, tt, pred, mix);
    std::vector<std::optional<std::size_t>> ott(tt.begin(), tt.end()), opp;
    for (const auto& sl : pred.slots) opp.push_back(sl.label);
    CHECK(static_cast<double>(row.src_correct) / 3 == Approx(oracle::acc_src({ott}, {opp})).epsilon(1e-12));
    truth_tracks.push_back(tt);
    pred_tracks.push_back(pred.tracks());
    tl.push_back(truth.labels());
    pl.push_back(pred.labels());
    otl.emplace_back(tl.back().begin(), tl.back().end());
    opl.emplace_back(pl.back().begin(), pl.back().end());
  }
  CHECK(acc_mix(tl, pl) == oracle::acc_mix(otl, opl));
}
