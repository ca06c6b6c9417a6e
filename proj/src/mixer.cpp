#include "s5/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "s5/error.hpp"
#include "s5/io.hpp"
#include "s5/random.hpp"

namespace s5 {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_range(const DbRange& r, const char* what) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw std::invalid_argument(std::string(what) + ": range must satisfy lo <= hi");
  }
}

DbRange parse_range(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("range must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

void parse_count(const json& j, int& lo, int& hi) {
  if (j.is_number_integer()) {
    lo = hi = j.get<int>();
  } else if (j.is_array() && j.size() == 2) {
    lo = j[0].get<int>();
    hi = j[1].get<int>();
  } else {
    throw std::invalid_argument("count must be an integer or [lo, hi]");
  }
}

// Stems are persisted as float32; rounding here makes in-memory stems and
// reloaded stems identical, so gains computed now hold exactly after a reload.
AudioBuffer round_to_float(std::vector<double> v, int sample_rate) {
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  return AudioBuffer::mono(std::move(v), sample_rate);
}

// Places `clip` inside a zero buffer of `frames` samples at a random onset.
// Longer clips are cut at a random offset instead; with `loop` a shorter
// clip is tiled to cover the whole buffer.
AudioBuffer place(const AudioBuffer& clip, std::size_t frames, Rng& rng, bool loop = false) {
  std::vector<double> out(frames, 0.0);
  auto src = clip.channel(0);
  if (loop && src.size() < frames) {
    const std::size_t off = rng.below(src.size());
    for (std::size_t i = 0; i < frames; ++i) out[i] = src[(off + i) % src.size()];
  } else if (src.size() >= frames) {
    const std::size_t off = src.size() == frames ? 0 : rng.below(src.size() - frames + 1);
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(off), frames, out.begin());
  } else {
    const std::size_t onset = rng.below(frames - src.size() + 1);
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(onset));
  }
  return AudioBuffer::mono(std::move(out), clip.sample_rate());
}

std::vector<double> fade(std::vector<double> v, std::size_t ramp) {
  ramp = std::min(ramp, v.size() / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double w = static_cast<double>(i) / static_cast<double>(ramp);
    v[i] *= w;
    v[v.size() - 1 - i] *= w;
  }
  return v;
}

std::vector<double> class_clip(std::size_t cls, std::size_t variant, int sr, Rng& rng) {
  const double seconds = rng.uniform(0.4, 0.8);
  const auto n = static_cast<std::size_t>(seconds * sr);
  const double base = 150.0 * std::pow(1.22, static_cast<double>(cls));
  const double f0 = base * (1.0 + 0.02 * static_cast<double>(variant));
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    switch (cls % 3) {
      case 0:  // harmonic tone
        v[i] = 0.6 * std::sin(kTwoPi * f0 * t) + 0.25 * std::sin(kTwoPi * 2 * f0 * t);
        break;
      case 1:  // upward chirp over 30% bandwidth
        v[i] = 0.7 * std::sin(kTwoPi * (f0 * t + 0.15 * f0 * t * t / seconds));
        break;
      default:  // amplitude-modulated tone
        v[i] = 0.7 * (0.6 + 0.4 * std::sin(kTwoPi * 6.0 * t)) * std::sin(kTwoPi * f0 * t);
        break;
    }
  }
  return fade(std::move(v), static_cast<std::size_t>(0.01 * sr));
}

std::vector<double> interference_clip(int sr, Rng& rng) {
  const auto n = static_cast<std::size_t>(rng.uniform(0.3, 0.7) * sr);
  const double f1 = rng.uniform(180.0, 4000.0);
  const double f2 = f1 * rng.uniform(1.37, 2.71);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    v[i] = 0.4 * std::sin(kTwoPi * f1 * t) + 0.3 * std::sin(kTwoPi * f2 * t) +
           0.05 * rng.normal();
  }
  return fade(std::move(v), static_cast<std::size_t>(0.01 * sr));
}

std::vector<double> noise_clip(int sr, Rng& rng) {
  const auto n = static_cast<std::size_t>(2.0 * sr);
  std::vector<double> v(n);
  double lp = 0.0;
  for (auto& x : v) {
    lp = 0.7 * lp + 0.3 * rng.normal();  // mildly coloured
    x = 0.3 * lp;
  }
  return v;
}

}  // namespace

void SceneSpec::validate() const {
  if (n_foreground < 1 || n_foreground > static_cast<int>(kMaxForeground)) {
    throw std::invalid_argument("n_foreground must be in 1..3");
  }
  if (n_interference < 0 || n_interference > static_cast<int>(kMaxInterference)) {
    throw std::invalid_argument("n_interference must be in 0..2");
  }
  check_range(fg_snr, "fg_snr_range");
  check_range(intf_snr, "intf_snr_range");
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("duration must be positive");
  }
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (static_cast<std::size_t>(duration * sample_rate) == 0) {
    throw std::invalid_argument("duration shorter than one sample");
  }
}

BatchSpec BatchSpec::from_json(const std::string& text) {
  BatchSpec b;
  try {
    const json j = json::parse(text);
    if (j.contains("n_foreground")) parse_count(j["n_foreground"], b.fg_min, b.fg_max);
    if (j.contains("n_interference")) parse_count(j["n_interference"], b.intf_min, b.intf_max);
    if (j.contains("fg_snr_range")) b.fg_snr = parse_range(j["fg_snr_range"]);
    if (j.contains("intf_snr_range")) b.intf_snr = parse_range(j["intf_snr_range"]);
    if (j.contains("duration")) b.duration = j["duration"].get<double>();
    if (j.contains("seed")) b.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("sample_rate")) b.sample_rate = j["sample_rate"].get<int>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed scene spec: ") + e.what());
  }
  if (b.fg_min > b.fg_max || b.intf_min > b.intf_max) {
    throw std::invalid_argument("count ranges must satisfy lo <= hi");
  }
  // Validate the extremes of both count ranges.
  SceneSpec probe = b.scene(0);
  probe.n_foreground = b.fg_min;
  probe.n_interference = b.intf_min;
  probe.validate();
  probe.n_foreground = b.fg_max;
  probe.n_interference = b.intf_max;
  probe.validate();
  return b;
}

std::string BatchSpec::to_json() const {
  json j = {{"n_foreground", {fg_min, fg_max}},
            {"n_interference", {intf_min, intf_max}},
            {"fg_snr_range", {fg_snr.lo, fg_snr.hi}},
            {"intf_snr_range", {intf_snr.lo, intf_snr.hi}},
            {"duration", duration},
            {"seed", seed},
            {"sample_rate", sample_rate}};
  return j.dump();
}

SceneSpec BatchSpec::scene(std::size_t index) const {
  Rng rng(stable_hash("scene-counts", seed + index));
  SceneSpec s;
  s.n_foreground = fg_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(fg_max - fg_min + 1)));
  s.n_interference =
      intf_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(intf_max - intf_min + 1)));
  s.fg_snr = fg_snr;
  s.intf_snr = intf_snr;
  s.duration = duration;
  s.seed = seed + index;
  s.sample_rate = sample_rate;
  return s;
}

std::vector<ClassId> SourceBank::classes() const {
  std::set<ClassId> ids;
  for (const auto& t : targets) ids.insert(t.class_id);
  return {ids.begin(), ids.end()};
}

SourceBank SourceBank::load(const std::filesystem::path& bank_json,
                            const ClassVocabulary& vocab) {
  const auto base = bank_json.parent_path();
  SourceBank bank;
  json j;
  try {
    j = json::parse(read_file(bank_json));
  } catch (const json::exception& e) {
    throw IoError("malformed bank file " + bank_json.string() + ": " + e.what());
  }
  bank.sample_rate = j.value("sample_rate", kDefaultSampleRate);
  const auto load = [&](const std::string& rel) {
    AudioBuffer b = read_wav(base / rel);
    if (b.sample_rate() != bank.sample_rate) {
      throw IoError("bank clip " + rel + ": sample-rate mismatch");
    }
    if (b.channels() != 1) throw IoError("bank clip " + rel + ": stems must be mono");
    if (energy(b) == 0.0) throw IoError("bank clip " + rel + " is silent");
    return b;
  };
  for (const auto& t : j.value("targets", json::array())) {
    const auto name = t.at("class").get<std::string>();
    const auto id = vocab.find(name);
    if (!id) throw IoError("bank references unknown class " + name);
    const auto path = t.at("path").get<std::string>();
    bank.targets.push_back({*id, path, load(path)});
  }
  for (const auto& p : j.value("interference", json::array())) {
    bank.interference.push_back({p.get<std::string>(), load(p.get<std::string>())});
  }
  for (const auto& p : j.value("noise", json::array())) {
    bank.noise.push_back({p.get<std::string>(), load(p.get<std::string>())});
  }
  return bank;
}

void SourceBank::save(const std::filesystem::path& bank_json,
                      const ClassVocabulary& vocab) const {
  const auto base = bank_json.parent_path();
  json targets_j = json::array();
  for (const auto& t : targets) {
    write_wav(base / t.path, t.clip);
    targets_j.push_back({{"class", vocab.name(t.class_id)}, {"path", t.path}});
  }
  json intf_j = json::array();
  for (const auto& c : interference) {
    write_wav(base / c.path, c.clip);
    intf_j.push_back(c.path);
  }
  json noise_j = json::array();
  for (const auto& c : noise) {
    write_wav(base / c.path, c.clip);
    noise_j.push_back(c.path);
  }
  json j = {{"sample_rate", sample_rate},
            {"targets", targets_j},
            {"interference", intf_j},
            {"noise", noise_j}};
  write_file_atomic(bank_json, j.dump(2) + "\n");
}

SourceBank procedural_bank(std::size_t num_classes, int sample_rate, std::uint64_t seed,
                           std::size_t clips_per_class) {
  Rng rng(seed);
  SourceBank bank;
  bank.sample_rate = sample_rate;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t v = 0; v < clips_per_class; ++v) {
      bank.targets.push_back({c,
                              "clips/class" + std::to_string(c) + "_" + std::to_string(v) + ".wav",
                              round_to_float(class_clip(c, v, sample_rate, rng), sample_rate)});
    }
  }
  for (std::size_t i = 0; i < 6; ++i) {
    bank.interference.push_back({"clips/intf" + std::to_string(i) + ".wav",
                                 round_to_float(interference_clip(sample_rate, rng), sample_rate)});
  }
  for (std::size_t i = 0; i < 2; ++i) {
    bank.noise.push_back({"clips/noise" + std::to_string(i) + ".wav",
                          round_to_float(noise_clip(sample_rate, rng), sample_rate)});
  }
  return bank;
}

double gain_for_snr(const AudioBuffer& src, const AudioBuffer& noise, double target_db) {
  if (!std::isfinite(target_db)) throw std::invalid_argument("target SNR must be finite");
  const double ps = power(src);
  const double pn = power(noise);
  if (ps == 0.0) throw std::invalid_argument("gain_for_snr: silent source");
  if (pn == 0.0) throw std::invalid_argument("gain_for_snr: silent noise");
  return std::sqrt(std::pow(10.0, target_db / 10.0) * pn / ps);
}

SynthesizedScene synthesize_scene(const SceneSpec& spec, const SourceBank& bank,
                                  std::size_t num_classes,
                                  std::optional<std::string> scene_id) {
  spec.validate();
  if (bank.sample_rate != spec.sample_rate) {
    throw std::invalid_argument("bank sample-rate mismatch");
  }
  {
    const auto present = bank.classes();
    std::vector<ClassId> missing;
    for (ClassId c = 0; c < num_classes; ++c) {
      if (!std::binary_search(present.begin(), present.end(), c)) missing.push_back(c);
    }
    if (!missing.empty()) {
      std::ostringstream os;
      os << "insufficient bank: missing classes";
      for (ClassId c : missing) os << ' ' << c;
      throw std::invalid_argument(os.str());
    }
    if (num_classes < static_cast<std::size_t>(spec.n_foreground)) {
      throw std::invalid_argument("insufficient bank: fewer classes than foregrounds");
    }
  }
  if (spec.n_interference > 0 && bank.interference.empty()) {
    throw std::invalid_argument("insufficient bank: no interference clips");
  }
  if (bank.noise.empty()) throw std::invalid_argument("insufficient bank: no noise clips");

  Rng rng(spec.seed);
  const auto frames = static_cast<std::size_t>(spec.duration * spec.sample_rate);
  SynthesizedScene out;
  auto& m = out.manifest;
  m.scene_id = scene_id.value_or("scene_" + std::to_string(spec.seed));
  m.sample_rate = spec.sample_rate;
  m.mixture_path = m.scene_id + "/mixture.wav";

  // Noise first: it is the SNR reference for every other stem.
  const auto& noise_src = bank.noise[rng.below(bank.noise.size())].clip;
  AudioBuffer noise = place(noise_src, frames, rng, /*loop=*/true);
  if (energy(noise) == 0.0) throw std::invalid_argument("noise placement is silent");
  const double noise_gain = std::sqrt(kNoisePower / power(noise));
  const AudioBuffer scaled_noise = apply_gain(noise, noise_gain);

  // Foreground classes without replacement (partial Fisher-Yates).
  std::vector<ClassId> pool(num_classes);
  for (ClassId c = 0; c < num_classes; ++c) pool[c] = c;
  std::vector<AudioBuffer> scaled;
  for (int i = 0; i < spec.n_foreground; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng.below(pool.size() - static_cast<std::size_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    const ClassId cls = pool[static_cast<std::size_t>(i)];
    std::vector<const SourceBank::Target*> options;
    for (const auto& t : bank.targets) {
      if (t.class_id == cls) options.push_back(&t);
    }
    const auto* pick = options[rng.below(options.size())];
    AudioBuffer stem = place(pick->clip, frames, rng);
    const double snr = rng.uniform(spec.fg_snr.lo, spec.fg_snr.hi);
    const double g = gain_for_snr(stem, scaled_noise, snr);
    m.stems.push_back({m.scene_id + "/fg" + std::to_string(i + 1) + ".wav",
                       Role::foreground, cls, g, snr});
    scaled.push_back(apply_gain(stem, g));
    out.stems.push_back(std::move(stem));
  }
  for (int i = 0; i < spec.n_interference; ++i) {
    const auto& src = bank.interference[rng.below(bank.interference.size())].clip;
    AudioBuffer stem = place(src, frames, rng);
    const double snr = rng.uniform(spec.intf_snr.lo, spec.intf_snr.hi);
    const double g = gain_for_snr(stem, scaled_noise, snr);
    m.stems.push_back({m.scene_id + "/intf" + std::to_string(i + 1) + ".wav",
                       Role::interference, std::nullopt, g, snr});
    scaled.push_back(apply_gain(stem, g));
    out.stems.push_back(std::move(stem));
  }
  m.stems.push_back({m.scene_id + "/noise.wav", Role::noise, std::nullopt, noise_gain,
                     std::nullopt});
  scaled.push_back(scaled_noise);
  out.stems.push_back(std::move(noise));

  // The stored mixture is float32 too; keep the in-memory copy identical.
  const AudioBuffer mix = mixdown(scaled);
  out.mixture = round_to_float({mix.data().begin(), mix.data().end()}, spec.sample_rate);
  return out;
}

void write_scene(const std::filesystem::path& out_dir, SynthesizedScene& scene) {
  auto& m = scene.manifest;
  write_wav(out_dir / m.mixture_path, scene.mixture);
  for (std::size_t i = 0; i < m.stems.size(); ++i) {
    write_wav(out_dir / m.stems[i].path, scene.stems[i]);
  }
  m.base_dir = out_dir;
}

}  // namespace s5
