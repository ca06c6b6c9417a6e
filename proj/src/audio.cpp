#include "s5/audio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "s5/error.hpp"

namespace s5 {

namespace {

void check_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("non-finite sample in audio buffer");
    }
  }
}

}  // namespace

AudioBuffer::AudioBuffer(std::size_t channels, std::size_t frames, int sample_rate)
    : data_(channels * frames, 0.0), channels_(channels), sample_rate_(sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (channels == 0 && frames != 0) throw std::invalid_argument("zero channels");
}

AudioBuffer::AudioBuffer(std::vector<double> samples, std::size_t channels,
                         int sample_rate)
    : data_(std::move(samples)), channels_(channels), sample_rate_(sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  if (channels == 0) {
    if (!data_.empty()) throw std::invalid_argument("zero channels");
  } else if (data_.size() % channels != 0) {
    throw std::invalid_argument("channels have unequal frame counts");
  }
  check_finite(data_);
}

AudioBuffer AudioBuffer::mono(std::vector<double> samples, int sample_rate) {
  return AudioBuffer(std::move(samples), 1, sample_rate);
}

AudioBuffer AudioBuffer::zeros_like(const AudioBuffer& other) {
  return AudioBuffer(other.channels(), other.frames(), other.sample_rate());
}

std::span<const double> AudioBuffer::channel(std::size_t c) const {
  if (c >= channels_) throw std::out_of_range("channel index out of range");
  return std::span<const double>(data_).subspan(c * frames(), frames());
}

ClassVocabulary::ClassVocabulary(std::vector<std::string> names)
    : names_(std::move(names)) {
  if (names_.size() < 2) {
    throw std::invalid_argument("class vocabulary needs at least 2 classes");
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw std::invalid_argument("empty class name");
    if (!seen.insert(n).second) {
      throw std::invalid_argument("duplicate class name: " + n);
    }
  }
}

ClassVocabulary ClassVocabulary::placeholder(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string idx = std::to_string(i);
    if (idx.size() < 2) idx.insert(0, "0");
    names.push_back("class_" + idx);
  }
  return ClassVocabulary(std::move(names));
}

ClassVocabulary ClassVocabulary::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    names.push_back(line.substr(b, e - b + 1));
  }
  return ClassVocabulary(std::move(names));
}

const std::string& ClassVocabulary::name(std::size_t id) const {
  if (id >= names_.size()) throw std::out_of_range("class id out of range");
  return names_[id];
}

std::optional<std::size_t> ClassVocabulary::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

void require_compatible(const AudioBuffer& a, const AudioBuffer& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
  if (a.sample_rate() != b.sample_rate()) {
    throw std::invalid_argument(std::string(what) + ": sample-rate mismatch");
  }
}

double energy(const AudioBuffer& buf) {
  double acc = 0.0;
  for (double x : buf.data()) acc += x * x;
  return acc;
}

double power(const AudioBuffer& buf) {
  if (buf.empty()) throw std::invalid_argument("empty signal");
  return energy(buf) / static_cast<double>(buf.size());
}

double dot(const AudioBuffer& a, const AudioBuffer& b) {
  require_compatible(a, b, "dot");
  auto x = a.data();
  auto y = b.data();
  return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
}

AudioBuffer apply_gain(const AudioBuffer& buf, double gain) {
  if (!std::isfinite(gain)) throw std::invalid_argument("gain must be finite");
  std::vector<double> out(buf.data().begin(), buf.data().end());
  for (double& x : out) x *= gain;
  return AudioBuffer(std::move(out), buf.channels(), buf.sample_rate());
}

AudioBuffer mixdown(std::span<const AudioBuffer> bufs) {
  if (bufs.empty()) throw std::invalid_argument("mixdown of zero buffers");
  std::vector<double> acc(bufs.front().data().begin(), bufs.front().data().end());
  for (std::size_t i = 1; i < bufs.size(); ++i) {
    require_compatible(bufs.front(), bufs[i], "mixdown");
    auto src = bufs[i].data();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += src[k];
  }
  return AudioBuffer(std::move(acc), bufs.front().channels(),
                     bufs.front().sample_rate());
}

AudioBuffer add_scaled(const AudioBuffer& a, const AudioBuffer& b, double scale) {
  require_compatible(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto y = b.data();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += scale * y[k];
  return AudioBuffer(std::move(out), a.channels(), a.sample_rate());
}

AudioBuffer subtract(const AudioBuffer& a, const AudioBuffer& b) {
  return add_scaled(a, b, -1.0);
}

double sdr(const AudioBuffer& reference, const AudioBuffer& estimate) {
  require_compatible(reference, estimate, "sdr");
  const double num = energy(reference);
  if (num == 0.0) throw std::invalid_argument("undefined SDR: all-zero reference");
  double err = 0.0;
  auto s = reference.data();
  auto e = estimate.data();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double d = s[k] - e[k];
    err += d * d;
  }
  if (err == 0.0) return kSdrClampDb;
  return std::clamp(10.0 * std::log10(num / err), -kSdrClampDb, kSdrClampDb);
}

}  // namespace s5
