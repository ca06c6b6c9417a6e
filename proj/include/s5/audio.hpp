#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace s5 {

inline constexpr int kDefaultSampleRate = 32000;

/// Multichannel sampled waveform, stored channel-major ([channels x frames]).
/// Values are always finite; constructors reject NaN/Inf.
class AudioBuffer {
 public:
  AudioBuffer() = default;
  AudioBuffer(std::size_t channels, std::size_t frames,
              int sample_rate = kDefaultSampleRate);
  AudioBuffer(std::vector<double> samples, std::size_t channels,
              int sample_rate = kDefaultSampleRate);

  static AudioBuffer mono(std::vector<double> samples,
                          int sample_rate = kDefaultSampleRate);
  static AudioBuffer zeros_like(const AudioBuffer& other);

  std::size_t channels() const { return channels_; }
  std::size_t frames() const { return channels_ == 0 ? 0 : data_.size() / channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  int sample_rate() const { return sample_rate_; }

  std::span<const double> data() const { return data_; }
  std::span<const double> channel(std::size_t c) const;

  double operator()(std::size_t c, std::size_t t) const {
    return data_[c * frames() + t];
  }

  bool same_shape(const AudioBuffer& other) const {
    return channels_ == other.channels_ && data_.size() == other.data_.size();
  }

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

 private:
  std::vector<double> data_;
  std::size_t channels_ = 0;
  int sample_rate_ = kDefaultSampleRate;
};

/// Ordered, unique class names. Index in the list is the class id.
class ClassVocabulary {
 public:
  explicit ClassVocabulary(std::vector<std::string> names);

  /// "class_00" .. "class_{n-1}" placeholder names.
  static ClassVocabulary placeholder(std::size_t n = 18);
  /// One name per line; blank lines and '#' comments skipped.
  static ClassVocabulary from_file(const std::filesystem::path& path);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t id) const;
  std::optional<std::size_t> find(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

double power(const AudioBuffer& buf);
double energy(const AudioBuffer& buf);
double dot(const AudioBuffer& a, const AudioBuffer& b);

AudioBuffer apply_gain(const AudioBuffer& buf, double gain);
AudioBuffer mixdown(std::span<const AudioBuffer> bufs);
AudioBuffer subtract(const AudioBuffer& a, const AudioBuffer& b);
/// a + scale * b
AudioBuffer add_scaled(const AudioBuffer& a, const AudioBuffer& b, double scale);

inline constexpr double kSdrClampDb = 60.0;

/// 10*log10(|s|^2 / |s - s_hat|^2), clamped to [-60, 60] dB.
double sdr(const AudioBuffer& reference, const AudioBuffer& estimate);

/// Shape and sample-rate agreement check; throws std::invalid_argument naming
/// `what` on mismatch.
void require_compatible(const AudioBuffer& a, const AudioBuffer& b,
                        const char* what);

}  // namespace s5
