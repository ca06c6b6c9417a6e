#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "s5/audio.hpp"
#include "s5/random.hpp"

namespace s5::test {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "s5") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline AudioBuffer random_mono(Rng& rng, std::size_t frames, double scale = 1.0) {
  std::vector<double> v(frames);
  for (auto& x : v) x = scale * rng.normal();
  return AudioBuffer::mono(std::move(v));
}

}  // namespace s5::test
