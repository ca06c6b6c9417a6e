#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "s5/audio.hpp"

namespace s5 {

/// Reads a RIFF/WAVE file. Accepts IEEE float32 and 16-bit PCM; samples
/// are returned as doubles (PCM scaled to [-1, 1)).
AudioBuffer read_wav(const std::filesystem::path& path);

/// Writes 32-bit float little-endian WAV via temp file + rename.
void write_wav(const std::filesystem::path& path, const AudioBuffer& buf);

/// Writes `contents` to `path` atomically (temp file in the same directory,
/// then rename). Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace s5
