#include "s5/io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "s5/error.hpp"

namespace s5 {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::string& out, T v) {
  char tmp[sizeof(T)];
  std::memcpy(tmp, &v, sizeof(T));
  out.append(tmp, sizeof(T));
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto fail = [&](const std::string& why) -> IoError {
    return IoError(path.string() + ": " + why);
  };
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const char* payload = nullptr;
  std::size_t payload_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const auto size = load_le<std::uint32_t>(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw fail("truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) throw fail("short fmt chunk");
      format = load_le<std::uint16_t>(bytes.data() + body);
      channels = load_le<std::uint16_t>(bytes.data() + body + 2);
      rate = load_le<std::uint32_t>(bytes.data() + body + 4);
      bits = load_le<std::uint16_t>(bytes.data() + body + 14);
      if (format == kFormatExtensible && size >= 26) {
        format = load_le<std::uint16_t>(bytes.data() + body + 24);
      }
    } else if (id == "data") {
      payload = bytes.data() + body;
      payload_size = size;
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0) throw fail("missing fmt chunk");
  if (payload == nullptr) throw fail("missing data chunk");

  const bool is_float = format == kFormatFloat && bits == 32;
  const bool is_pcm16 = format == kFormatPcm && bits == 16;
  if (!is_float && !is_pcm16) {
    throw fail("unsupported encoding (need float32 or pcm16)");
  }
  const std::size_t width = bits / 8;
  const std::size_t frames = payload_size / (width * channels);

  // Interleaved on disk, channel-major in memory.
  std::vector<double> samples(frames * channels);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const char* p = payload + (t * channels + c) * width;
      samples[c * frames + t] =
          is_float ? static_cast<double>(load_le<float>(p))
                   : static_cast<double>(load_le<std::int16_t>(p)) / 32768.0;
    }
  }
  try {
    return AudioBuffer(std::move(samples), channels, static_cast<int>(rate));
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& buf) {
  const auto channels = static_cast<std::uint16_t>(buf.channels() == 0 ? 1 : buf.channels());
  const std::size_t frames = buf.frames();
  const auto data_bytes = static_cast<std::uint32_t>(frames * channels * 4);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_le<std::uint32_t>(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, kFormatFloat);
  put_le<std::uint16_t>(out, channels);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(buf.sample_rate()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(buf.sample_rate()) * channels * 4);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 4));
  put_le<std::uint16_t>(out, 32);
  out += "data";
  put_le<std::uint32_t>(out, data_bytes);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < buf.channels(); ++c) {
      put_le<float>(out, static_cast<float>(buf(c, t)));
    }
  }
  write_file_atomic(path, out);
}

}  // namespace s5
