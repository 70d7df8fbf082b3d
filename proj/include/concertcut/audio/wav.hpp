#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "concertcut/core/error.hpp"
#include "concertcut/io/tensor_file.hpp"

namespace concertcut::audio {

inline constexpr std::uint32_t kSampleRate = 16000;

struct AudioClip {
  std::vector<float> samples;
  std::uint32_t sample_rate = kSampleRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

inline void validate(const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate) {
    throw ContractError("audio must be resampled to 16000 Hz before ingestion (got " +
                        std::to_string(clip.sample_rate) + " Hz)");
  }
  if (clip.samples.empty()) throw ContractError("audio clip is empty");
}

namespace detail {

inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

// Mono PCM16 or IEEE float32 RIFF/WAVE. Other encodings and channel counts are
// data-format errors; a sample rate other than 16 kHz is a precondition error.
inline AudioClip parse_wav(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataFormatError("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = detail::le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      if (std::memcmp(chunk, "data", 4) == 0) {
        data = bytes.data() + body;
        data_len = bytes.size() - body;
      }
      break;
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw DataFormatError("short fmt chunk");
      format = detail::le16(chunk + 8);
      channels = detail::le16(chunk + 10);
      rate = detail::le32(chunk + 12);
      bits = detail::le16(chunk + 22);
      if (format == 0xFFFE && len >= 40) format = detail::le16(chunk + 8 + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (!data || channels == 0) throw DataFormatError("WAV is missing fmt or data chunk");
  if (channels != 1) throw DataFormatError("WAV must be mono, got " + std::to_string(channels) + " channels");
  AudioClip clip;
  clip.sample_rate = rate;
  if (format == 1 && bits == 16) {
    clip.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(detail::le16(data + 2 * i));
      clip.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == 3 && bits == 32) {
    clip.samples.resize(data_len / 4);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
      clip.samples[i] = std::bit_cast<float>(detail::le32(data + 4 * i));
    }
  } else {
    throw DataFormatError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                          std::to_string(bits) + " bits)");
  }
  validate(clip);
  return clip;
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataFormatError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

// Float32 mono writer; used by tooling and synthetic corpora.
inline void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  io::write_atomically(path, [&](std::ostream& os) {
    const auto data_len = static_cast<std::uint32_t>(clip.samples.size() * 4);
    os.write("RIFF", 4);
    io::detail::put_u32(os, 36 + data_len);
    os.write("WAVEfmt ", 8);
    io::detail::put_u32(os, 16);
    const char fmt[4] = {3, 0, 1, 0};  // IEEE float, mono
    os.write(fmt, 4);
    io::detail::put_u32(os, clip.sample_rate);
    io::detail::put_u32(os, clip.sample_rate * 4);
    const char align[4] = {4, 0, 32, 0};
    os.write(align, 4);
    os.write("data", 4);
    io::detail::put_u32(os, data_len);
    for (float f : clip.samples) io::detail::put_f32(os, f);
  });
}

}  // namespace concertcut::audio
