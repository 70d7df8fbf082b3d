#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "concertcut/core/error.hpp"
#include "json.hpp"

namespace concertcut::labeler {

// Interleaved RGB8 image.
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  std::size_t pixels() const { return width * height; }

  static Frame solid(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Frame f{w, h, std::vector<std::uint8_t>(w * h * 3)};
    for (std::size_t i = 0; i < w * h; ++i) {
      f.rgb[3 * i] = r;
      f.rgb[3 * i + 1] = g;
      f.rgb[3 * i + 2] = b;
    }
    return f;
  }
};

struct FrameSequence {
  std::string video_id;
  double fps = 5.0;
  std::vector<Frame> frames;

  void validate() const {
    if (!(fps > 0)) throw ContractError("frame sequence: fps must be > 0");
    for (const auto& f : frames) {
      if (f.width != frames.front().width || f.height != frames.front().height) {
        throw ContractError("frame sequence: resolution changes within video " + video_id);
      }
      if (f.rgb.size() != f.pixels() * 3) throw DataFormatError("frame buffer size does not match resolution");
    }
  }
};

// BT.601 luma per pixel.
inline std::vector<double> grayscale(const Frame& f) {
  std::vector<double> g(f.pixels());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = 0.299 * f.rgb[3 * i] + 0.587 * f.rgb[3 * i + 1] + 0.114 * f.rgb[3 * i + 2];
  }
  return g;
}

inline double mean_abs_gray_diff(const Frame& a, const Frame& b) {
  if (a.pixels() != b.pixels() || a.pixels() == 0) throw DimensionError("frame size mismatch");
  const auto ga = grayscale(a), gb = grayscale(b);
  double s = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) s += std::abs(ga[i] - gb[i]);
  return s / static_cast<double>(ga.size());
}

// Binary PPM (P6, maxval 255).
inline Frame read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataFormatError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    while (true) {
      int c = is.get();
      if (c == EOF) throw DataFormatError("truncated PPM header in " + path.string());
      if (c == '#') {
        while (c != '\n' && c != EOF) c = is.get();
        continue;
      }
      if (std::isspace(c)) {
        if (!t.empty()) return t;
        continue;
      }
      t.push_back(static_cast<char>(c));
    }
  };
  if (token() != "P6") throw DataFormatError(path.string() + " is not a binary PPM");
  Frame f;
  try {
    f.width = std::stoul(token());
    f.height = std::stoul(token());
    if (std::stoul(token()) != 255) throw DataFormatError("PPM maxval must be 255");
  } catch (const std::logic_error&) {
    throw DataFormatError("malformed PPM header in " + path.string());
  }
  f.rgb.resize(f.pixels() * 3);
  is.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
  if (static_cast<std::size_t>(is.gcount()) != f.rgb.size()) throw DataFormatError("truncated PPM " + path.string());
  return f;
}

inline void write_ppm(const std::filesystem::path& path, const Frame& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataFormatError("cannot write " + path.string());
  os << "P6\n" << f.width << ' ' << f.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size()));
}

// Either a directory of numbered .ppm files (sorted by name; fps from an
// optional meta.json, else 5) or a raw RGB8 stream `frames.rgb` whose sidecar
// `frames.json` holds {width, height, fps}.
inline FrameSequence load_frames(const std::filesystem::path& path, const std::string& video_id) {
  namespace fs = std::filesystem;
  FrameSequence seq;
  seq.video_id = video_id;
  fs::path raw = path, sidecar;
  if (fs::is_directory(path)) {
    raw = path / "frames.rgb";
  }
  sidecar = fs::path(raw).replace_extension(".json");
  if (fs::exists(raw) && fs::exists(sidecar)) {
    nlohmann::json meta;
    try {
      std::ifstream(sidecar) >> meta;
      const std::size_t w = meta.at("width"), h = meta.at("height");
      seq.fps = meta.at("fps");
      std::ifstream is(raw, std::ios::binary);
      std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
      const std::size_t per = w * h * 3;
      if (per == 0 || bytes.size() % per != 0) throw DataFormatError("raw frame stream size is not a multiple of one frame");
      for (std::size_t off = 0; off < bytes.size(); off += per) {
        seq.frames.push_back({w, h, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                                                              bytes.begin() + static_cast<std::ptrdiff_t>(off + per))});
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataFormatError("bad frame sidecar " + sidecar.string() + ": " + e.what());
    }
  } else if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.path().extension() == ".ppm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) seq.frames.push_back(read_ppm(f));
    if (fs::exists(path / "meta.json")) {
      try {
        nlohmann::json meta;
        std::ifstream(path / "meta.json") >> meta;
        seq.fps = meta.value("fps", 5.0);
      } catch (const nlohmann::json::exception& e) {
        throw DataFormatError("bad meta.json in " + path.string() + ": " + e.what());
      }
    }
  } else {
    throw DataFormatError("no frames found at " + path.string());
  }
  seq.validate();
  return seq;
}

}  // namespace concertcut::labeler
