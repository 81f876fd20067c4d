/*
 * Copyright The SMN Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Frame streams (SMNS), label streams (SMNL) and the synthetic scene
// generator.
//
// SMNS: "SMNS" u32 version=1 u8 mode u8 dtype u32 W u32 H(0 for line)
//       u32 channels u64 frame_count(0 = unbounded), then frames of
//       channels*H*W values, channel-major, row-major. dtype 1 = u8
//       (read as v/255), 2 = f32.
// SMNL: "SMNL" u32 version=1 u8 mode u32 W u32 H(0 for line), then per
//       READY frame: u64 frame_index, H*W u8 labels row-major.

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "smn/binary_io.hpp"
#include "smn/model.hpp"

namespace smn {

enum class DType : std::uint8_t { U8 = 1, F32 = 2 };

struct StreamHeader {
  Mode mode = Mode::Line;
  DType dtype = DType::F32;
  std::uint32_t width = 0;
  std::uint32_t height = 0;  // 0 for line
  std::uint32_t channels = 1;
  std::uint64_t frame_count = 0;

  Extent extent() const {
    return mode == Mode::Line ? Extent::line(static_cast<int>(width))
                              : Extent::plane(static_cast<int>(height), static_cast<int>(width));
  }
  std::size_t values_per_frame() const { return channels * extent().cells(); }
  std::size_t bytes_per_frame() const {
    return values_per_frame() * (dtype == DType::U8 ? 1 : 4);
  }
};

inline constexpr std::uint32_t kStreamVersion = 1;
inline constexpr std::uint32_t kLabelsVersion = 1;

inline void write_stream_header(std::ostream& os, const StreamHeader& h) {
  io::put_magic(os, "SMNS");
  io::put_u32(os, kStreamVersion);
  io::put_u8(os, static_cast<std::uint8_t>(h.mode));
  io::put_u8(os, static_cast<std::uint8_t>(h.dtype));
  io::put_u32(os, h.width);
  io::put_u32(os, h.mode == Mode::Line ? 0u : h.height);
  io::put_u32(os, h.channels);
  io::put_u64(os, h.frame_count);
}

inline StreamHeader read_stream_header(std::istream& is) {
  io::expect_magic(is, "SMNS");
  if (const auto v = io::get_u32(is, "stream version"); v != kStreamVersion)
    throw FormatError("unsupported stream version " + std::to_string(v));
  StreamHeader h;
  const auto mode = io::get_u8(is, "mode");
  const auto dtype = io::get_u8(is, "dtype");
  if (mode != 1 && mode != 2) throw FormatError("bad stream mode byte");
  if (dtype != 1 && dtype != 2) throw FormatError("bad stream dtype byte");
  h.mode = static_cast<Mode>(mode);
  h.dtype = static_cast<DType>(dtype);
  h.width = io::get_u32(is, "width");
  h.height = io::get_u32(is, "height");
  h.channels = io::get_u32(is, "channels");
  h.frame_count = io::get_u64(is, "frame_count");
  if (h.width == 0 || h.channels == 0 || (h.mode == Mode::Video && h.height == 0))
    throw FormatError("stream dims must be positive");
  if (h.mode == Mode::Line && h.height != 0) throw FormatError("line stream must have H = 0");
  return h;
}

/// Writes one frame in the header's dtype. u8 payloads are rounded from v*255.
inline void write_frame(std::ostream& os, const StreamHeader& h, const FeatureMap& f) {
  if (f.extent() != h.extent() || static_cast<std::uint32_t>(f.channels()) != h.channels)
    throw ShapeError("frame does not match the stream header");
  if (h.dtype == DType::F32) {
    io::put_f32s(os, f.data());
  } else {
    for (float v : f.data()) {
      const float c = std::clamp(v, 0.0f, 1.0f);
      io::put_u8(os, static_cast<std::uint8_t>(std::lround(c * 255.0f)));
    }
  }
}

/// Sequential frame reader over an SMNS stream.
class StreamReader {
 public:
  explicit StreamReader(std::istream& is) : is_(is), header_(read_stream_header(is)) {}

  const StreamHeader& header() const { return header_; }
  std::int64_t frames_read() const { return index_; }

  /// Next frame, or nullopt at the end. A partial frame throws FormatError
  /// naming its index.
  std::optional<FeatureMap> next() {
    if (header_.frame_count != 0 && static_cast<std::uint64_t>(index_) >= header_.frame_count)
      return std::nullopt;
    buf_.resize(header_.bytes_per_frame());
    const std::size_t got = io::read_bytes(is_, reinterpret_cast<char*>(buf_.data()), buf_.size());
    if (got == 0 && header_.frame_count == 0) return std::nullopt;
    if (got != buf_.size())
      throw FormatError("truncated frame " + std::to_string(index_) + " (" +
                        std::to_string(got) + " of " + std::to_string(buf_.size()) + " bytes)");
    FeatureMap f(static_cast<int>(header_.channels), header_.extent());
    auto d = f.data();
    if (header_.dtype == DType::U8) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(buf_[i]) / 255.0f;
    } else {
      for (std::size_t i = 0; i < d.size(); ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(buf_[4 * i + b]) << (8 * b);
        d[i] = std::bit_cast<float>(u);
      }
      if (!all_finite(d))
        throw FormatError("non-finite value in frame " + std::to_string(index_));
    }
    ++index_;
    return f;
  }

 private:
  std::istream& is_;
  StreamHeader header_;
  std::int64_t index_ = 0;
  std::vector<std::uint8_t> buf_;
};

// ---------------------------------------------------------------------------
// Labels

class LabelWriter {
 public:
  LabelWriter(std::ostream& os, Mode mode, const Extent& extent) : os_(os), extent_(extent) {
    io::put_magic(os_, "SMNL");
    io::put_u32(os_, kLabelsVersion);
    io::put_u8(os_, static_cast<std::uint8_t>(mode));
    io::put_u32(os_, static_cast<std::uint32_t>(extent.width));
    io::put_u32(os_, mode == Mode::Line ? 0u : static_cast<std::uint32_t>(extent.height));
  }

  void write(std::int64_t frame_index, const LabelMap& labels) {
    if (labels.extent != extent_) throw ShapeError("label map does not match the label stream");
    io::put_u64(os_, static_cast<std::uint64_t>(frame_index));
    os_.write(reinterpret_cast<const char*>(labels.labels.data()),
              static_cast<std::streamsize>(labels.labels.size()));
    if (!os_) throw FormatError("failed writing labels");
  }

 private:
  std::ostream& os_;
  Extent extent_;
};

struct LabelRecord {
  std::int64_t frame_index = 0;
  LabelMap labels;
};

inline std::vector<LabelRecord> read_labels(std::istream& is, Mode* mode_out = nullptr) {
  io::expect_magic(is, "SMNL");
  if (const auto v = io::get_u32(is, "label version"); v != kLabelsVersion)
    throw FormatError("unsupported label version " + std::to_string(v));
  const auto mode = io::get_u8(is, "mode");
  if (mode != 1 && mode != 2) throw FormatError("bad label mode byte");
  const auto w = static_cast<int>(io::get_u32(is, "width"));
  const auto h = static_cast<int>(io::get_u32(is, "height"));
  const Extent e = mode == 1 ? Extent::line(w) : Extent::plane(h, w);
  if (mode_out) *mode_out = static_cast<Mode>(mode);
  std::vector<LabelRecord> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    LabelRecord r;
    r.frame_index = static_cast<std::int64_t>(io::get_u64(is, "label frame index"));
    r.labels.extent = e;
    r.labels.labels.resize(e.cells());
    if (io::read_bytes(is, reinterpret_cast<char*>(r.labels.labels.data()), e.cells()) !=
        e.cells())
      throw FormatError("truncated labels for frame " + std::to_string(r.frame_index));
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SceneObject {
  int width = 1;
  double velocity = 0.0;  // pixels per frame
  float intensity = 1.0f;
  int class_id = 1;
};

/// Moving bars (line) or square blocks (video) over a constant background.
/// Objects wrap around the frame; later objects draw over earlier ones.
struct SceneConfig {
  Mode mode = Mode::Line;
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<SceneObject> objects;
  float background = 0.0f;
  std::int64_t frames = 0;
  std::uint64_t seed = 0;
  DType dtype = DType::F32;
};

/// Initial positions: per object, x0 then (video) y0, drawn from splitmix64.
struct ScenePlacement {
  int x0 = 0;
  int y0 = 0;
};

inline std::vector<ScenePlacement> place_objects(const SceneConfig& cfg) {
  SplitMix64 rng(cfg.seed);
  std::vector<ScenePlacement> out;
  for (std::size_t i = 0; i < cfg.objects.size(); ++i) {
    ScenePlacement p;
    p.x0 = static_cast<int>(rng.next() % static_cast<std::uint64_t>(cfg.width));
    if (cfg.mode == Mode::Video)
      p.y0 = static_cast<int>(rng.next() % static_cast<std::uint64_t>(cfg.height));
    out.push_back(p);
  }
  return out;
}

inline int wrap(std::int64_t v, int n) {
  const std::int64_t m = v % n;
  return static_cast<int>(m < 0 ? m + n : m);
}

/// Frame t of the scene. Object i covers columns [round(x0 + v t) mod W, +width).
inline FeatureMap render_scene_frame(const SceneConfig& cfg,
                                     const std::vector<ScenePlacement>& placement,
                                     std::int64_t t) {
  const Extent e = cfg.mode == Mode::Line ? Extent::line(cfg.width)
                                          : Extent::plane(cfg.height, cfg.width);
  FeatureMap f(cfg.channels, e);
  f.fill(cfg.background);
  for (std::size_t i = 0; i < cfg.objects.size(); ++i) {
    const SceneObject& o = cfg.objects[i];
    const auto start = std::llround(placement[i].x0 + o.velocity * static_cast<double>(t));
    for (int dx = 0; dx < o.width; ++dx) {
      const int x = wrap(start + dx, cfg.width);
      const int rows = cfg.mode == Mode::Line ? 1 : o.width;
      for (int dy = 0; dy < rows; ++dy) {
        const int y = cfg.mode == Mode::Line ? 0 : wrap(placement[i].y0 + dy, cfg.height);
        for (int c = 0; c < cfg.channels; ++c) f.at(c, y, x) = o.intensity;
      }
    }
  }
  return f;
}

inline void validate_scene(const SceneConfig& cfg) {
  if (cfg.width <= 0 || (cfg.mode == Mode::Video && cfg.height <= 0) || cfg.channels <= 0)
    throw SpecError("scene dims must be positive");
  if (cfg.frames < 0) throw SpecError("frame count must be non-negative");
  for (const auto& o : cfg.objects) {
    if (o.width <= 0) throw SpecError("object width must be positive");
    if (o.class_id < 0 || o.class_id > 255) throw SpecError("object class id out of range");
    if (!(o.intensity >= 0.0f && o.intensity <= 1.0f))
      throw SpecError("object intensity must be in [0, 1]");
    if (!std::isfinite(o.velocity)) throw SpecError("object velocity must be finite");
  }
}

inline StreamHeader scene_header(const SceneConfig& cfg) {
  StreamHeader h;
  h.mode = cfg.mode;
  h.dtype = cfg.dtype;
  h.width = static_cast<std::uint32_t>(cfg.width);
  h.height = cfg.mode == Mode::Line ? 0u : static_cast<std::uint32_t>(cfg.height);
  h.channels = static_cast<std::uint32_t>(cfg.channels);
  h.frame_count = static_cast<std::uint64_t>(cfg.frames);
  return h;
}

inline void gen_synthetic(const SceneConfig& cfg, std::ostream& os) {
  validate_scene(cfg);
  const StreamHeader h = scene_header(cfg);
  write_stream_header(os, h);
  const auto placement = place_objects(cfg);
  for (std::int64_t t = 0; t < cfg.frames; ++t)
    write_frame(os, h, render_scene_frame(cfg, placement, t));
  if (!os) throw FormatError("failed writing stream");
}

}  // namespace smn
