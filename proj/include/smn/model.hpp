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

// Pyramid architecture: geometry, weights and the per-level front-node
// recurrence that all engines share.
//
// Level 0 is the raw frame. Level l >= 1 holds
//   c_l(t) = norm_act(conv_pair(f_{l-1}(t - s_l), f_{l-1}(t)))
//   f_l(t) = spatial_pool(temporal_max(c_l(t - s_l), c_l(t)))
// with lag s_l = 2^(l-1). f_l(t) therefore depends on frames
// t - R_l + 1 .. t, R_l = 2^(l+1) - 1.

#include <cstdint>
#include <string>
#include <vector>

#include "smn/tensor.hpp"

namespace smn {

enum class Mode : std::uint8_t { Line = 1, Video = 2 };

inline const char* to_string(Mode m) { return m == Mode::Line ? "line" : "video"; }

/// Channel-free shape of the pyramid. Allows zero levels for the formulas.
struct Geometry {
  Mode mode = Mode::Line;
  int levels = 0;
  int width = 0;
  int height = 0;  // ignored for Line

  std::int64_t frames() const { return std::int64_t{1} << levels; }
  Extent extent_at(int level) const {
    if (mode == Mode::Line) return Extent::line(width >> level);
    return Extent::plane(height >> level, width >> level);
  }
  std::int64_t cells_at(int level) const {
    return static_cast<std::int64_t>(extent_at(level).cells());
  }
  /// Lag between the two temporal taps feeding level `level`.
  static std::int64_t lag(int level) { return std::int64_t{1} << (level - 1); }
  /// Frames a level-`level` front node depends on.
  static std::int64_t receptive_field(int level) { return (std::int64_t{2} << level) - 1; }
};

/// Unvalidated architecture description, as read from flags or a file header.
struct PyramidConfig {
  Mode mode = Mode::Line;
  int levels = 0;
  std::int64_t frames = 0;  // 0 derives T = 2^levels
  int width = 0;
  int height = 0;
  int in_channels = 1;
  std::vector<int> channels;
  std::vector<int> decoder_channels;
  int num_classes = 2;
  float epsilon = 1e-5f;
};

/// Validated architecture. Obtain through validate_spec().
struct PyramidSpec {
  Mode mode = Mode::Line;
  int levels = 0;
  int width = 0;
  int height = 0;
  int in_channels = 0;
  std::vector<int> channels;          // encoder widths, levels 1..L
  std::vector<int> decoder_channels;  // decoder outputs, levels 1..L
  int num_classes = 0;
  float epsilon = 1e-5f;

  Geometry geometry() const { return {mode, levels, width, height}; }
  std::int64_t frames() const { return geometry().frames(); }
  int spatial_rank() const { return mode == Mode::Line ? 1 : 2; }
  Extent extent_at(int level) const { return geometry().extent_at(level); }
  std::int64_t receptive_field() const { return Geometry::receptive_field(levels); }

  /// Channels of f_level.
  int width_at(int level) const { return level == 0 ? in_channels : channels[level - 1]; }
  int decoder_in(int level) const {
    const int up = level == levels ? channels[levels - 1] : decoder_channels[level];
    return up + width_at(level - 1);
  }
  int decoder_out(int level) const { return decoder_channels[level - 1]; }

  friend bool operator==(const PyramidSpec&, const PyramidSpec&) = default;
};

inline std::vector<int> default_channels(int levels) {
  const std::vector<int> base{16, 32, 32, 64, 64};
  std::vector<int> out;
  for (int l = 0; l < levels; ++l) out.push_back(l < 5 ? base[l] : 64);
  return out;
}

inline std::vector<int> default_decoder_channels(int levels) {
  std::vector<int> out = default_channels(levels);
  for (int& c : out) c /= 2;
  return out;
}

class SpecError : public Error {
 public:
  using Error::Error;
};

inline PyramidSpec validate_spec(const PyramidConfig& cfg) {
  auto fail = [](const std::string& m) { throw SpecError("invalid pyramid spec: " + m); };
  if (cfg.mode != Mode::Line && cfg.mode != Mode::Video) fail("unknown mode");
  if (cfg.levels < 1 || cfg.levels > 24) fail("levels must be in 1..24");
  const std::int64_t t = std::int64_t{1} << cfg.levels;
  if (cfg.frames != 0) {
    if ((cfg.frames & (cfg.frames - 1)) != 0) fail("T must be a power of two");
    if (cfg.frames != t) fail("T must equal 2^levels");
  }
  if (cfg.width <= 0 || cfg.width % t != 0) fail("width must be a positive multiple of 2^levels");
  if (cfg.mode == Mode::Video && (cfg.height <= 0 || cfg.height % t != 0))
    fail("height must be a positive multiple of 2^levels");
  if (cfg.in_channels <= 0) fail("in_channels must be positive");
  if (cfg.channels.empty() || cfg.decoder_channels.empty()) fail("empty channel list");
  if (static_cast<int>(cfg.channels.size()) != cfg.levels ||
      static_cast<int>(cfg.decoder_channels.size()) != cfg.levels)
    fail("channel lists must have one entry per level");
  for (int c : cfg.channels)
    if (c <= 0) fail("channel widths must be positive");
  for (int c : cfg.decoder_channels)
    if (c <= 0) fail("decoder widths must be positive");
  if (cfg.num_classes < 1 || cfg.num_classes > 256) fail("num_classes must be in 1..256");
  if (!(cfg.epsilon > 0.0f) || !std::isfinite(cfg.epsilon)) fail("epsilon must be positive");

  PyramidSpec s;
  s.mode = cfg.mode;
  s.levels = cfg.levels;
  s.width = cfg.width;
  s.height = cfg.mode == Mode::Line ? 0 : cfg.height;
  s.in_channels = cfg.in_channels;
  s.channels = cfg.channels;
  s.decoder_channels = cfg.decoder_channels;
  s.num_classes = cfg.num_classes;
  s.epsilon = cfg.epsilon;
  return s;
}

struct LayerWeights {
  ConvKernel kernel;
  NormParams norm;
};

struct Weights {
  std::vector<LayerWeights> encoder;  // index l-1 for level l
  std::vector<LayerWeights> decoder;  // index l-1 for level l
  ConvKernel classifier;

  const LayerWeights& encoder_at(int level) const { return encoder[level - 1]; }
  const LayerWeights& decoder_at(int level) const { return decoder[level - 1]; }

  friend bool operator==(const Weights& a, const Weights& b);
};

inline bool operator==(const ConvKernel& a, const ConvKernel& b) {
  return a.out_channels == b.out_channels && a.in_channels == b.in_channels &&
         a.temporal_taps == b.temporal_taps && a.spatial_taps == b.spatial_taps &&
         a.spatial_rank == b.spatial_rank && a.weights == b.weights && a.bias == b.bias;
}
inline bool operator==(const NormParams& a, const NormParams& b) {
  return a.gamma == b.gamma && a.beta == b.beta && a.mean == b.mean &&
         a.variance == b.variance && a.epsilon == b.epsilon;
}
inline bool operator==(const LayerWeights& a, const LayerWeights& b) {
  return a.kernel == b.kernel && a.norm == b.norm;
}
inline bool operator==(const Weights& a, const Weights& b) {
  return a.encoder == b.encoder && a.decoder == b.decoder && a.classifier == b.classifier;
}

/// Zero-valued weights with every shape implied by the PyramidSpec.
inline Weights make_weights(const PyramidSpec& s) {
  const int rank = s.spatial_rank();
  Weights w;
  for (int l = 1; l <= s.levels; ++l)
    w.encoder.push_back({ConvKernel(s.width_at(l), s.width_at(l - 1), 2, 2, rank),
                         NormParams(s.width_at(l), s.epsilon)});
  for (int l = 1; l <= s.levels; ++l)
    w.decoder.push_back({ConvKernel(s.decoder_out(l), s.decoder_in(l), 1, 2, rank),
                         NormParams(s.decoder_out(l), s.epsilon)});
  w.classifier = ConvKernel(s.num_classes, s.decoder_channels[0], 1, 1, rank);
  return w;
}

inline bool norm_consistent(const NormParams& p, int channels) {
  const auto c = static_cast<std::size_t>(channels);
  return p.gamma.size() == c && p.beta.size() == c && p.mean.size() == c &&
         p.variance.size() == c;
}

/// Throws SpecError unless every weight array matches the PyramidSpec and is finite.
inline void check_weights(const PyramidSpec& s, const Weights& w) {
  const Weights ref = make_weights(s);
  auto same_shape = [](const ConvKernel& a, const ConvKernel& b) {
    return a.out_channels == b.out_channels && a.in_channels == b.in_channels &&
           a.temporal_taps == b.temporal_taps && a.spatial_taps == b.spatial_taps &&
           a.spatial_rank == b.spatial_rank && a.consistent();
  };
  auto check_layer = [&](const LayerWeights& got, const LayerWeights& want) {
    if (!same_shape(got.kernel, want.kernel) ||
        !norm_consistent(got.norm, want.kernel.out_channels))
      throw SpecError("weight shapes do not match the pyramid spec");
    for (float v : got.norm.variance)
      if (v < 0.0f) throw SpecError("negative normalization variance");
    if (!all_finite(got.kernel.weights) || !all_finite(got.kernel.bias) ||
        !all_finite(got.norm.gamma) || !all_finite(got.norm.beta) ||
        !all_finite(got.norm.mean) || !all_finite(got.norm.variance))
      throw SpecError("non-finite weight value");
  };
  if (w.encoder.size() != ref.encoder.size() || w.decoder.size() != ref.decoder.size())
    throw SpecError("weight level count does not match the pyramid spec");
  for (std::size_t i = 0; i < ref.encoder.size(); ++i) check_layer(w.encoder[i], ref.encoder[i]);
  for (std::size_t i = 0; i < ref.decoder.size(); ++i) check_layer(w.decoder[i], ref.decoder[i]);
  if (!same_shape(w.classifier, ref.classifier))
    throw SpecError("classifier shape does not match the pyramid spec");
  if (!all_finite(w.classifier.weights) || !all_finite(w.classifier.bias))
    throw SpecError("non-finite weight value");
}

/// splitmix64 (Steele, Lea, Flood).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  /// Uniform double in [0, 1) from the top 53 bits.
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Maps one generator draw to a weight in [-0.5/fan_in, +0.5/fan_in).
inline float weight_from_draw(double unit, int fan_in) {
  return static_cast<float>((unit - 0.5) / static_cast<double>(fan_in));
}

/// Seeded weights. Kernels and biases are drawn in file order; normalization
/// stays at the identity (gamma 1, beta 0, mean 0, variance 1).
inline Weights init_weights(const PyramidSpec& s, std::uint64_t seed) {
  Weights w = make_weights(s);
  SplitMix64 rng(seed);
  auto draw = [&](ConvKernel& k) {
    const int fan = k.fan_in();
    for (float& v : k.weights) v = weight_from_draw(rng.next_unit(), fan);
    for (float& v : k.bias) v = weight_from_draw(rng.next_unit(), fan);
  };
  for (auto& layer : w.encoder) draw(layer.kernel);
  for (int l = s.levels; l >= 1; --l) draw(w.decoder[l - 1].kernel);
  draw(w.classifier);
  return w;
}

/// Newest node per level, f_0(t) .. f_L(t).
struct FrontColumn {
  std::vector<FeatureMap> maps;

  const FeatureMap& at(int level) const { return maps[level]; }
};

inline bool bitwise_equal(const FrontColumn& a, const FrontColumn& b) {
  if (a.maps.size() != b.maps.size()) return false;
  for (std::size_t i = 0; i < a.maps.size(); ++i)
    if (!bitwise_equal(a.maps[i], b.maps[i])) return false;
  return true;
}

/// Conv half of the level recurrence: c_l(t) from f_{l-1}(t - s_l), f_{l-1}(t).
inline FeatureMap encode_conv(const PyramidSpec& s, const Weights& w, int level,
                              const FeatureMap& f_prev_lag, const FeatureMap& f_prev_new) {
  if (level < 1 || level > s.levels) throw ShapeError("encoder level out of range");
  const Extent e = s.extent_at(level - 1);
  if (f_prev_new.extent() != e || f_prev_new.channels() != s.width_at(level - 1))
    throw ShapeError("level input does not match the pyramid spec");
  const LayerWeights& lw = w.encoder_at(level);
  FeatureMap c = conv_pair(f_prev_lag, f_prev_new, lw.kernel);
  norm_act_inplace(c, lw.norm);
  return c;
}

/// Pool half of the level recurrence: f_l(t) from c_l(t - s_l), c_l(t).
inline FeatureMap encode_pool(const FeatureMap& c_lag, const FeatureMap& c_new) {
  return spatial_pool(temporal_max(c_lag, c_new));
}

struct EncodedFront {
  FeatureMap c_new;
  FeatureMap f_new;
};

/// One level of the front-node recurrence.
inline EncodedFront encode_front(const PyramidSpec& s, const Weights& w, int level,
                                 const FeatureMap& f_prev_new, const FeatureMap& f_prev_lag,
                                 const FeatureMap& c_lag) {
  EncodedFront out;
  out.c_new = encode_conv(s, w, level, f_prev_lag, f_prev_new);
  out.f_new = encode_pool(c_lag, out.c_new);
  return out;
}

/// Decoder logits for the newest frame: one spatial conv per level with a
/// concatenation skip from the encoder front, then the 1x1 classifier.
inline FeatureMap decode_logits(const PyramidSpec& s, const Weights& w, const FrontColumn& front) {
  if (static_cast<int>(front.maps.size()) != s.levels + 1)
    throw ShapeError("front column must hold levels 0..L");
  for (int l = 0; l <= s.levels; ++l)
    if (front.maps[l].extent() != s.extent_at(l) || front.maps[l].channels() != s.width_at(l))
      throw ShapeError("front column level " + std::to_string(l) + " has the wrong shape");
  FeatureMap d = front.maps[s.levels];
  for (int l = s.levels; l >= 1; --l) {
    const LayerWeights& lw = w.decoder_at(l);
    d = conv_spatial(concat_channels(upsample_nearest(d), front.maps[l - 1]), lw.kernel);
    norm_act_inplace(d, lw.norm);
  }
  return conv_spatial(d, w.classifier);
}

inline LabelMap decode_latest(const PyramidSpec& s, const Weights& w, const FrontColumn& front) {
  return argmax_channels(decode_logits(s, w, front));
}

/// Multiply-adds of one decode_latest call, per level (index 0 = classifier).
inline std::vector<std::uint64_t> decode_mult_counts(const PyramidSpec& s, const Weights& w) {
  std::vector<std::uint64_t> out(s.levels + 1, 0);
  for (int l = 1; l <= s.levels; ++l)
    out[l] = conv_mult_count(s.extent_at(l - 1), w.decoder_at(l).kernel);
  out[0] = conv_mult_count(s.extent_at(0), w.classifier);
  return out;
}

}  // namespace smn
