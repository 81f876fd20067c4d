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

// Deterministic dense kernels shared by every evaluation engine.
//
// Every kernel produces bit-identical results for identical inputs. The
// convolutions accumulate each output cell into one float accumulator in a
// fixed order: input channel (outer), temporal tap, spatial taps row-major,
// bias last. The loops are vectorized across output cells only, which leaves
// the per-cell order untouched. Builds must not contract a*b+c into fma
// (-ffp-contract=off is set on the interface target).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when operand shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Spatial extent of one node value. Line maps have rank 1 and height 1.
struct Extent {
  int rank = 1;
  int height = 1;
  int width = 1;

  static Extent line(int width) { return {1, 1, width}; }
  static Extent plane(int height, int width) { return {2, height, width}; }

  std::size_t cells() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  Extent halved() const { return {rank, rank == 2 ? height / 2 : 1, width / 2}; }
  Extent doubled() const { return {rank, rank == 2 ? height * 2 : 1, width * 2}; }

  friend bool operator==(const Extent&, const Extent&) = default;
};

inline std::string to_string(const Extent& e) {
  if (e.rank == 1) return std::to_string(e.width);
  return std::to_string(e.height) + "x" + std::to_string(e.width);
}

/// Dense channel-major float grid: data[(c * height + y) * width + x].
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, Extent extent)
      : channels_(channels), extent_(extent),
        data_(static_cast<std::size_t>(channels) * extent.cells(), 0.0f) {
    if (channels < 0 || extent.height <= 0 || extent.width <= 0 ||
        (extent.rank != 1 && extent.rank != 2) ||
        (extent.rank == 1 && extent.height != 1))
      throw ShapeError("invalid feature map shape");
  }
  FeatureMap(int channels, Extent extent, std::vector<float> data)
      : FeatureMap(channels, extent) {
    if (data.size() != data_.size())
      throw ShapeError("feature map data length mismatch");
    data_ = std::move(data);
  }

  int channels() const { return channels_; }
  const Extent& extent() const { return extent_; }
  std::size_t plane_size() const { return extent_.cells(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty() && channels_ == 0; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  std::span<float> channel(int c) {
    return std::span<float>(data_).subspan(c * plane_size(), plane_size());
  }
  std::span<const float> channel(int c) const {
    return std::span<const float>(data_).subspan(c * plane_size(), plane_size());
  }

  float& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * extent_.height + y) * extent_.width + x];
  }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * extent_.height + y) * extent_.width + x];
  }

  bool same_shape(const FeatureMap& o) const {
    return channels_ == o.channels_ && extent_ == o.extent_;
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  int channels_ = 0;
  Extent extent_{};
  std::vector<float> data_;
};

/// Bitwise comparison; distinguishes +0 from -0 and compares NaN payloads.
inline bool bitwise_equal(const FeatureMap& a, const FeatureMap& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

/// Index of the first bitwise-differing scalar, or -1.
inline std::ptrdiff_t first_difference(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) return 0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i)
    if (std::memcmp(&da[i], &db[i], sizeof(float)) != 0)
      return static_cast<std::ptrdiff_t>(i);
  return -1;
}

inline bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

/// Convolution kernel, weights laid out [out][in][temporal tap][ky][kx].
struct ConvKernel {
  int out_channels = 0;
  int in_channels = 0;
  int temporal_taps = 1;
  int spatial_taps = 1;  // per spatial dim
  int spatial_rank = 1;
  std::vector<float> weights;
  std::vector<float> bias;

  ConvKernel() = default;
  ConvKernel(int out_ch, int in_ch, int t_taps, int s_taps, int rank)
      : out_channels(out_ch), in_channels(in_ch), temporal_taps(t_taps),
        spatial_taps(s_taps), spatial_rank(rank),
        weights(static_cast<std::size_t>(out_ch) * in_ch * t_taps * taps_per_plane(s_taps, rank)),
        bias(static_cast<std::size_t>(out_ch)) {}

  static int taps_per_plane(int s_taps, int rank) { return rank == 2 ? s_taps * s_taps : s_taps; }
  int taps_y() const { return spatial_rank == 2 ? spatial_taps : 1; }
  int plane_taps() const { return taps_per_plane(spatial_taps, spatial_rank); }
  int fan_in() const { return in_channels * temporal_taps * plane_taps(); }

  std::size_t expected_weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * temporal_taps * plane_taps();
  }
  bool consistent() const {
    return weights.size() == expected_weight_count() &&
           bias.size() == static_cast<std::size_t>(out_channels);
  }

  float& weight(int o, int i, int t, int ky, int kx) {
    return weights[(((static_cast<std::size_t>(o) * in_channels + i) * temporal_taps + t) *
                        taps_y() + ky) * spatial_taps + kx];
  }
  float weight(int o, int i, int t, int ky, int kx) const {
    return weights[(((static_cast<std::size_t>(o) * in_channels + i) * temporal_taps + t) *
                        taps_y() + ky) * spatial_taps + kx];
  }
};

/// Inference-time batch normalization parameters.
struct NormParams {
  std::vector<float> gamma, beta, mean, variance;
  float epsilon = 1e-5f;

  NormParams() = default;
  explicit NormParams(int channels, float eps = 1e-5f)
      : gamma(channels, 1.0f), beta(channels, 0.0f), mean(channels, 0.0f),
        variance(channels, 1.0f), epsilon(eps) {}

  std::size_t channels() const { return gamma.size(); }
};

/// Per-cell class indices for one frame.
struct LabelMap {
  Extent extent{};
  std::vector<std::uint8_t> labels;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

// Accumulates one input plane through one kernel tap plane into acc, for
// every output cell. Out-of-range taps read zero and are skipped, which is
// bitwise neutral for the accumulator (it can never hold -0).
inline void accumulate_plane(std::span<float> acc, std::span<const float> src,
                             const Extent& e, const float* taps, int taps_y,
                             int taps_x) {
  const int h = e.height;
  const int w = e.width;
  for (int ky = 0; ky < taps_y; ++ky) {
    for (int kx = 0; kx < taps_x; ++kx) {
      const float wt = taps[ky * taps_x + kx];
      for (int y = 0; y + ky < h; ++y) {
        float* a = acc.data() + static_cast<std::size_t>(y) * w;
        const float* s = src.data() + static_cast<std::size_t>(y + ky) * w + kx;
        const int n = w - kx;
        for (int x = 0; x < n; ++x) a[x] += wt * s[x];
      }
    }
  }
}

// Shared body of conv_pair / conv_spatial. inputs[t] feeds temporal tap t.
inline FeatureMap convolve(std::span<const FeatureMap* const> inputs, const ConvKernel& k) {
  const FeatureMap& first = *inputs[0];
  require(k.consistent(), "kernel weight/bias length mismatch");
  require(static_cast<int>(inputs.size()) == k.temporal_taps, "temporal tap count mismatch");
  require(first.channels() == k.in_channels, "kernel in_channels mismatch");
  require(k.spatial_rank == first.extent().rank, "kernel spatial rank mismatch");
  for (const FeatureMap* m : inputs) {
    require(m->same_shape(first), "convolution inputs differ in shape");
    if (!all_finite(m->data())) throw Error("non-finite convolution input");
  }
  const Extent e = first.extent();
  FeatureMap out(k.out_channels, e);
  const int ty = k.taps_y();
  const int tx = k.spatial_taps;
  const int plane = k.plane_taps();
  for (int o = 0; o < k.out_channels; ++o) {
    std::span<float> acc = out.channel(o);
    for (int i = 0; i < k.in_channels; ++i) {
      for (int t = 0; t < k.temporal_taps; ++t) {
        const float* taps =
            k.weights.data() +
            ((static_cast<std::size_t>(o) * k.in_channels + i) * k.temporal_taps + t) * plane;
        accumulate_plane(acc, inputs[t]->channel(i), e, taps, ty, tx);
      }
    }
    const float b = k.bias[o];
    for (float& v : acc) v += b;
  }
  return out;
}

}  // namespace detail

/// Two-tap temporal convolution: tap 0 reads f_lag, tap 1 reads f_new.
inline FeatureMap conv_pair(const FeatureMap& f_lag, const FeatureMap& f_new,
                            const ConvKernel& k) {
  detail::require(k.temporal_taps == 2, "conv_pair needs a 2-tap temporal kernel");
  const FeatureMap* in[2] = {&f_lag, &f_new};
  return detail::convolve(in, k);
}

/// Single-frame convolution (decoder and classifier).
inline FeatureMap conv_spatial(const FeatureMap& m, const ConvKernel& k) {
  detail::require(k.temporal_taps == 1, "conv_spatial needs a 1-tap temporal kernel");
  const FeatureMap* in[1] = {&m};
  return detail::convolve(in, k);
}

/// Number of multiply-adds a convolution of this kernel performs on extent e.
inline std::uint64_t conv_mult_count(const Extent& e, const ConvKernel& k) {
  std::uint64_t valid = 0;
  for (int ky = 0; ky < k.taps_y(); ++ky)
    for (int kx = 0; kx < k.spatial_taps; ++kx)
      valid += static_cast<std::uint64_t>(std::max(0, e.height - ky)) *
               static_cast<std::uint64_t>(std::max(0, e.width - kx));
  return valid * static_cast<std::uint64_t>(k.out_channels) * k.in_channels * k.temporal_taps;
}

/// Normalization followed by rectification, per channel:
/// y = gamma * (x - mean) / sqrt(variance + epsilon) + beta; max(y, 0).
inline void norm_act_inplace(FeatureMap& m, const NormParams& p) {
  const auto c = static_cast<std::size_t>(m.channels());
  detail::require(p.gamma.size() == c && p.beta.size() == c && p.mean.size() == c &&
                      p.variance.size() == c,
                  "norm parameter length mismatch");
  for (int ch = 0; ch < m.channels(); ++ch) {
    const float g = p.gamma[ch];
    const float mu = p.mean[ch];
    const float bt = p.beta[ch];
    const float sd = std::sqrt(p.variance[ch] + p.epsilon);
    for (float& x : m.channel(ch)) {
      const float y = g * (x - mu) / sd + bt;
      x = y > 0.0f ? y : 0.0f;
    }
  }
}

inline FeatureMap norm_act(FeatureMap m, const NormParams& p) {
  norm_act_inplace(m, p);
  return m;
}

/// Elementwise maximum of two same-shaped maps.
inline FeatureMap temporal_max(const FeatureMap& a, const FeatureMap& b) {
  detail::require(a.same_shape(b), "temporal_max operands differ in shape");
  FeatureMap out(a.channels(), a.extent());
  auto da = a.data();
  auto db = b.data();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::max(da[i], db[i]);
  return out;
}

/// Stride-2 max pool over 2 (line) or 2x2 (plane) cells.
inline FeatureMap spatial_pool(const FeatureMap& m) {
  const Extent e = m.extent();
  detail::require(e.width % 2 == 0 && (e.rank == 1 || e.height % 2 == 0),
                  "spatial_pool needs even spatial dims");
  FeatureMap out(m.channels(), e.halved());
  const Extent h = out.extent();
  for (int c = 0; c < m.channels(); ++c) {
    for (int y = 0; y < h.height; ++y) {
      for (int x = 0; x < h.width; ++x) {
        float v;
        if (e.rank == 1) {
          v = std::max(m.at(c, 0, 2 * x), m.at(c, 0, 2 * x + 1));
        } else {
          v = std::max(std::max(m.at(c, 2 * y, 2 * x), m.at(c, 2 * y, 2 * x + 1)),
                       std::max(m.at(c, 2 * y + 1, 2 * x), m.at(c, 2 * y + 1, 2 * x + 1)));
        }
        out.at(c, y, x) = v;
      }
    }
  }
  return out;
}

/// Nearest-neighbour 2x expansion per spatial dim.
inline FeatureMap upsample_nearest(const FeatureMap& m) {
  FeatureMap out(m.channels(), m.extent().doubled());
  const Extent e = out.extent();
  const int sy = e.rank == 2 ? 2 : 1;
  for (int c = 0; c < m.channels(); ++c)
    for (int y = 0; y < e.height; ++y)
      for (int x = 0; x < e.width; ++x) out.at(c, y, x) = m.at(c, y / sy, x / 2);
  return out;
}

/// Channel concatenation, a's channels first.
inline FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
  detail::require(a.extent() == b.extent(), "concat_channels spatial mismatch");
  FeatureMap out(a.channels() + b.channels(), a.extent());
  auto d = out.data();
  std::copy(a.data().begin(), a.data().end(), d.begin());
  std::copy(b.data().begin(), b.data().end(), d.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

/// Per-cell index of the largest channel; ties go to the lowest index.
inline LabelMap argmax_channels(const FeatureMap& m) {
  detail::require(m.channels() >= 1 && m.channels() <= 256, "argmax needs 1..256 channels");
  LabelMap out{m.extent(), std::vector<std::uint8_t>(m.plane_size(), 0)};
  for (std::size_t i = 0; i < m.plane_size(); ++i) {
    int best = 0;
    float best_v = m.channel(0)[i];
    for (int c = 1; c < m.channels(); ++c) {
      const float v = m.channel(c)[i];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    out.labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace smn
