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

// SMNW weight file.
//
//   "SMNW" u32 version=1 u8 mode u32 L u32 W u32 H(0 for line)
//   u32 in_channels u32 num_classes u32 channels[L] u32 decoder_channels[L]
//   f32 epsilon
//   encoder levels 1..L:  kernel bias gamma beta mean variance
//   decoder levels L..1:  kernel bias gamma beta mean variance
//   classifier:           kernel bias
//
// All multi-byte fields little-endian; arrays are f32.

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>

#include "smn/binary_io.hpp"
#include "smn/model.hpp"

namespace smn {

inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {

inline void put_layer(std::ostream& os, const LayerWeights& lw) {
  io::put_f32s(os, lw.kernel.weights);
  io::put_f32s(os, lw.kernel.bias);
  io::put_f32s(os, lw.norm.gamma);
  io::put_f32s(os, lw.norm.beta);
  io::put_f32s(os, lw.norm.mean);
  io::put_f32s(os, lw.norm.variance);
}

inline void get_layer(std::istream& is, LayerWeights& lw) {
  io::get_f32s(is, lw.kernel.weights, "kernel");
  io::get_f32s(is, lw.kernel.bias, "bias");
  io::get_f32s(is, lw.norm.gamma, "gamma");
  io::get_f32s(is, lw.norm.beta, "beta");
  io::get_f32s(is, lw.norm.mean, "mean");
  io::get_f32s(is, lw.norm.variance, "variance");
}

}  // namespace detail

inline void save_weights(const Weights& w, const PyramidSpec& s, std::ostream& os) {
  check_weights(s, w);
  io::put_magic(os, "SMNW");
  io::put_u32(os, kWeightsVersion);
  io::put_u8(os, static_cast<std::uint8_t>(s.mode));
  io::put_u32(os, static_cast<std::uint32_t>(s.levels));
  io::put_u32(os, static_cast<std::uint32_t>(s.width));
  io::put_u32(os, s.mode == Mode::Line ? 0u : static_cast<std::uint32_t>(s.height));
  io::put_u32(os, static_cast<std::uint32_t>(s.in_channels));
  io::put_u32(os, static_cast<std::uint32_t>(s.num_classes));
  for (int c : s.channels) io::put_u32(os, static_cast<std::uint32_t>(c));
  for (int c : s.decoder_channels) io::put_u32(os, static_cast<std::uint32_t>(c));
  io::put_f32(os, s.epsilon);
  for (int l = 1; l <= s.levels; ++l) detail::put_layer(os, w.encoder_at(l));
  for (int l = s.levels; l >= 1; --l) detail::put_layer(os, w.decoder_at(l));
  io::put_f32s(os, w.classifier.weights);
  io::put_f32s(os, w.classifier.bias);
  if (!os) throw FormatError("failed writing weight file");
}

inline std::pair<PyramidSpec, Weights> load_weights(std::istream& is) {
  io::expect_magic(is, "SMNW");
  if (const auto v = io::get_u32(is, "version"); v != kWeightsVersion)
    throw FormatError("unsupported weight file version " + std::to_string(v));
  PyramidConfig cfg;
  const auto mode = io::get_u8(is, "mode");
  if (mode != 1 && mode != 2) throw FormatError("bad mode byte in weight file");
  cfg.mode = static_cast<Mode>(mode);
  const auto levels = io::get_u32(is, "levels");
  if (levels < 1 || levels > 24) throw FormatError("level count out of range in weight file");
  cfg.levels = static_cast<int>(levels);
  cfg.width = static_cast<int>(io::get_u32(is, "width"));
  cfg.height = static_cast<int>(io::get_u32(is, "height"));
  cfg.in_channels = static_cast<int>(io::get_u32(is, "in_channels"));
  cfg.num_classes = static_cast<int>(io::get_u32(is, "num_classes"));
  for (int l = 0; l < cfg.levels; ++l)
    cfg.channels.push_back(static_cast<int>(io::get_u32(is, "channels")));
  for (int l = 0; l < cfg.levels; ++l)
    cfg.decoder_channels.push_back(static_cast<int>(io::get_u32(is, "decoder_channels")));
  cfg.epsilon = io::get_f32(is, "epsilon");

  PyramidSpec spec;
  try {
    spec = validate_spec(cfg);
  } catch (const SpecError& e) {
    throw FormatError(std::string("weight file header: ") + e.what());
  }
  Weights w = make_weights(spec);
  for (int l = 1; l <= spec.levels; ++l) detail::get_layer(is, w.encoder[l - 1]);
  for (int l = spec.levels; l >= 1; --l) detail::get_layer(is, w.decoder[l - 1]);
  io::get_f32s(is, w.classifier.weights, "classifier");
  io::get_f32s(is, w.classifier.bias, "classifier bias");
  try {
    check_weights(spec, w);
  } catch (const SpecError& e) {
    throw FormatError(std::string("weight file body: ") + e.what());
  }
  return {std::move(spec), std::move(w)};
}

inline void save_weights_file(const Weights& w, const PyramidSpec& s, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  save_weights(w, s, os);
}

inline std::pair<PyramidSpec, Weights> load_weights_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return load_weights(is);
}

}  // namespace smn
