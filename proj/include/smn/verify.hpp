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

// Lockstep equivalence check of the shift and SMN engines.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smn/engines.hpp"

namespace smn {

struct Divergence {
  std::int64_t frame = 0;
  int level = 0;          // -1 for labels
  std::int64_t cell = 0;  // flat index into the map (or label plane)
  std::string what;       // "front", "labels" or "period"

  std::string describe() const {
    std::string s = "first divergence at frame " + std::to_string(frame);
    if (level >= 0) s += ", level " + std::to_string(level);
    return s + ", cell " + std::to_string(cell) + " (" + what + ")";
  }
};

struct FaultInjection {
  std::int64_t frame = 0;  // corrupt right after this frame is stepped
  int level = 1;
  float value = 1.0e3f;
};

struct VerifyOptions {
  /// Run the periodicity check every this many READY frames; 0 means T.
  std::int64_t period_stride = 0;
  std::optional<FaultInjection> fault;
};

struct EquivalenceReport {
  bool equivalent = true;
  std::optional<Divergence> divergence;
  std::int64_t frames_run = 0;
  std::int64_t ready_frames = 0;
  std::int64_t period_checks = 0;
};

/// Pulls the next frame, or nullopt at end of stream.
using FrameSource = std::function<std::optional<FeatureMap>()>;

namespace detail {

inline std::optional<Divergence> compare_front(std::int64_t frame, const FrontColumn& a,
                                               const FrontColumn& b) {
  for (std::size_t l = 0; l < a.maps.size(); ++l) {
    const auto cell = first_difference(a.maps[l], b.maps[l]);
    if (cell >= 0) return Divergence{frame, static_cast<int>(l), cell, "front"};
  }
  return std::nullopt;
}

inline std::optional<Divergence> compare_labels(std::int64_t frame, const LabelMap& a,
                                                const LabelMap& b) {
  if (a.extent != b.extent) return Divergence{frame, -1, 0, "labels"};
  for (std::size_t i = 0; i < a.labels.size(); ++i)
    if (a.labels[i] != b.labels[i])
      return Divergence{frame, -1, static_cast<std::int64_t>(i), "labels"};
  return std::nullopt;
}

}  // namespace detail

/// Runs shift and SMN over up to n_frames frames, comparing labels and every
/// front-column map bitwise on each READY frame. Periodically also checks
/// that brute-force window nodes at offsets -2^l k equal the SMN front
/// values computed 2^l k frames earlier. Divergence is reported, not thrown.
inline EquivalenceReport verify_equivalence(std::shared_ptr<const Model> model,
                                            const FrameSource& next, std::int64_t n_frames,
                                            const VerifyOptions& opt = {}) {
  const PyramidSpec& s = model->spec;
  ShiftEngine shift(model);
  SmnEngine smn(model);
  const std::int64_t window = s.receptive_field();
  const std::int64_t stride = opt.period_stride > 0 ? opt.period_stride : s.frames();

  std::deque<FeatureMap> frames;                                    // last R_L raw frames
  std::vector<std::deque<std::optional<FeatureMap>>> history(s.levels + 1);  // SMN fronts

  EquivalenceReport rep;
  auto fail = [&](Divergence d) {
    rep.equivalent = false;
    rep.divergence = std::move(d);
    return rep;
  };

  for (std::int64_t t = 0; t < n_frames; ++t) {
    std::optional<FeatureMap> frame = next();
    if (!frame) break;
    const EngineOutput a = shift.step(*frame);
    const EngineOutput b = smn.step(*frame);
    ++rep.frames_run;
    if (opt.fault && opt.fault->frame == t) smn.corrupt_c_slot(opt.fault->level, 0, opt.fault->value);

    frames.push_back(std::move(*frame));
    if (static_cast<std::int64_t>(frames.size()) > window) frames.pop_front();
    for (int l = 0; l <= s.levels; ++l) {
      const FeatureMap* f = smn.front_node(l);
      history[l].push_back(f ? std::optional<FeatureMap>(*f) : std::nullopt);
      if (static_cast<std::int64_t>(history[l].size()) > window) history[l].pop_front();
    }

    if (a.status != b.status) return fail({t, -1, 0, "status"});
    if (b.status != Status::Ready) continue;
    ++rep.ready_frames;
    if (auto d = detail::compare_front(t, *a.front, *b.front)) return fail(*d);
    if (auto d = detail::compare_labels(t, *a.labels, *b.labels)) return fail(*d);

    if ((t - smn.warmup_frames()) % stride != 0) continue;
    std::vector<FeatureMap> win(frames.begin(), frames.end());
    const FrameHistory h{win, t - window + 1};
    for (int l = 1; l <= s.levels; ++l) {
      const std::int64_t kmax = (std::int64_t{2} << (s.levels - l)) - 2;
      for (std::int64_t k = 1; k <= kmax; ++k) {
        const std::int64_t back = (std::int64_t{1} << l) * k;
        const auto& stored = history[l][history[l].size() - 1 - static_cast<std::size_t>(back)];
        const FeatureMap node = oracle_node(s, model->weights, l, t - back, h);
        ++rep.period_checks;
        if (!stored) return fail({t - back, l, 0, "period"});
        if (const auto cell = first_difference(node, *stored); cell >= 0)
          return fail({t - back, l, cell, "period"});
      }
    }
  }
  return rep;
}

inline EquivalenceReport verify_equivalence(std::shared_ptr<const Model> model,
                                            std::span<const FeatureMap> stream,
                                            const VerifyOptions& opt = {}) {
  std::size_t i = 0;
  FrameSource next = [&]() -> std::optional<FeatureMap> {
    if (i >= stream.size()) return std::nullopt;
    return stream[i++];
  };
  return verify_equivalence(std::move(model), next, static_cast<std::int64_t>(stream.size()),
                            opt);
}

}  // namespace smn
