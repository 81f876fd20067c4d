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

// Stream evaluation engines.
//
//   PatchEngine  brute-force positional recursion, one output every T frames.
//   ShiftEngine  recomputes the window pyramid every frame; node values are
//                memoized within a frame and never reused across frames.
//   SmnEngine    one front column per frame; per level l two rings of
//                s_l + 1 slots hold f_{l-1} and c_l, the key nodes s_l back.
//
// All three evaluate the same recurrence through encode_conv/encode_pool and
// are therefore bit-identical wherever their outputs overlap.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smn/meter.hpp"
#include "smn/model.hpp"
#include "smn/ring.hpp"
#include "smn/tensor.hpp"

namespace smn {

/// Immutable spec + weights pair shared by engines.
struct Model {
  PyramidSpec spec;
  Weights weights;
};

inline std::shared_ptr<const Model> make_model(PyramidSpec spec, Weights weights) {
  check_weights(spec, weights);
  return std::make_shared<const Model>(Model{std::move(spec), std::move(weights)});
}

enum class Status {
  Warming,  // history shorter than the receptive field
  Ready,    // labels and front column present
  Idle,     // patch engine only: past warm-up, between window ends
};

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Warming: return "WARMING";
    case Status::Ready: return "READY";
    case Status::Idle: return "IDLE";
  }
  return "?";
}

struct EngineOutput {
  std::int64_t frame_index = 0;
  Status status = Status::Warming;
  std::optional<LabelMap> labels;
  std::optional<FrontColumn> front;
  OpMeter meter;
};

class Engine {
 public:
  explicit Engine(std::shared_ptr<const Model> model)
      : model_(std::move(model)), cumulative_(model_->spec.levels) {}
  virtual ~Engine() = default;
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  virtual std::string_view name() const = 0;
  virtual EngineOutput step(const FeatureMap& frame) = 0;
  virtual MemoryAudit audit() const = 0;

  void reset() {
    frames_seen_ = 0;
    cumulative_ = OpMeter(model_->spec.levels);
    reset_buffers();
  }

  const PyramidSpec& spec() const { return model_->spec; }
  const Weights& weights() const { return model_->weights; }
  std::int64_t frames_seen() const { return frames_seen_; }
  const OpMeter& cumulative_meter() const { return cumulative_; }
  /// Zero-based index of the first READY frame, R_L - 1.
  std::int64_t warmup_frames() const { return spec().receptive_field() - 1; }

 protected:
  virtual void reset_buffers() = 0;

  void check_frame(const FeatureMap& frame) const {
    if (frame.extent() != spec().extent_at(0) || frame.channels() != spec().in_channels)
      throw ShapeError("frame shape does not match the pyramid spec");
  }

  EngineOutput begin_output() const {
    EngineOutput out;
    out.frame_index = frames_seen_;
    out.meter = OpMeter(spec().levels);
    out.meter.frames_seen = 1;
    return out;
  }

  void finish(EngineOutput& out) {
    cumulative_.accumulate(out.meter);
    ++frames_seen_;
  }

  void decode_into(EngineOutput& out, FrontColumn front) const {
    out.labels = decode_latest(spec(), weights(), front);
    const auto dm = decode_mult_counts(spec(), weights());
    for (std::size_t l = 0; l < dm.size(); ++l) out.meter.levels[l].mults += dm[l];
    out.front = std::move(front);
    out.status = Status::Ready;
  }

  std::shared_ptr<const Model> model_;
  std::int64_t frames_seen_ = 0;
  OpMeter cumulative_;
};

// ---------------------------------------------------------------------------
// Positional oracle

/// Brute-force level-`level` node at time t. frame_at(tau) must return the
/// raw frame tau for every tau in [t - R_level + 1, t]. Nothing is cached.
template <typename FrameAt>
FeatureMap oracle_node(const PyramidSpec& s, const Weights& w, int level, std::int64_t t,
                       FrameAt&& frame_at, OpMeter* meter = nullptr) {
  if (level == 0) return frame_at(t);
  const std::int64_t lag = Geometry::lag(level);
  auto conv_at = [&](std::int64_t tau) {
    FeatureMap lagged = oracle_node(s, w, level - 1, tau - lag, frame_at, meter);
    FeatureMap newest = oracle_node(s, w, level - 1, tau, frame_at, meter);
    if (meter)
      meter->levels[level].mults +=
          conv_mult_count(s.extent_at(level - 1), w.encoder_at(level).kernel);
    return encode_conv(s, w, level, lagged, newest);
  };
  FeatureMap c_lag = conv_at(t - lag);
  FeatureMap c_new = conv_at(t);
  return encode_pool(c_lag, c_new);
}

/// Random-access frames [first_index, first_index + frames.size()).
struct FrameHistory {
  std::span<const FeatureMap> frames;
  std::int64_t first_index = 0;

  const FeatureMap& operator()(std::int64_t t) const {
    if (t < first_index || t >= first_index + static_cast<std::int64_t>(frames.size()))
      throw Error("insufficient history for frame " + std::to_string(t));
    return frames[static_cast<std::size_t>(t - first_index)];
  }
};

inline FeatureMap oracle_node(const PyramidSpec& s, const Weights& w, int level, std::int64_t t,
                              const FrameHistory& history, OpMeter* meter = nullptr) {
  if (t - Geometry::receptive_field(level) + 1 < history.first_index ||
      t >= history.first_index + static_cast<std::int64_t>(history.frames.size()))
    throw Error("insufficient history for level " + std::to_string(level) + " at frame " +
                std::to_string(t));
  return oracle_node(s, w, level, t,
                     [&](std::int64_t tau) -> const FeatureMap& { return history(tau); },
                     meter);
}

/// Front column at the last frame of `window` by brute force.
inline FrontColumn oracle_front(const PyramidSpec& s, const Weights& w,
                                std::span<const FeatureMap> window, OpMeter* meter = nullptr) {
  if (static_cast<std::int64_t>(window.size()) < s.receptive_field())
    throw Error("window shorter than the receptive field");
  const FrameHistory h{window, 0};
  const std::int64_t t = static_cast<std::int64_t>(window.size()) - 1;
  FrontColumn front;
  for (int l = 0; l <= s.levels; ++l) front.maps.push_back(oracle_node(s, w, l, t, h, meter));
  return front;
}

/// Patch-mode inference over exactly R_L frames ending at the newest one.
inline LabelMap patch_infer(const PyramidSpec& s, const Weights& w,
                            std::span<const FeatureMap> window) {
  if (static_cast<std::int64_t>(window.size()) != s.receptive_field())
    throw Error("patch window must hold exactly R_L = " + std::to_string(s.receptive_field()) +
                " frames");
  return decode_latest(s, w, oracle_front(s, w, window));
}

// ---------------------------------------------------------------------------
// Patch mode

class PatchEngine final : public Engine {
 public:
  explicit PatchEngine(std::shared_ptr<const Model> model)
      : Engine(std::move(model)),
        window_(static_cast<std::size_t>(spec().receptive_field()),
                FeatureMap(spec().in_channels, spec().extent_at(0))) {}

  std::string_view name() const override { return "patch"; }

  EngineOutput step(const FeatureMap& frame) override {
    check_frame(frame);
    window_.push(frame);
    EngineOutput out = begin_output();
    const std::int64_t t = frames_seen_;
    const std::int64_t first = warmup_frames();
    if (t < first) {
      out.status = Status::Warming;
    } else if ((t - first) % spec().frames() != 0) {
      out.status = Status::Idle;
    } else {
      const Geometry g = spec().geometry();
      for (int l = 0; l <= spec().levels; ++l)
        out.meter.levels[l].cells = static_cast<std::uint64_t>((g.frames() >> l) * g.cells_at(l));
      auto frame_at = [&](std::int64_t tau) -> const FeatureMap& {
        return window_.at_lag(static_cast<std::size_t>(t - tau));
      };
      FrontColumn front;
      for (int l = 0; l <= spec().levels; ++l)
        front.maps.push_back(oracle_node(spec(), weights(), l, t, frame_at, &out.meter));
      decode_into(out, std::move(front));
    }
    finish(out);
    return out;
  }

  MemoryAudit audit() const override {
    MemoryAudit a;
    a.levels.resize(spec().levels + 1);
    for (const auto& m : window_.slots()) {
      a.levels[0].f_node_cells += static_cast<std::int64_t>(m.plane_size());
      a.levels[0].f_scalar_cells += static_cast<std::int64_t>(m.size());
    }
    return a;
  }

 private:
  void reset_buffers() override { window_.clear(); }

  RingBuffer<FeatureMap> window_;
};

// ---------------------------------------------------------------------------
// Naive shift mode

class ShiftEngine final : public Engine {
 public:
  explicit ShiftEngine(std::shared_ptr<const Model> model)
      : Engine(std::move(model)),
        window_(static_cast<std::size_t>(spec().receptive_field()),
                FeatureMap(spec().in_channels, spec().extent_at(0))) {
    const Geometry g = spec().geometry();
    f_memo_.resize(spec().levels + 1);
    c_memo_.resize(spec().levels + 1);
    for (int l = 1; l <= spec().levels; ++l) {
      f_memo_[l].assign(static_cast<std::size_t>(shift_f_nodes(g, l)),
                        FeatureMap(spec().width_at(l), spec().extent_at(l)));
      c_memo_[l].assign(static_cast<std::size_t>(shift_c_nodes(g, l)),
                        FeatureMap(spec().width_at(l), spec().extent_at(l - 1)));
    }
  }

  std::string_view name() const override { return "shift"; }

  EngineOutput step(const FeatureMap& frame) override {
    check_frame(frame);
    window_.push(frame);
    EngineOutput out = begin_output();
    if (frames_seen_ < warmup_frames()) {
      out.status = Status::Warming;
      finish(out);
      return out;
    }
    const PyramidSpec& s = spec();
    const Geometry g = s.geometry();
    auto window_cells = [&](int l, std::int64_t nodes) {
      const std::int64_t in_window = g.frames() >> l;
      out.meter.levels[l].cells = static_cast<std::uint64_t>(in_window * g.cells_at(l));
      out.meter.levels[l].support_cells =
          static_cast<std::uint64_t>((nodes - in_window) * g.cells_at(l));
    };
    window_cells(0, s.receptive_field());

    // Level l memo index i holds c_l(t - i*s_l) and f_l(t - i*2^l); f_{l-1}
    // has spacing s_l, so c_l[i] reads f_{l-1}[i] and f_{l-1}[i + 1].
    for (int l = 1; l <= s.levels; ++l) {
      auto f_prev = [&](std::size_t i) -> const FeatureMap& {
        return l == 1 ? window_.at_lag(i) : f_memo_[l - 1][i];
      };
      auto& cs = c_memo_[l];
      for (std::size_t i = 0; i < cs.size(); ++i)
        cs[i] = encode_conv(s, weights(), l, f_prev(i + 1), f_prev(i));
      auto& fs = f_memo_[l];
      for (std::size_t j = 0; j < fs.size(); ++j) fs[j] = encode_pool(cs[2 * j + 1], cs[2 * j]);
      out.meter.levels[l].mults =
          cs.size() * conv_mult_count(s.extent_at(l - 1), weights().encoder_at(l).kernel);
      window_cells(l, static_cast<std::int64_t>(fs.size()));
    }

    FrontColumn front;
    front.maps.push_back(window_.at_lag(0));
    for (int l = 1; l <= s.levels; ++l) front.maps.push_back(f_memo_[l][0]);
    decode_into(out, std::move(front));
    finish(out);
    return out;
  }

  MemoryAudit audit() const override {
    MemoryAudit a;
    a.levels.resize(spec().levels + 1);
    for (const auto& m : window_.slots()) {
      a.levels[0].f_node_cells += static_cast<std::int64_t>(m.plane_size());
      a.levels[0].f_scalar_cells += static_cast<std::int64_t>(m.size());
    }
    for (int l = 1; l <= spec().levels; ++l) {
      for (const auto& m : f_memo_[l]) {
        a.levels[l].f_node_cells += static_cast<std::int64_t>(m.plane_size());
        a.levels[l].f_scalar_cells += static_cast<std::int64_t>(m.size());
      }
      for (const auto& m : c_memo_[l]) {
        a.levels[l].c_node_cells += static_cast<std::int64_t>(m.plane_size());
        a.levels[l].c_scalar_cells += static_cast<std::int64_t>(m.size());
      }
    }
    return a;
  }

 private:
  void reset_buffers() override { window_.clear(); }

  RingBuffer<FeatureMap> window_;
  std::vector<std::vector<FeatureMap>> f_memo_;  // [l][j]: f_l(t - j*2^l)
  std::vector<std::vector<FeatureMap>> c_memo_;  // [l][i]: c_l(t - i*s_l)
};

// ---------------------------------------------------------------------------
// Shift-memory engine

class SmnEngine final : public Engine {
 public:
  explicit SmnEngine(std::shared_ptr<const Model> model) : Engine(std::move(model)) {
    const PyramidSpec& s = spec();
    levels_.resize(s.levels + 1);
    for (int l = 1; l <= s.levels; ++l) {
      const auto cap = static_cast<std::size_t>(Geometry::lag(l) + 1);
      levels_[l].f_ring =
          RingBuffer<FeatureMap>(cap, FeatureMap(s.width_at(l - 1), s.extent_at(l - 1)));
      levels_[l].c_ring = RingBuffer<FeatureMap>(cap, FeatureMap(s.width_at(l), s.extent_at(l - 1)));
    }
    top_ = FeatureMap(s.width_at(s.levels), s.extent_at(s.levels));
  }

  std::string_view name() const override { return "smn"; }

  EngineOutput step(const FeatureMap& frame) override {
    check_frame(frame);
    const PyramidSpec& s = spec();
    const Geometry g = s.geometry();
    const std::int64_t t = frames_seen_;
    EngineOutput out = begin_output();
    out.meter.levels[0].cells = static_cast<std::uint64_t>(g.cells_at(0));

    // f_{l-1}(t) enters level l's f ring; the ring then reaches back s_l.
    levels_[1].f_ring.push(frame);
    for (int l = 1; l <= s.levels; ++l) {
      LevelState& st = levels_[l];
      const std::int64_t lag = Geometry::lag(l);
      const std::int64_t prev_ready = Geometry::receptive_field(l - 1) - 1;
      FeatureMap& c_slot = st.c_ring.advance();
      if (t - lag < prev_ready) {
        if (l < s.levels) levels_[l + 1].f_ring.advance();
        continue;
      }
      c_slot = encode_conv(s, weights(), l, st.f_ring.at_lag(lag), st.f_ring.at_lag(0));
      out.meter.levels[l].mults += conv_mult_count(s.extent_at(l - 1), weights().encoder_at(l).kernel);
      FeatureMap* f_slot = l < s.levels ? &levels_[l + 1].f_ring.advance() : &top_;
      if (t < Geometry::receptive_field(l) - 1) continue;
      *f_slot = encode_pool(st.c_ring.at_lag(lag), c_slot);
      out.meter.levels[l].cells = static_cast<std::uint64_t>(g.cells_at(l));
    }

    if (t < warmup_frames()) {
      out.status = Status::Warming;
    } else {
      FrontColumn front;
      for (int l = 0; l <= s.levels; ++l) front.maps.push_back(node(l));
      decode_into(out, std::move(front));
    }
    finish(out);
    return out;
  }

  /// f_level at the latest frame, or nullptr while that level is still warming.
  const FeatureMap* front_node(int level) const {
    const std::int64_t t = frames_seen_ - 1;
    if (t < Geometry::receptive_field(level) - 1) return nullptr;
    return &node(level);
  }

  MemoryAudit audit() const override {
    MemoryAudit a;
    a.levels.resize(spec().levels + 1);
    for (int l = 1; l <= spec().levels; ++l) {
      for (const auto& m : levels_[l].f_ring.slots()) {
        a.levels[l].f_node_cells += static_cast<std::int64_t>(m.plane_size());
        a.levels[l].f_scalar_cells += static_cast<std::int64_t>(m.size());
      }
      for (const auto& m : levels_[l].c_ring.slots()) {
        a.levels[l].c_node_cells += static_cast<std::int64_t>(m.plane_size());
        a.levels[l].c_scalar_cells += static_cast<std::int64_t>(m.size());
      }
    }
    return a;
  }

  /// Fault injection: overwrite the c_l ring entry `lag` frames old.
  void corrupt_c_slot(int level, std::int64_t lag, float value) {
    levels_.at(level).c_ring.at_lag(static_cast<std::size_t>(lag)).fill(value);
  }
  /// Fault injection: overwrite the f_{l-1} ring entry `lag` frames old.
  void corrupt_f_slot(int level, std::int64_t lag, float value) {
    levels_.at(level).f_ring.at_lag(static_cast<std::size_t>(lag)).fill(value);
  }

  std::size_t ring_capacity(int level) const { return levels_.at(level).c_ring.capacity(); }

 private:
  struct LevelState {
    RingBuffer<FeatureMap> f_ring;  // f_{l-1}(tau), newest at lag 0
    RingBuffer<FeatureMap> c_ring;  // c_l(tau)
  };

  const FeatureMap& node(int level) const {
    return level == spec().levels ? top_ : levels_[level + 1].f_ring.at_lag(0);
  }

  void reset_buffers() override {
    for (auto& st : levels_) {
      if (st.f_ring.capacity() == 0) continue;
      st.f_ring.clear();
      st.c_ring.clear();
    }
  }

  std::vector<LevelState> levels_;  // index 1..L
  FeatureMap top_;                  // f_L(t)
};

enum class EngineKind { Patch, Shift, Smn };

inline std::unique_ptr<Engine> make_engine(EngineKind kind, std::shared_ptr<const Model> model) {
  switch (kind) {
    case EngineKind::Patch: return std::make_unique<PatchEngine>(std::move(model));
    case EngineKind::Shift: return std::make_unique<ShiftEngine>(std::move(model));
    case EngineKind::Smn: return std::make_unique<SmnEngine>(std::move(model));
  }
  throw Error("unknown engine kind");
}

inline std::optional<EngineKind> parse_engine_kind(std::string_view s) {
  if (s == "patch") return EngineKind::Patch;
  if (s == "shift") return EngineKind::Shift;
  if (s == "smn") return EngineKind::Smn;
  return std::nullopt;
}

}  // namespace smn
