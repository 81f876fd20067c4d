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

// Operation and memory accounting.
//
// Two currencies are kept apart:
//  - node cells: one conv+pool evaluation at one spatial position, channels
//    not multiplied. Level 0 counts ingested frame cells.
//  - scalar multiply-adds / scalar cells: the real arithmetic and storage.
//
// Shift-mode node cells count the pyramid nodes of the T-frame window,
// T/2^l columns at level l. The extra key nodes that the causal recurrence
// needs left of that window are reported as support cells.

#include <cmath>
#include <cstdint>
#include <vector>

#include "smn/model.hpp"

namespace smn {

struct LevelCounts {
  std::uint64_t cells = 0;
  std::uint64_t support_cells = 0;
  std::uint64_t mults = 0;

  LevelCounts& operator+=(const LevelCounts& o) {
    cells += o.cells;
    support_cells += o.support_cells;
    mults += o.mults;
    return *this;
  }
  friend bool operator==(const LevelCounts&, const LevelCounts&) = default;
};

/// Counters indexed by level 0..L.
struct OpMeter {
  std::vector<LevelCounts> levels;
  std::uint64_t frames_seen = 0;

  OpMeter() = default;
  explicit OpMeter(int num_levels) : levels(num_levels + 1) {}

  LevelCounts total() const {
    LevelCounts t;
    for (const auto& l : levels) t += l;
    return t;
  }
  void accumulate(const OpMeter& frame) {
    if (levels.size() < frame.levels.size()) levels.resize(frame.levels.size());
    for (std::size_t i = 0; i < frame.levels.size(); ++i) levels[i] += frame.levels[i];
    frames_seen += frame.frames_seen;
  }
};

struct LevelMemory {
  std::int64_t f_node_cells = 0;
  std::int64_t c_node_cells = 0;
  std::int64_t f_scalar_cells = 0;
  std::int64_t c_scalar_cells = 0;

  std::int64_t node_cells() const { return f_node_cells + c_node_cells; }
  std::int64_t scalar_cells() const { return f_scalar_cells + c_scalar_cells; }
};

/// Live buffer sizes of an engine, indexed by level 0..L.
struct MemoryAudit {
  std::vector<LevelMemory> levels;

  std::int64_t total_node_cells() const {
    std::int64_t n = 0;
    for (const auto& l : levels) n += l.node_cells();
    return n;
  }
  std::int64_t total_scalar_cells() const {
    std::int64_t n = 0;
    for (const auto& l : levels) n += l.scalar_cells();
    return n;
  }
};

/// SMN node cells per frame: one front column.
inline std::int64_t expected_front_cells(const Geometry& g) {
  std::int64_t n = 0;
  for (int l = 0; l <= g.levels; ++l) n += g.cells_at(l);
  return n;
}

/// Shift-mode node cells per frame: the whole window pyramid.
inline std::int64_t expected_recompute_cells(const Geometry& g) {
  std::int64_t n = 0;
  for (int l = 0; l <= g.levels; ++l) n += (g.frames() >> l) * g.cells_at(l);
  return n;
}

/// Shift-mode support cells per frame at one level (key nodes left of the window).
inline std::int64_t expected_support_cells(const Geometry& g, int level) {
  return ((g.frames() >> level) - 1) * g.cells_at(level);
}

// Per-frame node counts of the memoized shift recompute.
inline std::int64_t shift_f_nodes(const Geometry& g, int level) {
  return (std::int64_t{2} << (g.levels - level)) - 1;
}
inline std::int64_t shift_c_nodes(const Geometry& g, int level) {
  return (std::int64_t{4} << (g.levels - level)) - 2;
}

struct MemoryExpectation {
  std::int64_t node_cells = 0;
  std::int64_t scalar_cells = 0;
  double approx_node_cells = 0.0;
};

/// SMN ring memory: per level l, s_l + 1 slots of f_{l-1} and of c_l,
/// both at level l-1 resolution.
inline std::int64_t expected_smn_node_cells(const Geometry& g) {
  std::int64_t n = 0;
  for (int l = 1; l <= g.levels; ++l) n += (Geometry::lag(l) + 1) * 2 * g.cells_at(l - 1);
  return n;
}

/// Asymptotic bookkeeping for the same memory: T log T (line), T^2 (video).
inline double approx_smn_memory_cells(const Geometry& g) {
  const double t = static_cast<double>(g.frames());
  return g.mode == Mode::Line ? t * g.levels : t * t;
}

inline MemoryExpectation expected_smn_memory_cells(const PyramidSpec& s) {
  const Geometry g = s.geometry();
  MemoryExpectation m;
  m.node_cells = expected_smn_node_cells(g);
  for (int l = 1; l <= s.levels; ++l)
    m.scalar_cells += (Geometry::lag(l) + 1) * g.cells_at(l - 1) *
                      (s.width_at(l - 1) + s.width_at(l));
  m.approx_node_cells = approx_smn_memory_cells(g);
  return m;
}

/// Shift-mode working set: R_L raw frames plus the per-frame node memo.
inline std::int64_t expected_shift_node_cells(const Geometry& g) {
  std::int64_t n = Geometry::receptive_field(g.levels) * g.cells_at(0);
  for (int l = 1; l <= g.levels; ++l)
    n += shift_f_nodes(g, l) * g.cells_at(l) + shift_c_nodes(g, l) * g.cells_at(l - 1);
  return n;
}

inline MemoryExpectation expected_shift_memory_cells(const PyramidSpec& s) {
  const Geometry g = s.geometry();
  MemoryExpectation m;
  m.node_cells = expected_shift_node_cells(g);
  m.scalar_cells = Geometry::receptive_field(g.levels) * g.cells_at(0) * s.in_channels;
  for (int l = 1; l <= s.levels; ++l)
    m.scalar_cells += (shift_f_nodes(g, l) * g.cells_at(l) +
                       shift_c_nodes(g, l) * g.cells_at(l - 1)) * s.width_at(l);
  const double t = static_cast<double>(g.frames());
  m.approx_node_cells = g.mode == Mode::Line ? 4.0 * t * t / 3.0 : t * t * t;
  return m;
}

/// Asymptotic closed forms; they assume W = H = T.
struct ClosedForms {
  double front_cells = 0;      // SMN computation nodes/frame
  double recompute_cells = 0;  // shift-mode computation nodes/frame
  double patch_cells = 0;      // patch-mode, amortized per frame
  double smn_memory = 0;
  double pyramid_memory = 0;
};

inline ClosedForms closed_forms(const Geometry& g) {
  const double t = static_cast<double>(g.frames());
  const int L = g.levels;
  ClosedForms p;
  if (g.mode == Mode::Line) {
    p.front_cells = 2.0 * t - 1.0;
    p.recompute_cells = 4.0 * (std::pow(4.0, L) - 1.0) / 3.0;
    p.patch_cells = t * t / t;
    p.smn_memory = t * L;
    p.pyramid_memory = 4.0 * (std::pow(4.0, L) - 1.0) / 3.0;
  } else {
    p.front_cells = 4.0 * (t * t - 1.0) / 3.0;
    p.recompute_cells = 8.0 * (std::pow(2.0, 3 * L) - 1.0) / 7.0;
    p.patch_cells = t * t * t / t;
    p.smn_memory = t * t;
    p.pyramid_memory = 8.0 * (std::pow(2.0, 3 * L) - 1.0) / 7.0;
  }
  return p;
}

}  // namespace smn
