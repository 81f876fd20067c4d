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

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "smn/engines.hpp"
#include "smn/meter.hpp"

namespace smn {
namespace {

Geometry geo(Mode m, int levels, int width, int height = 0) {
  Geometry g;
  g.mode = m;
  g.levels = levels;
  g.width = width;
  g.height = m == Mode::Video ? (height ? height : width) : 1;
  return g;
}

PyramidSpec tiny_spec(Mode m, int levels, int width, int height = 0) {
  PyramidConfig c;
  c.mode = m;
  c.levels = levels;
  c.width = width;
  c.height = height;
  for (int l = 0; l < levels; ++l) {
    c.channels.push_back(1 + l % 2);
    c.decoder_channels.push_back(1);
  }
  c.num_classes = 2;
  return validate_spec(c);
}

// Brute-force node tally over an explicit pyramid, independent of the closed forms.
std::int64_t brute_front(const Geometry& g) {
  std::int64_t n = 0;
  for (int l = 0; l <= g.levels; ++l) {
    int w = g.width, h = g.height;
    for (int k = 0; k < l; ++k) {
      w /= 2;
      if (g.mode == Mode::Video) h /= 2;
    }
    n += static_cast<std::int64_t>(w) * h;
  }
  return n;
}

std::int64_t brute_recompute(const Geometry& g) {
  std::int64_t n = 0;
  std::int64_t nodes = g.frames();
  for (int l = 0; l <= g.levels; ++l, nodes /= 2) {
    int w = g.width, h = g.height;
    for (int k = 0; k < l; ++k) {
      w /= 2;
      if (g.mode == Mode::Video) h /= 2;
    }
    n += nodes * w * h;
  }
  return n;
}

TEST(Formulas, LineLevelFive) {
  const Geometry g = geo(Mode::Line, 5, 32);
  EXPECT_EQ(expected_front_cells(g), 63);
  EXPECT_EQ(expected_recompute_cells(g), 1365);
  const ClosedForms p = closed_forms(g);
  EXPECT_DOUBLE_EQ(p.front_cells, 63.0);
  EXPECT_NEAR(p.recompute_cells, 1364.0, 1e-9);
  EXPECT_DOUBLE_EQ(p.smn_memory, 160.0);
  EXPECT_LE(std::abs(expected_recompute_cells(g) - p.recompute_cells), 1.0);
}

TEST(Formulas, VideoLevelFive) {
  const Geometry g = geo(Mode::Video, 5, 32);
  EXPECT_EQ(expected_front_cells(g), 1365);
  EXPECT_EQ(expected_recompute_cells(g), 37449);
  const ClosedForms p = closed_forms(g);
  EXPECT_NEAR(p.front_cells, 1364.0, 1e-9);
  EXPECT_NEAR(p.recompute_cells, 37448.0, 1e-9);
  EXPECT_LE(std::abs(expected_front_cells(g) - p.front_cells) / expected_front_cells(g), 0.002);
  EXPECT_LE(std::abs(expected_recompute_cells(g) - p.recompute_cells) /
                expected_recompute_cells(g), 0.002);
}

TEST(Formulas, LevelZeroIsOneFrame) {
  EXPECT_EQ(expected_front_cells(geo(Mode::Line, 0, 16)), 16);
  EXPECT_EQ(expected_recompute_cells(geo(Mode::Line, 0, 16)), 16);
}

TEST(Formulas, ClosedFormsMatchBruteForce) {
  for (Mode m : {Mode::Line, Mode::Video})
    for (int levels = 0; levels <= 6; ++levels)
      for (int mult : {1, 2, 3}) {
        const int w = (1 << levels) * mult;
        const Geometry g = geo(m, levels, w);
        EXPECT_EQ(expected_front_cells(g), brute_front(g));
        EXPECT_EQ(expected_recompute_cells(g), brute_recompute(g));
      }
}

TEST(Memory, SmallestLineRing) {
  // One level, W = 2: two slots each for f_0 and c_1, two cells wide.
  EXPECT_EQ(expected_smn_node_cells(geo(Mode::Line, 1, 2)), 8);
}

TEST(Memory, LineRingsGrowAsWidthTimesLevels) {
  for (int levels = 1; levels <= 8; ++levels) {
    const int w = 1 << levels;
    const double ratio =
        static_cast<double>(expected_smn_node_cells(geo(Mode::Line, levels, w))) / (w * levels);
    EXPECT_GE(ratio, 1.0) << levels;
    EXPECT_LE(ratio, 4.0) << levels;
  }
}

TEST(Memory, SmnBelowShiftAtLevelFive) {
  const Geometry g = geo(Mode::Line, 5, 32);
  const double t = 32.0;
  EXPECT_LE(static_cast<double>(expected_smn_node_cells(g)) / expected_shift_node_cells(g),
            4.0 * t * 5.0 / (t * t));
}

TEST(Memory, AuditsMatchExpectations) {
  for (Mode m : {Mode::Line, Mode::Video})
    for (int levels = 1; levels <= 4; ++levels) {
      const PyramidSpec s = tiny_spec(m, levels, 2 << levels, 1 << levels);
      auto model = make_model(s, init_weights(s, 3));
      SmnEngine smn(model);
      ShiftEngine shift(model);
      const auto smn_exp = expected_smn_memory_cells(s);
      const auto shift_exp = expected_shift_memory_cells(s);
      const int n = static_cast<int>(2 * s.receptive_field());
      for (int i = 0; i < n; ++i) {
        const FeatureMap f = testing::random_map(1, s.extent_at(0), 100 + i, 0.0f, 1.0f);
        smn.step(f);
        shift.step(f);
        const MemoryAudit a = smn.audit();
        EXPECT_EQ(a.total_node_cells(), smn_exp.node_cells);
        EXPECT_EQ(a.total_scalar_cells(), smn_exp.scalar_cells);
        const MemoryAudit b = shift.audit();
        EXPECT_EQ(b.total_node_cells(), shift_exp.node_cells);
        EXPECT_EQ(b.total_scalar_cells(), shift_exp.scalar_cells);
      }
      EXPECT_LT(smn_exp.node_cells, shift_exp.node_cells);
    }
}

TEST(Counters, MeasuredEqualsExpected) {
  for (Mode m : {Mode::Line, Mode::Video})
    for (int levels = 1; levels <= 3; ++levels) {
      const PyramidSpec s = tiny_spec(m, levels, 1 << levels, 1 << levels);
      const Geometry g = s.geometry();
      auto model = make_model(s, init_weights(s, 4));
      SmnEngine smn(model);
      ShiftEngine shift(model);
      for (int i = 0; i < 3 * s.receptive_field(); ++i) {
        const FeatureMap f = testing::random_map(1, s.extent_at(0), 200 + i, 0.0f, 1.0f);
        const EngineOutput a = smn.step(f);
        const EngineOutput b = shift.step(f);
        if (a.status != Status::Ready) continue;
        EXPECT_EQ(a.meter.total().cells, static_cast<std::uint64_t>(expected_front_cells(g)));
        EXPECT_EQ(b.meter.total().cells,
                  static_cast<std::uint64_t>(expected_recompute_cells(g)));
        for (int l = 1; l <= levels; ++l)
          EXPECT_EQ(b.meter.levels[l].support_cells,
                    static_cast<std::uint64_t>(expected_support_cells(g, l)));
        EXPECT_LT(a.meter.total().mults, b.meter.total().mults);
      }
    }
}

TEST(Counters, CumulativeMeterIsMonotone) {
  const PyramidSpec s = tiny_spec(Mode::Line, 2, 8);
  SmnEngine smn(make_model(s, init_weights(s, 5)));
  std::uint64_t prev = 0;
  for (int i = 0; i < 20; ++i) {
    smn.step(testing::random_map(1, s.extent_at(0), 300 + i, 0.0f, 1.0f));
    const OpMeter& c = smn.cumulative_meter();
    EXPECT_EQ(c.frames_seen, static_cast<std::uint64_t>(i + 1));
    EXPECT_GE(c.total().mults, prev);
    prev = c.total().mults;
  }
}

}  // namespace
}  // namespace smn
