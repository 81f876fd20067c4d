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

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "smn/tensor.hpp"

namespace smn {
namespace {

using testing::random_kernel;
using testing::random_map;

TEST(ConvPair, ZeroInputsGiveBias) {
  const Extent e = Extent::line(8);
  FeatureMap zero(2, e);
  ConvKernel k(3, 2, 2, 2, 1);
  k.bias = {0.5f, -1.0f, 2.0f};
  const FeatureMap out = conv_pair(zero, zero, k);
  ASSERT_EQ(out.channels(), 3);
  for (int c = 0; c < 3; ++c)
    for (float v : out.channel(c)) EXPECT_EQ(v, k.bias[c]);
}

TEST(ConvPair, IdentityTapCopiesNewest) {
  for (const Extent e : {Extent::line(8), Extent::plane(4, 6)}) {
    const FeatureMap lag = random_map(2, e, 1);
    const FeatureMap now = random_map(2, e, 2);
    ConvKernel k(2, 2, 2, 2, e.rank);
    for (int c = 0; c < 2; ++c) k.weight(c, c, 1, 0, 0) = 1.0f;
    EXPECT_TRUE(bitwise_equal(conv_pair(lag, now, k), now));
  }
}

TEST(ConvPair, MatchesDotProductOracle) {
  const Extent e = Extent::line(8);
  const FeatureMap lag = random_map(2, e, 42);
  const FeatureMap now = random_map(2, e, 43);
  const ConvKernel k = random_kernel(2, 2, 2, 2, 1, 44);
  EXPECT_TRUE(bitwise_equal(conv_pair(lag, now, k), testing::conv_oracle({&lag, &now}, k)));
}

TEST(ConvPair, MatchesOracleOnPlanes) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const Extent e = Extent::plane(2 + 2 * (seed % 4), 4 + 2 * (seed % 3));
    const FeatureMap lag = random_map(3, e, seed);
    const FeatureMap now = random_map(3, e, seed + 100);
    const ConvKernel k = random_kernel(4, 3, 2, 2, 2, seed + 200);
    EXPECT_TRUE(bitwise_equal(conv_pair(lag, now, k), testing::conv_oracle({&lag, &now}, k)))
        << "seed " << seed;
  }
}

TEST(ConvPair, Errors) {
  const FeatureMap a(2, Extent::line(8));
  const FeatureMap b(2, Extent::line(4));
  const ConvKernel k(2, 2, 2, 2, 1);
  EXPECT_THROW(conv_pair(a, b, k), ShapeError);
  const ConvKernel wrong_in(2, 3, 2, 2, 1);
  EXPECT_THROW(conv_pair(a, a, wrong_in), ShapeError);
  FeatureMap bad = a;
  bad.at(0, 0, 3) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(conv_pair(a, bad, k), Error);
  FeatureMap inf = a;
  inf.at(1, 0, 0) = std::numeric_limits<float>::infinity();
  EXPECT_THROW(conv_pair(inf, a, k), Error);
}

TEST(ConvPair, LinearInZeroBias) {
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    const Extent e = seed % 2 ? Extent::line(16) : Extent::plane(4, 4);
    ConvKernel k = random_kernel(2, 2, 2, 2, e.rank, seed);
    std::fill(k.bias.begin(), k.bias.end(), 0.0f);
    FeatureMap zero(2, e);
    const FeatureMap y0 = conv_pair(zero, zero, k);
    for (float v : y0.data()) EXPECT_EQ(v, 0.0f);

    const FeatureMap a = random_map(2, e, seed + 1);
    const FeatureMap b = random_map(2, e, seed + 2);
    FeatureMap a2 = a, b2 = b;
    for (float& v : a2.data()) v *= 2.0f;
    for (float& v : b2.data()) v *= 2.0f;
    const FeatureMap y = conv_pair(a, b, k);
    const FeatureMap y2 = conv_pair(a2, b2, k);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const float doubled = 2.0f * y.data()[i];
      EXPECT_LE(std::fabs(y2.data()[i] - doubled),
                std::fabs(std::nextafter(doubled, INFINITY) - doubled));
    }
  }
}

TEST(ConvSpatial, ZeroIdentityAndOracle) {
  const Extent e = Extent::plane(6, 4);
  FeatureMap zero(2, e);
  ConvKernel k(2, 2, 1, 2, 2);
  k.bias = {0.25f, -0.75f};
  const FeatureMap z = conv_spatial(zero, k);
  for (int c = 0; c < 2; ++c)
    for (float v : z.channel(c)) EXPECT_EQ(v, k.bias[c]);

  const FeatureMap m = random_map(2, e, 5);
  ConvKernel id(2, 2, 1, 2, 2);
  id.weight(0, 0, 0, 0, 0) = 1.0f;
  id.weight(1, 1, 0, 0, 0) = 1.0f;
  EXPECT_TRUE(bitwise_equal(conv_spatial(m, id), m));

  const ConvKernel r = random_kernel(3, 2, 1, 2, 2, 6);
  EXPECT_TRUE(bitwise_equal(conv_spatial(m, r), testing::conv_oracle({&m}, r)));

  const ConvKernel classifier = random_kernel(4, 2, 1, 1, 2, 7);
  EXPECT_TRUE(bitwise_equal(conv_spatial(m, classifier), testing::conv_oracle({&m}, classifier)));
  EXPECT_THROW(conv_spatial(m, random_kernel(2, 2, 2, 2, 2, 1)), ShapeError);
}

TEST(ConvMultCount, CountsOnlyInRangeTaps) {
  const ConvKernel k(3, 2, 2, 2, 1);
  // width 8: tap 0 covers 8 cells, tap 1 covers 7.
  EXPECT_EQ(conv_mult_count(Extent::line(8), k), 15u * 3 * 2 * 2);
  const ConvKernel p(1, 1, 1, 2, 2);
  EXPECT_EQ(conv_mult_count(Extent::plane(4, 4), p), 16u + 12 + 12 + 9);
}

TEST(NormAct, HandEvaluatedCases) {
  const float eps = 1e-5f;
  auto one = [&](float gamma, float beta, float mean, float var, float x) {
    NormParams p(1, eps);
    p.gamma[0] = gamma;
    p.beta[0] = beta;
    p.mean[0] = mean;
    p.variance[0] = var;
    FeatureMap m(1, Extent::line(1), {x});
    return norm_act(m, p).data()[0];
  };
  EXPECT_EQ(one(1, 0, 0, 1 - eps, 3.0f), 3.0f);
  EXPECT_EQ(one(1, 0, 0, 1 - eps, -2.0f), 0.0f);
  EXPECT_EQ(one(2, 1, 0.5f, 0.25f - eps, 1.0f), 3.0f);
}

TEST(NormAct, MatchesOracleAndRejectsMismatch) {
  const FeatureMap m = random_map(3, Extent::plane(4, 4), 9);
  const NormParams p = testing::random_norm(3, 10);
  EXPECT_TRUE(bitwise_equal(norm_act(m, p), testing::norm_act_oracle(m, p)));
  EXPECT_THROW(norm_act(m, NormParams(2)), ShapeError);
}

TEST(NormAct, NeverEmitsNegativeZero) {
  FeatureMap m(1, Extent::line(2), {0.0f, -0.0f});
  const FeatureMap y = norm_act(m, NormParams(1));
  for (float v : y.data()) EXPECT_FALSE(std::signbit(v));
}

TEST(TemporalMax, Properties) {
  const Extent e = Extent::plane(4, 4);
  FeatureMap zero(2, e);
  EXPECT_TRUE(bitwise_equal(temporal_max(zero, zero), zero));
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const FeatureMap a = random_map(2, e, seed);
    const FeatureMap b = random_map(2, e, seed + 50);
    const FeatureMap c = random_map(2, e, seed + 90);
    EXPECT_TRUE(bitwise_equal(temporal_max(a, a), a));
    EXPECT_TRUE(bitwise_equal(temporal_max(a, b), temporal_max(b, a)));
    EXPECT_TRUE(bitwise_equal(temporal_max(temporal_max(a, b), c),
                              temporal_max(a, temporal_max(b, c))));
    EXPECT_TRUE(bitwise_equal(temporal_max(a, b), testing::max_oracle(a, b)));
  }
  EXPECT_THROW(temporal_max(zero, FeatureMap(1, e)), ShapeError);
}

TEST(SpatialPool, DefinitionAndOracle) {
  FeatureMap line(1, Extent::line(4), {1, 5, 2, 2});
  const FeatureMap p = spatial_pool(line);
  ASSERT_EQ(p.extent(), Extent::line(2));
  EXPECT_EQ(p.data()[0], 5.0f);
  EXPECT_EQ(p.data()[1], 2.0f);

  FeatureMap constant(2, Extent::plane(4, 8));
  constant.fill(0.75f);
  const FeatureMap cp = spatial_pool(constant);
  EXPECT_EQ(cp.extent(), Extent::plane(2, 4));
  for (float v : cp.data()) EXPECT_EQ(v, 0.75f);

  const FeatureMap r = random_map(2, Extent::plane(8, 8), 42);
  EXPECT_TRUE(bitwise_equal(spatial_pool(r), testing::block_max_oracle(r)));

  EXPECT_THROW(spatial_pool(FeatureMap(1, Extent::line(5))), ShapeError);
  EXPECT_THROW(spatial_pool(FeatureMap(1, Extent::plane(3, 4))), ShapeError);
}

TEST(Upsample, ReplicatesAndRoundTrips) {
  FeatureMap ab(1, Extent::line(2), {1.5f, -2.0f});
  const FeatureMap u = upsample_nearest(ab);
  ASSERT_EQ(u.size(), 4u);
  EXPECT_EQ(u.data()[0], 1.5f);
  EXPECT_EQ(u.data()[1], 1.5f);
  EXPECT_EQ(u.data()[2], -2.0f);
  EXPECT_EQ(u.data()[3], -2.0f);
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    const Extent e = seed % 2 ? Extent::line(6) : Extent::plane(3, 5);
    const FeatureMap m = random_map(3, e, seed);
    EXPECT_TRUE(bitwise_equal(upsample_nearest(m), testing::replicate_oracle(m)));
    EXPECT_TRUE(bitwise_equal(spatial_pool(upsample_nearest(m)), m));
  }
}

TEST(Concat, OrderAndEmpty) {
  const Extent e = Extent::line(8);
  FeatureMap zero(2, e);
  EXPECT_TRUE(bitwise_equal(concat_channels(zero, zero), FeatureMap(4, e)));
  const FeatureMap a = random_map(2, e, 3);
  EXPECT_TRUE(bitwise_equal(concat_channels(a, FeatureMap(0, e)), a));
  const FeatureMap b = random_map(3, e, 4);
  EXPECT_TRUE(bitwise_equal(concat_channels(a, b), testing::concat_oracle(a, b)));
  EXPECT_THROW(concat_channels(a, FeatureMap(1, Extent::line(4))), ShapeError);
}

TEST(Argmax, TieBreakAndOracle) {
  const FeatureMap one = random_map(1, Extent::line(8), 1);
  for (auto l : argmax_channels(one).labels) EXPECT_EQ(l, 0);

  FeatureMap tie(3, Extent::line(1), {0.1f, 0.9f, 0.9f});
  EXPECT_EQ(argmax_channels(tie).labels[0], 1);

  const FeatureMap four = random_map(4, Extent::plane(4, 4), 77);
  EXPECT_EQ(argmax_channels(four).labels, testing::argmax_oracle(four));
}

TEST(Argmax, InvariantUnderPerCellShift) {
  // Small integers keep the shifted values exact.
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    FeatureMap m = random_map(4, Extent::line(16), seed);
    for (float& v : m.data()) v = std::round(v * 8.0f);
    FeatureMap shifted = m;
    const FeatureMap offsets = random_map(1, Extent::line(16), seed + 1);
    for (int c = 0; c < 4; ++c)
      for (int x = 0; x < 16; ++x)
        shifted.at(c, 0, x) += std::round(offsets.at(0, 0, x) * 100.0f);
    EXPECT_EQ(argmax_channels(m), argmax_channels(shifted));
  }
}

TEST(Kernels, DeterministicAcrossCalls) {
  const FeatureMap a = random_map(4, Extent::plane(8, 8), 1);
  const FeatureMap b = random_map(4, Extent::plane(8, 8), 2);
  const ConvKernel k = random_kernel(5, 4, 2, 2, 2, 3);
  const FeatureMap first = conv_pair(a, b, k);
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(bitwise_equal(conv_pair(a, b, k), first));
}

TEST(FeatureMap, RejectsBadShapes) {
  EXPECT_THROW(FeatureMap(1, Extent{1, 2, 4}), ShapeError);
  EXPECT_THROW(FeatureMap(1, Extent::line(0)), ShapeError);
  EXPECT_THROW(FeatureMap(1, Extent::line(4), std::vector<float>(3)), ShapeError);
}

}  // namespace
}  // namespace smn
