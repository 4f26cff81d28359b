// Copyright 2026-present the trisampler project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <numbers>

#include "test_support.hpp"

namespace ts = trisampler;
using V = std::vector<double>;

TEST(Geometry, DotScoreExamples) {
    EXPECT_EQ(ts::dot_score(V{1, 0}, V{0, 1}), 0.0);
    EXPECT_EQ(ts::dot_score(V{1, 2}, V{3, 4}), 11.0);
    EXPECT_EQ(ts::dot_score(V{3, 4}, V{3, 4}), 25.0);
    EXPECT_THROW(ts::dot_score(V{1, 2}, V{1}), ts::ContractError);
}

TEST(Geometry, AngleExamples) {
    EXPECT_DOUBLE_EQ(ts::angle(V{1, 0}, V{0, 1}), std::numbers::pi / 2);
    EXPECT_DOUBLE_EQ(ts::angle(V{1, 0}, V{-1, 0}), std::numbers::pi);
    EXPECT_NEAR(ts::angle(V{0.3, -1.7}, V{0.9, -5.1}), 0.0, 1e-7);
    EXPECT_THROW(ts::angle(V{0, 0}, V{1, 0}), ts::ContractError);
}

TEST(Geometry, ThetaExamples) {
    const double a30 = ts::degrees_to_radians(30.0);
    const V q{1, 0};
    const V pos{std::cos(a30), std::sin(a30)};
    const V neg{0, 1};
    EXPECT_NEAR(ts::theta(q, pos, neg), std::numbers::pi / 3, 1e-12);
    EXPECT_EQ(ts::theta(q, pos, pos), 0.0);
    EXPECT_DOUBLE_EQ(ts::theta(q, pos, neg), ts::theta(q, neg, pos));
}

TEST(Geometry, RegionExamples) {
    EXPECT_TRUE(ts::in_triangular_region({0.0, 0.5, 0.8}));
    EXPECT_FALSE(ts::in_triangular_region({0.0, 0.5, 0.4}));
    EXPECT_TRUE(ts::in_triangular_region({0.0, 0.5, 0.5}));
    EXPECT_FALSE(ts::strictly_in_triangular_region({0.0, 0.5, 0.5}));
}

TEST(Geometry, AngleBoundary) {
    const double a30 = ts::degrees_to_radians(30.0);
    const std::vector<double> q{1, 0}, pos{std::cos(a30), std::sin(a30)}, near{0.8, 0.6}, far{-1, 0.01};
    EXPECT_TRUE(ts::within_angle_boundary<double>(q, pos, near));
    EXPECT_FALSE(ts::within_angle_boundary<double>(q, pos, far));
    ts::RegionParams wide{180.0, false};
    EXPECT_TRUE(ts::within_angle_boundary<double>(q, pos, far, wide));
    EXPECT_THROW(ts::RegionParams({0.0, false}).validate(), ts::ContractError);
}

TEST(Geometry, NormalizedTripleScoresAreCosines) {
    const std::vector<float> q{2, 0}, pos{0, 3}, neg{1, 1};
    const auto raw = ts::triple_scores<float>(q, pos, neg);
    EXPECT_EQ(raw.s_pos, 0.0);
    EXPECT_EQ(raw.s_neg, 2.0);
    EXPECT_EQ(raw.s_pp, 3.0);
    const auto cos = ts::triple_scores<float>(q, pos, neg, {60.0, true});
    EXPECT_NEAR(cos.s_neg, std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(cos.s_pp, std::sqrt(0.5), 1e-12);
}

// Properties over seeded random vectors.
TEST(GeometryProperty, SymmetryScaleInvarianceAndRange) {
    ts::Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t dim = 1 + ts::uniform_index(rng, 32);
        const auto u = ts::testing::random_vector(dim, rng);
        const auto v = ts::testing::random_vector(dim, rng);
        const auto w = ts::testing::random_vector(dim, rng);
        EXPECT_EQ(ts::dot_score(u, v), ts::dot_score(v, u));
        const double a = ts::angle(u, v);
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, std::numbers::pi);
        std::vector<float> u3(u);
        for (float& x : u3) {
            x *= 3.0f;
        }
        EXPECT_NEAR(ts::angle(u3, v), a, 1e-6);
        EXPECT_DOUBLE_EQ(ts::theta(u, v, w), ts::theta(u, w, v));
        EXPECT_GE(ts::theta(u, v, w), 0.0);
    }
}
