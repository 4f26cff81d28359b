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

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "trisampler/error.hpp"

namespace trisampler {

/// Inner product with double accumulation.
template <typename T, typename U>
double
dot_score(std::span<const T> u, std::span<const U> v) {
    TRISAMPLER_EXPECT(u.size() == v.size(), "dot_score: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
    }
    return acc;
}

template <typename T, typename U>
double
dot_score(const std::vector<T>& u, const std::vector<U>& v) {
    return dot_score(std::span<const T>(u), std::span<const U>(v));
}

template <typename T>
double
norm(std::span<const T> u) {
    return std::sqrt(dot_score(u, u));
}

/// Angle between u and v in radians. The cosine is clamped to [-1, 1].
template <typename T, typename U>
double
angle(std::span<const T> u, std::span<const U> v) {
    const double nu = norm(u);
    const double nv = norm(v);
    TRISAMPLER_EXPECT(nu > 0.0 && nv > 0.0, "angle: zero vector");
    const double c = std::clamp(dot_score(u, v) / (nu * nv), -1.0, 1.0);
    return std::acos(c);
}

template <typename T, typename U>
double
angle(const std::vector<T>& u, const std::vector<U>& v) {
    return angle(std::span<const T>(u), std::span<const U>(v));
}

/// |angle(q, d_pos) - angle(q, d_neg)|, the angular width of the
/// query/positive/negative triangle.
template <typename T>
double
theta(std::span<const T> q, std::span<const T> d_pos, std::span<const T> d_neg) {
    return std::abs(angle(q, d_pos) - angle(q, d_neg));
}

template <typename T>
double
theta(const std::vector<T>& q, const std::vector<T>& d_pos, const std::vector<T>& d_neg) {
    return theta(std::span<const T>(q), std::span<const T>(d_pos), std::span<const T>(d_neg));
}

inline constexpr double
degrees_to_radians(double deg) {
    return deg * std::numbers::pi / 180.0;
}

/// Scores of one (query, positive, negative) triple.
struct TripleScores {
    double s_pos = 0.0;  // s(q, d+)
    double s_neg = 0.0;  // s(q, d-)
    double s_pp = 0.0;   // s(d+, d-)
};

struct RegionParams {
    double theta_max_degrees = 60.0;
    /// Score triples on unit-normalized vectors.
    bool normalize = false;

    void
    validate() const {
        TRISAMPLER_EXPECT(theta_max_degrees > 0.0 && theta_max_degrees <= 180.0,
                          "theta_max must lie in (0, 180] degrees");
    }
};

template <typename T>
TripleScores
triple_scores(std::span<const T> q, std::span<const T> d_pos, std::span<const T> d_neg,
              const RegionParams& params = {}) {
    TripleScores ts{dot_score(q, d_pos), dot_score(q, d_neg), dot_score(d_pos, d_neg)};
    if (params.normalize) {
        const double nq = norm(q);
        const double np = norm(d_pos);
        const double nn = norm(d_neg);
        TRISAMPLER_EXPECT(nq > 0.0 && np > 0.0 && nn > 0.0, "triple_scores: zero vector");
        ts.s_pos /= nq * np;
        ts.s_neg /= nq * nn;
        ts.s_pp /= np * nn;
    }
    return ts;
}

/// Score-level membership in the triangular region: the negative is at
/// least as similar to the positive as to the query. The boundary counts
/// as inside even though it receives zero sampling weight.
inline bool
in_triangular_region(const TripleScores& ts) {
    return ts.s_pp >= ts.s_neg;
}

/// Strict membership, i.e. the support of the ReLU sampling weight.
inline bool
strictly_in_triangular_region(const TripleScores& ts) {
    return ts.s_pp > ts.s_neg;
}

/// Angle-form diagnostic: theta within the configured boundary (60 degrees
/// by default). Only coincides with the score form for normalized vectors.
template <typename T>
bool
within_angle_boundary(std::span<const T> q, std::span<const T> d_pos, std::span<const T> d_neg,
                      const RegionParams& params = {}) {
    params.validate();
    return theta(q, d_pos, d_neg) <= degrees_to_radians(params.theta_max_degrees);
}

}  // namespace trisampler
