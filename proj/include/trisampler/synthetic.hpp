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

// Clustered synthetic retrieval corpora on the unit sphere.
//
// Cluster centers are random unit vectors. Background documents and queries
// scatter around their cluster center; each query gets one positive placed
// close to it, and with probability trap_rate an unlabelled "trap" planted
// next to the query, just outside the positive's radius. Traps score almost
// as high as the positive against the query yet sit away from it, which is
// what the triangular-region constraint is meant to tell apart.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "trisampler/core_data.hpp"
#include "trisampler/error.hpp"
#include "trisampler/random.hpp"

namespace trisampler {

struct SyntheticSpec {
    std::size_t clusters = 20;
    std::size_t docs = 5000;
    std::size_t queries = 200;
    std::size_t dim = 64;
    /// Norm of the offset between a query and its positive.
    double positive_spread = 0.5;
    /// Fraction of queries that get a planted trap document.
    double trap_rate = 0.5;
    std::uint64_t seed = 42;

    void
    validate() const {
        TRISAMPLER_EXPECT(clusters >= 1, "synthetic spec: clusters must be >= 1");
        TRISAMPLER_EXPECT(queries >= 1, "synthetic spec: queries must be >= 1");
        TRISAMPLER_EXPECT(dim >= 2, "synthetic spec: dim must be >= 2");
        TRISAMPLER_EXPECT(docs >= 2 * queries, "synthetic spec: docs must be >= 2 * queries");
        TRISAMPLER_EXPECT(positive_spread >= 0.0 && std::isfinite(positive_spread),
                          "synthetic spec: positive_spread must be >= 0");
        TRISAMPLER_EXPECT(trap_rate >= 0.0 && trap_rate <= 1.0, "synthetic spec: trap_rate must lie in [0, 1]");
    }

    friend bool
    operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Spread of background documents and queries around their cluster center.
inline constexpr double kClusterSpread = 1.0;
/// Trap offset relative to positive_spread.
inline constexpr double kTrapSpreadFactor = 1.6;

inline SyntheticSpec
synthetic_spec_from_json(const nlohmann::json& j, const std::string& path = "spec") {
    if (!j.is_object()) {
        throw ConfigError(path + ": expected an object");
    }
    SyntheticSpec s;
    for (const auto& [key, value] : j.items()) {
        const auto where = path + "." + key;
        try {
            if (key == "clusters") {
                s.clusters = value.get<std::size_t>();
            } else if (key == "docs") {
                s.docs = value.get<std::size_t>();
            } else if (key == "queries") {
                s.queries = value.get<std::size_t>();
            } else if (key == "dim") {
                s.dim = value.get<std::size_t>();
            } else if (key == "positive_spread") {
                s.positive_spread = value.get<double>();
            } else if (key == "trap_rate") {
                s.trap_rate = value.get<double>();
            } else if (key == "seed") {
                s.seed = value.get<std::uint64_t>();
            } else {
                throw ConfigError("unknown key '" + where + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    try {
        s.validate();
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

inline nlohmann::json
to_json(const SyntheticSpec& s) {
    return {{"clusters", s.clusters},        {"docs", s.docs},         {"queries", s.queries},
            {"dim", s.dim},                  {"positive_spread", s.positive_spread},
            {"trap_rate", s.trap_rate},      {"seed", s.seed}};
}

struct SyntheticDataset {
    EmbeddingMatrix corpus;
    EmbeddingMatrix queries;
    Qrels qrels;
};

namespace detail {

inline std::string
padded_id(char prefix, std::size_t i, std::size_t count) {
    const auto width = std::to_string(count > 0 ? count - 1 : 0).size();
    auto digits = std::to_string(i);
    return prefix + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

inline void
normalize_in_place(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) {
        n += x * x;
    }
    n = std::sqrt(n);
    for (double& x : v) {
        x /= n;
    }
}

// base + Gaussian offset whose expected norm is `spread`, projected to the sphere.
inline std::vector<double>
jitter(const std::vector<double>& base, double spread, Rng& rng) {
    const double sd = spread / std::sqrt(static_cast<double>(base.size()));
    std::vector<double> v(base);
    for (double& x : v) {
        x += sd * standard_normal(rng);
    }
    normalize_in_place(v);
    return v;
}

}  // namespace detail

/// Deterministic in the spec (including its seed).
inline SyntheticDataset
generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(stream_seed(spec.seed, "synthetic"));
    const std::size_t dim = spec.dim;

    std::vector<std::vector<double>> centers(spec.clusters, std::vector<double>(dim));
    for (auto& c : centers) {
        for (double& x : c) {
            x = standard_normal(rng);
        }
        detail::normalize_in_place(c);
    }

    std::vector<std::vector<double>> queries;
    std::vector<std::vector<double>> planted;  // positives and traps
    std::vector<std::size_t> positive_of;      // planted index of each query's positive
    queries.reserve(spec.queries);
    for (std::size_t q = 0; q < spec.queries; ++q) {
        const std::size_t c = uniform_index(rng, spec.clusters);
        queries.push_back(detail::jitter(centers[c], kClusterSpread, rng));
        positive_of.push_back(planted.size());
        planted.push_back(detail::jitter(queries.back(), spec.positive_spread, rng));
        if (uniform01(rng) < spec.trap_rate) {
            planted.push_back(detail::jitter(queries.back(), kTrapSpreadFactor * spec.positive_spread, rng));
        }
    }

    const std::size_t total = std::max(spec.docs, planted.size());
    std::vector<std::vector<double>> docs;
    docs.reserve(total);
    for (auto& p : planted) {
        docs.push_back(std::move(p));
    }
    while (docs.size() < total) {
        const std::size_t c = uniform_index(rng, spec.clusters);
        docs.push_back(detail::jitter(centers[c], kClusterSpread, rng));
    }

    // Shuffle rows so ids carry no structure.
    std::vector<std::size_t> slot(total);
    for (std::size_t i = 0; i < total; ++i) {
        slot[i] = i;
    }
    for (std::size_t i = total; i > 1; --i) {
        std::swap(slot[i - 1], slot[uniform_index(rng, i)]);
    }

    std::vector<std::string> doc_ids(total);
    std::vector<float> doc_data(total * dim);
    for (std::size_t i = 0; i < total; ++i) {
        const std::size_t row = slot[i];
        doc_ids[row] = detail::padded_id('d', row, total);
        for (std::size_t j = 0; j < dim; ++j) {
            doc_data[row * dim + j] = static_cast<float>(docs[i][j]);
        }
    }
    std::vector<std::string> query_ids(spec.queries);
    std::vector<float> query_data(spec.queries * dim);
    Qrels qrels;
    for (std::size_t q = 0; q < spec.queries; ++q) {
        query_ids[q] = detail::padded_id('q', q, spec.queries);
        for (std::size_t j = 0; j < dim; ++j) {
            query_data[q * dim + j] = static_cast<float>(queries[q][j]);
        }
        qrels.add(query_ids[q], doc_ids[slot[positive_of[q]]]);
    }
    return {EmbeddingMatrix(std::move(doc_ids), dim, std::move(doc_data)),
            EmbeddingMatrix(std::move(query_ids), dim, std::move(query_data)), std::move(qrels)};
}

}  // namespace trisampler
