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

// Top-K maximum inner product search. Exact mode is an exhaustive scan and
// is the reference every other path is checked against; approximate mode is
// an inverted-file (k-means lists) index behind the same interface.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "trisampler/core_data.hpp"
#include "trisampler/error.hpp"
#include "trisampler/geometry.hpp"
#include "trisampler/random.hpp"

namespace trisampler {

enum class IndexMode { exact, approximate };

inline std::string
to_string(IndexMode mode) {
    return mode == IndexMode::exact ? "exact" : "approximate";
}

struct Hit {
    RowId row = 0;
    double score = 0.0;

    friend bool
    operator==(const Hit&, const Hit&) = default;
};

/// At most k hits, score descending, ties by ascending doc id.
struct TopKResult {
    std::vector<Hit> hits;

    std::size_t
    size() const {
        return hits.size();
    }

    bool
    empty() const {
        return hits.empty();
    }

    friend bool
    operator==(const TopKResult&, const TopKResult&) = default;
};

/// Inverted-file parameters. Zero means "derive from corpus size".
struct ApproximateParams {
    std::size_t lists = 0;   // default: round(sqrt(count))
    std::size_t probes = 0;  // default: ceil(0.8 * lists)
    std::size_t iterations = 8;
    std::uint64_t seed = 0x1F1F1F1FULL;
};

namespace detail {

// Sorted copy of an exclusion list, so membership is a binary search.
class Exclusion {
public:
    explicit Exclusion(std::span<const RowId> rows) {
        if (std::is_sorted(rows.begin(), rows.end())) {
            view_ = rows;
        } else {
            owned_.assign(rows.begin(), rows.end());
            std::sort(owned_.begin(), owned_.end());
            view_ = owned_;
        }
    }

    bool
    contains(RowId r) const {
        return std::binary_search(view_.begin(), view_.end(), r);
    }

    std::size_t
    size() const {
        return view_.size();
    }

private:
    std::vector<RowId> owned_;
    std::span<const RowId> view_;
};

struct HitOrder {
    const EmbeddingMatrix* corpus;

    // true if a ranks strictly before b
    bool
    operator()(const Hit& a, const Hit& b) const {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return corpus->id_rank(a.row) < corpus->id_rank(b.row);
    }
};

// Bounded selection of the k best hits. The heap top is the current worst.
class TopKCollector {
public:
    TopKCollector(const EmbeddingMatrix& corpus, std::size_t k) : order_{&corpus}, k_(k) {
        heap_.reserve(k);
    }

    void
    offer(const Hit& h) {
        if (heap_.size() < k_) {
            heap_.push_back(h);
            std::push_heap(heap_.begin(), heap_.end(), order_);
        } else if (order_(h, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), order_);
            heap_.back() = h;
            std::push_heap(heap_.begin(), heap_.end(), order_);
        }
    }

    TopKResult
    finish() && {
        std::sort_heap(heap_.begin(), heap_.end(), order_);
        return TopKResult{std::move(heap_)};
    }

private:
    HitOrder order_;
    std::size_t k_;
    std::vector<Hit> heap_;
};

template <typename T>
void
check_query(const EmbeddingMatrix& corpus, std::span<const T> query, std::size_t k) {
    TRISAMPLER_EXPECT(query.size() == corpus.dim(),
                      "top_k: query dim " + std::to_string(query.size()) + " != corpus dim " +
                          std::to_string(corpus.dim()));
    TRISAMPLER_EXPECT(k >= 1, "top_k: k must be >= 1");
}

}  // namespace detail

/// Exhaustive scan with a full sort. Kept deliberately separate from the
/// index's selection path so the two can be compared.
template <typename T>
TopKResult
brute_force_top_k(const EmbeddingMatrix& corpus, std::span<const T> query, std::size_t k,
                  std::span<const RowId> exclude = {}) {
    detail::check_query(corpus, query, k);
    detail::Exclusion excluded(exclude);
    std::vector<Hit> all;
    all.reserve(corpus.count());
    for (RowId r = 0; r < corpus.count(); ++r) {
        if (!excluded.contains(r)) {
            all.push_back({r, dot_score(query, corpus.row(r))});
        }
    }
    std::sort(all.begin(), all.end(), detail::HitOrder{&corpus});
    if (all.size() > k) {
        all.resize(k);
    }
    return TopKResult{std::move(all)};
}

class Index {
public:
    /// Builds an index over `corpus`. When `predecessor` is given the new
    /// index's epoch is one past it.
    static Index
    build(std::shared_ptr<const EmbeddingMatrix> corpus, IndexMode mode = IndexMode::exact,
          const ApproximateParams& params = {}, const Index* predecessor = nullptr) {
        TRISAMPLER_EXPECT(corpus != nullptr && !corpus->empty(), "Index::build: empty corpus");
        Index index;
        index.corpus_ = std::move(corpus);
        index.mode_ = mode;
        index.epoch_ = predecessor != nullptr ? predecessor->epoch_ + 1 : 0;
        if (mode == IndexMode::approximate) {
            index.build_lists(params);
        }
        return index;
    }

    template <typename T>
    TopKResult
    top_k(std::span<const T> query, std::size_t k, std::span<const RowId> exclude = {}) const {
        detail::check_query(*corpus_, query, k);
        detail::Exclusion excluded(exclude);
        if (mode_ == IndexMode::exact) {
            detail::TopKCollector collector(*corpus_, k);
            for (RowId r = 0; r < corpus_->count(); ++r) {
                if (!excluded.contains(r)) {
                    collector.offer({r, dot_score(query, corpus_->row(r))});
                }
            }
            return std::move(collector).finish();
        }
        return approximate_top_k(query, k, excluded);
    }

    template <typename T>
    TopKResult
    top_k(const std::vector<T>& query, std::size_t k, std::span<const RowId> exclude = {}) const {
        return top_k(std::span<const T>(query), k, exclude);
    }

    const EmbeddingMatrix&
    corpus() const {
        return *corpus_;
    }

    const std::shared_ptr<const EmbeddingMatrix>&
    corpus_ptr() const {
        return corpus_;
    }

    IndexMode
    mode() const {
        return mode_;
    }

    std::uint64_t
    epoch() const {
        return epoch_;
    }

    std::size_t
    list_count() const {
        return lists_.size();
    }

private:
    Index() = default;

    void
    build_lists(const ApproximateParams& params) {
        const auto& c = *corpus_;
        const std::size_t n = c.count();
        const std::size_t dim = c.dim();
        std::size_t nlist = params.lists != 0
                                ? params.lists
                                : static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
        nlist = std::clamp<std::size_t>(nlist, 1, n);
        // Isotropic data needs most lists probed for recall@100 >= 0.95.
        probes_ = params.probes != 0 ? std::min(params.probes, nlist) : (4 * nlist + 4) / 5;

        // k-means++-free init: distinct random rows.
        Rng rng(params.seed);
        std::vector<RowId> rows(n);
        std::iota(rows.begin(), rows.end(), RowId{0});
        for (std::size_t i = 0; i < nlist; ++i) {
            std::swap(rows[i], rows[i + uniform_index(rng, n - i)]);
        }
        centroids_.assign(nlist * dim, 0.0);
        for (std::size_t l = 0; l < nlist; ++l) {
            auto src = c.row(rows[l]);
            std::copy(src.begin(), src.end(), centroids_.begin() + static_cast<std::ptrdiff_t>(l * dim));
        }

        std::vector<std::uint32_t> assign(n, 0);
        for (std::size_t it = 0; it <= params.iterations; ++it) {
            for (RowId r = 0; r < n; ++r) {
                assign[r] = nearest_centroid(c.row(r));
            }
            if (it == params.iterations) {
                break;
            }
            std::vector<double> sums(nlist * dim, 0.0);
            std::vector<std::size_t> sizes(nlist, 0);
            for (RowId r = 0; r < n; ++r) {
                auto v = c.row(r);
                for (std::size_t j = 0; j < dim; ++j) {
                    sums[assign[r] * dim + j] += v[j];
                }
                ++sizes[assign[r]];
            }
            for (std::size_t l = 0; l < nlist; ++l) {
                if (sizes[l] == 0) {
                    continue;  // keep the old centroid for empty lists
                }
                for (std::size_t j = 0; j < dim; ++j) {
                    centroids_[l * dim + j] = sums[l * dim + j] / static_cast<double>(sizes[l]);
                }
            }
        }
        lists_.assign(nlist, {});
        for (RowId r = 0; r < n; ++r) {
            lists_[assign[r]].push_back(r);
        }
    }

    std::uint32_t
    nearest_centroid(std::span<const float> v) const {
        const std::size_t dim = corpus_->dim();
        const std::size_t nlist = centroids_.size() / dim;
        std::uint32_t best = 0;
        double best_d = INFINITY;
        for (std::size_t l = 0; l < nlist; ++l) {
            double d = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double diff = static_cast<double>(v[j]) - centroids_[l * dim + j];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = static_cast<std::uint32_t>(l);
            }
        }
        return best;
    }

    template <typename T>
    TopKResult
    approximate_top_k(std::span<const T> query, std::size_t k, const detail::Exclusion& excluded) const {
        const std::size_t dim = corpus_->dim();
        const std::size_t nlist = lists_.size();
        std::vector<std::pair<double, std::uint32_t>> ranked(nlist);
        for (std::size_t l = 0; l < nlist; ++l) {
            ranked[l] = {dot_score(query, std::span<const double>(centroids_.data() + l * dim, dim)),
                         static_cast<std::uint32_t>(l)};
        }
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(probes_), ranked.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });

        // Over-fetch by the exclusion size, then filter.
        detail::TopKCollector collector(*corpus_, k + excluded.size());
        for (std::size_t p = 0; p < probes_; ++p) {
            for (RowId r : lists_[ranked[p].second]) {
                collector.offer({r, dot_score(query, corpus_->row(r))});
            }
        }
        auto result = std::move(collector).finish();
        std::erase_if(result.hits, [&](const Hit& h) { return excluded.contains(h.row); });
        if (result.hits.size() > k) {
            result.hits.resize(k);
        }
        return result;
    }

    std::shared_ptr<const EmbeddingMatrix> corpus_;
    IndexMode mode_ = IndexMode::exact;
    std::uint64_t epoch_ = 0;
    std::vector<double> centroids_;
    std::vector<std::vector<RowId>> lists_;
    std::size_t probes_ = 0;
};

}  // namespace trisampler
