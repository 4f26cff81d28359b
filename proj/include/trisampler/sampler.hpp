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

// Negative sampling for dense retrieval.
//
// The TriSampler pipeline for one (query, positive) pair:
//
//   1. candidates    top-K corpus rows by s(q, d), positives excluded
//   2. transitional  m candidates drawn without replacement with
//                    p ~ exp(-c * (s(q,d-) - s(q,d+))^2), c = 1/4
//   3. final         n of those drawn with p ~ max(0, s(d+,d-) - s(q,d-))
//
// Step 3 only gives mass to negatives closer to the positive than to the
// query (the triangular region). If none of the transitional negatives is
// strictly inside it, the final draw falls back to the step-2 weights.
//
// The baseline samplers used for comparison share the candidate step and
// differ only in the weights they draw with.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trisampler/core_data.hpp"
#include "trisampler/error.hpp"
#include "trisampler/geometry.hpp"
#include "trisampler/parallel.hpp"
#include "trisampler/random.hpp"
#include "trisampler/vector_index.hpp"

namespace trisampler {

enum class Variant {
    trisampler,
    uniform,        // equal weights over the top-K pool
    top_ns,         // deterministic top-n by s(q, d-)
    rand_ns,        // uniform over every non-positive corpus row
    topk_weighted,  // p ~ exp(s(q, d-)) over top-K
    debiased,       // p ~ exp(-|s(q,d-) - s(q,d+)|) over top-K
    simans,         // p ~ exp(-a (s(q,d-) - s(q,d+) - b)^2) over top-K
    candidates_qd,  // Gaussian weights over top-K by s(q, .), single stage
    candidates_dd,  // Gaussian weights over top-K by s(d+, .), single stage
};

inline constexpr Variant kAllVariants[] = {
    Variant::trisampler, Variant::uniform, Variant::top_ns, Variant::rand_ns, Variant::topk_weighted,
    Variant::debiased, Variant::simans, Variant::candidates_qd, Variant::candidates_dd,
};

inline std::string
to_string(Variant v) {
    switch (v) {
        case Variant::trisampler:
            return "trisampler";
        case Variant::uniform:
            return "uniform";
        case Variant::top_ns:
            return "top_ns";
        case Variant::rand_ns:
            return "rand_ns";
        case Variant::topk_weighted:
            return "topk_weighted";
        case Variant::debiased:
            return "debiased";
        case Variant::simans:
            return "simans";
        case Variant::candidates_qd:
            return "candidates_qd";
        case Variant::candidates_dd:
            return "candidates_dd";
    }
    return "unknown";
}

inline std::optional<Variant>
parse_variant(std::string_view name) {
    for (auto v : kAllVariants) {
        if (to_string(v) == name) {
            return v;
        }
    }
    return std::nullopt;
}

/// Candidate pool sizing: top-200 for passage corpora, top-400 for
/// document corpora.
enum class CorpusProfile { passage, document };

inline constexpr std::size_t kPassagePoolSize = 200;
inline constexpr std::size_t kDocumentPoolSize = 400;
/// One positive to fifteen negatives.
inline constexpr std::size_t kDefaultNegatives = 15;
inline constexpr double kGaussianCoefficient = 0.25;

/// Which anchor ranks the candidate pool: the query (qd) or the positive (dd).
enum class CandidateAxis { query_document, document_document };

struct SamplerConfig {
    Variant variant = Variant::trisampler;
    CorpusProfile profile = CorpusProfile::passage;
    std::size_t pool_size = 0;          // K; 0 selects the profile default
    std::size_t transitional_size = 0;  // m; 0 selects min(4n, K)
    std::size_t negatives = kDefaultNegatives;  // n
    std::uint64_t seed = 0;
    double gaussian_coef = kGaussianCoefficient;
    double simans_a = 0.5;
    double simans_b = 0.0;

    std::size_t
    candidate_pool() const {
        if (pool_size != 0) {
            return pool_size;
        }
        return profile == CorpusProfile::document ? kDocumentPoolSize : kPassagePoolSize;
    }

    std::size_t
    transitional_count() const {
        if (transitional_size != 0) {
            return transitional_size;
        }
        return std::min(4 * negatives, candidate_pool());
    }

    void
    validate() const {
        const auto k = candidate_pool();
        const auto m = transitional_count();
        TRISAMPLER_EXPECT(negatives >= 1 && negatives <= m && m <= k,
                          "sampler config requires 1 <= n <= m <= K (n=" + std::to_string(negatives) +
                              ", m=" + std::to_string(m) + ", K=" + std::to_string(k) + ")");
        TRISAMPLER_EXPECT(gaussian_coef > 0.0 && std::isfinite(gaussian_coef), "gaussian_coef must be positive");
        TRISAMPLER_EXPECT(simans_a > 0.0 && std::isfinite(simans_a) && std::isfinite(simans_b),
                          "simans_a must be positive and simans_b finite");
    }
};

/// A candidate negative with both cached scores.
struct ScoredCandidate {
    RowId row = 0;
    double s_neg = 0.0;  // s(q, d-)
    double s_pp = 0.0;   // s(d+, d-)

    friend bool
    operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

struct CandidateSet {
    RowId query = 0;
    RowId positive = 0;
    double s_pos = 0.0;  // s(q, d+)
    std::vector<ScoredCandidate> candidates;

    std::size_t
    size() const {
        return candidates.size();
    }

    bool
    empty() const {
        return candidates.empty();
    }
};

struct NegativeSample {
    RowId query = 0;
    RowId positive = 0;
    std::vector<ScoredCandidate> negatives;  // draw order
    /// Probability of each drawn negative under the normalized final
    /// distribution, aligned with `negatives`.
    std::vector<double> weights_used;
    /// The final draw used the transitional weights because no candidate
    /// had positive ReLU weight.
    bool fallback = false;

    std::size_t
    in_region_count() const {
        return static_cast<std::size_t>(std::count_if(negatives.begin(), negatives.end(),
                                                      [](const auto& c) { return c.s_pp > c.s_neg; }));
    }

    friend bool
    operator==(const NegativeSample&, const NegativeSample&) = default;
};

/// Query embeddings, the corpus index and the positives per query, bundled
/// for the sampling calls. Holds references; all referents must outlive it.
class SamplingContext {
public:
    SamplingContext(const Index& index, const EmbeddingMatrix& queries, const ResolvedQrels& qrels)
        : index_(index), queries_(queries), positives_(queries.count(), nullptr) {
        TRISAMPLER_EXPECT(queries.dim() == index.corpus().dim(), "query and corpus dims differ");
        for (const auto& e : qrels.entries) {
            TRISAMPLER_EXPECT(e.query < queries.count(), "qrels query row out of range");
            for (auto p : e.positives) {
                TRISAMPLER_EXPECT(p < index.corpus().count(), "qrels positive row out of range");
            }
            positives_[e.query] = &e.positives;
        }
    }

    const Index&
    index() const {
        return index_;
    }

    const EmbeddingMatrix&
    corpus() const {
        return index_.corpus();
    }

    const EmbeddingMatrix&
    queries() const {
        return queries_;
    }

    std::span<const RowId>
    positives(RowId query) const {
        TRISAMPLER_EXPECT(query < positives_.size(), "query row out of range");
        const auto* p = positives_[query];
        return p == nullptr ? std::span<const RowId>{} : std::span<const RowId>(*p);
    }

private:
    const Index& index_;
    const EmbeddingMatrix& queries_;
    std::vector<const std::vector<RowId>*> positives_;
};

/// Top-K non-positive candidates for (query, positive) ranked along `axis`,
/// each carrying s(q, d-) and s(d+, d-).
inline CandidateSet
construct_candidates(const SamplingContext& ctx, RowId query, RowId positive, std::size_t pool_size,
                     CandidateAxis axis = CandidateAxis::query_document) {
    const auto positives = ctx.positives(query);
    TRISAMPLER_EXPECT(std::binary_search(positives.begin(), positives.end(), positive),
                      "construct_candidates: '" + ctx.corpus().id(positive) + "' is not a positive of query '" +
                          ctx.queries().id(query) + "'");
    const auto& corpus = ctx.corpus();
    const auto qvec = ctx.queries().row(query);
    const auto pvec = corpus.row(positive);

    CandidateSet set;
    set.query = query;
    set.positive = positive;
    set.s_pos = dot_score(qvec, pvec);

    const bool by_query = axis == CandidateAxis::query_document;
    const auto top = ctx.index().top_k(by_query ? qvec : pvec, pool_size, positives);
    set.candidates.reserve(top.size());
    for (const auto& hit : top.hits) {
        const auto dvec = corpus.row(hit.row);
        ScoredCandidate c{hit.row, 0.0, 0.0};
        c.s_neg = by_query ? hit.score : dot_score(qvec, dvec);
        c.s_pp = by_query ? dot_score(pvec, dvec) : hit.score;
        set.candidates.push_back(c);
    }
    return set;
}

/// Divides by the sum. An all-zero vector stays all-zero.
inline std::vector<double>
normalized(std::vector<double> w) {
    double total = 0.0;
    for (double x : w) {
        total += x;
    }
    if (total > 0.0) {
        for (double& x : w) {
            x /= total;
        }
    }
    return w;
}

/// Unnormalized first-stage weight; peaks at 1 when s_neg == s_pos.
inline double
gaussian_weight(double s_neg, double s_pos, double coef = kGaussianCoefficient) {
    const double d = s_neg - s_pos;
    return std::exp(-coef * d * d);
}

/// Unnormalized second-stage weight, ReLU(s(d+,d-) - s(q,d-)).
inline double
relu_weight(double s_pp, double s_neg) {
    return std::max(0.0, s_pp - s_neg);
}

inline std::vector<double>
transitional_weights(const CandidateSet& cands, double coef = kGaussianCoefficient) {
    TRISAMPLER_EXPECT(!cands.empty(), "transitional_weights: empty candidate set");
    std::vector<double> w;
    w.reserve(cands.size());
    for (const auto& c : cands.candidates) {
        w.push_back(gaussian_weight(c.s_neg, cands.s_pos, coef));
    }
    return normalized(std::move(w));
}

/// Draws up to `count` distinct indices; each draw is proportional to the
/// weights of what is left. Once only zero-weight entries remain, draws
/// continue uniformly among them.
inline std::vector<std::size_t>
weighted_sample_without_replacement(std::span<const double> weights, std::size_t count, Rng& rng) {
    const std::size_t size = weights.size();
    count = std::min(count, size);
    std::vector<std::size_t> picked;
    picked.reserve(count);
    std::vector<char> taken(size, 0);
    for (std::size_t draw = 0; draw < count; ++draw) {
        double total = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
            if (!taken[i]) {
                total += weights[i];
            }
        }
        std::size_t choice = size;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            std::size_t last_positive = size;
            for (std::size_t i = 0; i < size; ++i) {
                if (taken[i] || weights[i] <= 0.0) {
                    continue;
                }
                last_positive = i;
                acc += weights[i];
                if (target < acc) {
                    choice = i;
                    break;
                }
            }
            if (choice == size) {
                choice = last_positive;  // rounding pushed target past the end
            }
        } else {
            std::size_t nth = uniform_index(rng, size - draw);
            for (std::size_t i = 0; i < size; ++i) {
                if (!taken[i] && nth-- == 0) {
                    choice = i;
                    break;
                }
            }
        }
        taken[choice] = 1;
        picked.push_back(choice);
    }
    return picked;
}

/// Draws the transitional pool. Returns every candidate unchanged when the
/// pool is no larger than m.
inline CandidateSet
sample_transitional(const CandidateSet& cands, std::span<const double> weights, std::size_t m, Rng& rng) {
    TRISAMPLER_EXPECT(!cands.empty(), "sample_transitional: empty candidate set");
    TRISAMPLER_EXPECT(weights.size() == cands.size(), "sample_transitional: weight/candidate size mismatch");
    if (cands.size() <= m) {
        return cands;
    }
    CandidateSet out{cands.query, cands.positive, cands.s_pos, {}};
    out.candidates.reserve(m);
    for (auto i : weighted_sample_without_replacement(weights, m, rng)) {
        out.candidates.push_back(cands.candidates[i]);
    }
    return out;
}

struct FinalWeights {
    std::vector<double> weights;  // normalized
    bool fallback = false;
};

inline FinalWeights
final_weights(const CandidateSet& trans, double coef = kGaussianCoefficient) {
    TRISAMPLER_EXPECT(!trans.empty(), "final_weights: empty transitional set");
    std::vector<double> w;
    w.reserve(trans.size());
    bool any = false;
    for (const auto& c : trans.candidates) {
        w.push_back(relu_weight(c.s_pp, c.s_neg));
        any = any || w.back() > 0.0;
    }
    if (!any) {
        return {transitional_weights(trans, coef), true};
    }
    return {normalized(std::move(w)), false};
}

/// Draws n distinct negatives from `pool` with the given normalized weights.
inline NegativeSample
sample_final(const CandidateSet& pool, const FinalWeights& fw, std::size_t n, Rng& rng) {
    TRISAMPLER_EXPECT(fw.weights.size() == pool.size(), "sample_final: weight/candidate size mismatch");
    NegativeSample out;
    out.query = pool.query;
    out.positive = pool.positive;
    out.fallback = fw.fallback;
    for (auto i : weighted_sample_without_replacement(fw.weights, n, rng)) {
        out.negatives.push_back(pool.candidates[i]);
        out.weights_used.push_back(fw.weights[i]);
    }
    return out;
}

namespace detail {

template <typename WeightFn>
FinalWeights
weights_over(const CandidateSet& cands, WeightFn&& fn) {
    std::vector<double> w;
    w.reserve(cands.size());
    for (const auto& c : cands.candidates) {
        w.push_back(fn(c));
    }
    return {normalized(std::move(w)), false};
}

inline NegativeSample
sample_top_n(const CandidateSet& cands, std::size_t n) {
    NegativeSample out{cands.query, cands.positive, {}, {}, false};
    const std::size_t take = std::min(n, cands.size());
    for (std::size_t i = 0; i < take; ++i) {
        out.negatives.push_back(cands.candidates[i]);
        out.weights_used.push_back(1.0 / static_cast<double>(take));
    }
    return out;
}

inline NegativeSample
sample_random_corpus(const SamplingContext& ctx, RowId query, RowId positive, std::size_t n, Rng& rng) {
    const auto& corpus = ctx.corpus();
    const auto positives = ctx.positives(query);
    TRISAMPLER_EXPECT(std::binary_search(positives.begin(), positives.end(), positive),
                      "rand_ns: positive is not a positive of the query");
    const std::size_t available = corpus.count() - positives.size();
    const std::size_t take = std::min(n, available);
    NegativeSample out{query, positive, {}, {}, false};
    const auto qvec = ctx.queries().row(query);
    const auto pvec = corpus.row(positive);
    std::vector<RowId> chosen;
    if (take * 2 >= available) {
        // Dense case: partial Fisher-Yates over the non-positive rows.
        std::vector<RowId> rows;
        rows.reserve(available);
        for (RowId r = 0; r < corpus.count(); ++r) {
            if (!std::binary_search(positives.begin(), positives.end(), r)) {
                rows.push_back(r);
            }
        }
        for (std::size_t i = 0; i < take; ++i) {
            std::swap(rows[i], rows[i + uniform_index(rng, rows.size() - i)]);
            chosen.push_back(rows[i]);
        }
    } else {
        while (chosen.size() < take) {
            const auto r = static_cast<RowId>(uniform_index(rng, corpus.count()));
            if (std::binary_search(positives.begin(), positives.end(), r) ||
                std::find(chosen.begin(), chosen.end(), r) != chosen.end()) {
                continue;
            }
            chosen.push_back(r);
        }
    }
    for (auto r : chosen) {
        const auto dvec = corpus.row(r);
        out.negatives.push_back({r, dot_score(qvec, dvec), dot_score(pvec, dvec)});
        out.weights_used.push_back(1.0 / static_cast<double>(available));
    }
    return out;
}

}  // namespace detail

/// Runs the configured sampler for one (query, positive) pair.
inline NegativeSample
sample(const SamplingContext& ctx, RowId query, RowId positive, const SamplerConfig& config, Rng& rng) {
    config.validate();
    const std::size_t k = config.candidate_pool();
    const std::size_t n = config.negatives;

    if (config.variant == Variant::rand_ns) {
        return detail::sample_random_corpus(ctx, query, positive, n, rng);
    }

    const auto axis =
        config.variant == Variant::candidates_dd ? CandidateAxis::document_document : CandidateAxis::query_document;
    const auto cands = construct_candidates(ctx, query, positive, k, axis);
    if (cands.empty()) {
        return NegativeSample{query, positive, {}, {}, false};
    }
    const double s_pos = cands.s_pos;

    switch (config.variant) {
        case Variant::trisampler: {
            const auto tw = transitional_weights(cands, config.gaussian_coef);
            const auto trans = sample_transitional(cands, tw, config.transitional_count(), rng);
            return sample_final(trans, final_weights(trans, config.gaussian_coef), n, rng);
        }
        case Variant::uniform:
            return sample_final(cands, detail::weights_over(cands, [](const auto&) { return 1.0; }), n, rng);
        case Variant::top_ns:
            return detail::sample_top_n(cands, n);
        case Variant::topk_weighted: {
            // shift by the max score; the normalized result is unchanged
            const double top = cands.candidates.front().s_neg;
            return sample_final(
                cands, detail::weights_over(cands, [top](const auto& c) { return std::exp(c.s_neg - top); }), n,
                rng);
        }
        case Variant::debiased:
            return sample_final(
                cands,
                detail::weights_over(cands, [s_pos](const auto& c) { return std::exp(-std::abs(c.s_neg - s_pos)); }),
                n, rng);
        case Variant::simans: {
            const double a = config.simans_a;
            const double b = config.simans_b;
            return sample_final(cands,
                                detail::weights_over(cands,
                                                     [=](const auto& c) {
                                                         const double d = c.s_neg - s_pos - b;
                                                         return std::exp(-a * d * d);
                                                     }),
                                n, rng);
        }
        case Variant::candidates_qd:
        case Variant::candidates_dd:
            return sample_final(cands, FinalWeights{transitional_weights(cands, config.gaussian_coef), false}, n,
                                rng);
        case Variant::rand_ns:
            break;
    }
    detail::contract_failure("sample: unknown variant");
}

/// One (query, positive) training pair in row space.
struct QueryPositive {
    RowId query = 0;
    RowId positive = 0;
};

/// Every (query, positive) pair of the qrels, in qrels order.
inline std::vector<QueryPositive>
training_pairs(const ResolvedQrels& qrels) {
    std::vector<QueryPositive> pairs;
    pairs.reserve(qrels.pair_count());
    for (const auto& e : qrels.entries) {
        for (auto p : e.positives) {
            pairs.push_back({e.query, p});
        }
    }
    return pairs;
}

/// Generator for one pair. Depends only on (seed, query id, positive id,
/// round), so results do not depend on thread scheduling.
inline Rng
pair_rng(std::uint64_t seed, const std::string& query_id, const std::string& positive_id, std::uint64_t round = 0) {
    return Rng(stream_seed(seed, {hash_string(query_id), hash_string(positive_id), round}));
}

/// Samples negatives for every pair, in parallel over pairs.
inline std::vector<NegativeSample>
sample_all(const SamplingContext& ctx, std::span<const QueryPositive> pairs, const SamplerConfig& config,
           std::uint64_t round = 0, unsigned threads = 1) {
    config.validate();
    std::vector<NegativeSample> out(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
        auto rng = pair_rng(config.seed, ctx.queries().id(pairs[i].query), ctx.corpus().id(pairs[i].positive), round);
        out[i] = sample(ctx, pairs[i].query, pairs[i].positive, config, rng);
    });
    return out;
}

/// One line of the negative-sample dump, in id space.
struct NegativeRecord {
    std::string query_id;
    std::string positive_id;
    std::vector<std::string> negative_ids;

    friend bool
    operator==(const NegativeRecord&, const NegativeRecord&) = default;
};

inline std::vector<NegativeRecord>
to_records(const SamplingContext& ctx, std::span<const NegativeSample> samples) {
    std::vector<NegativeRecord> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        NegativeRecord r{ctx.queries().id(s.query), ctx.corpus().id(s.positive), {}};
        for (const auto& c : s.negatives) {
            r.negative_ids.push_back(ctx.corpus().id(c.row));
        }
        out.push_back(std::move(r));
    }
    return out;
}

/// TSV: query_id, positive_id, then the negative ids.
inline void
write_negative_samples(std::span<const NegativeRecord> records, const std::string& path) {
    std::string out;
    for (const auto& r : records) {
        out += r.query_id;
        out += '\t';
        out += r.positive_id;
        for (const auto& n : r.negative_ids) {
            out += '\t';
            out += n;
        }
        out += '\n';
    }
    detail::write_file_bytes(path, out);
}

inline std::vector<NegativeRecord>
load_negative_samples(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    std::string_view text(bytes.data(), bytes.size());
    std::vector<NegativeRecord> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        const auto f = detail::split_fields(line);
        if (f.empty()) {
            continue;
        }
        if (f.size() < 2) {
            throw FormatError("'" + path + "' line " + std::to_string(line_no) + ": need query and positive ids");
        }
        NegativeRecord r{std::string(f[0]), std::string(f[1]), {}};
        for (std::size_t i = 2; i < f.size(); ++i) {
            r.negative_ids.emplace_back(f[i]);
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace trisampler
