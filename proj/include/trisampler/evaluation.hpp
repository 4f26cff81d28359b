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
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trisampler/core_data.hpp"
#include "trisampler/error.hpp"
#include "trisampler/parallel.hpp"
#include "trisampler/sampler.hpp"
#include "trisampler/synthetic.hpp"
#include "trisampler/trainer.hpp"
#include "trisampler/vector_index.hpp"

namespace trisampler {

struct MetricReport {
    std::string metric;  // "mrr@10", "recall@50", ...
    std::size_t k = 0;
    std::map<std::string, double> per_query;
    double mean = 0.0;

    std::size_t
    query_count() const {
        return per_query.size();
    }
};

namespace detail {

template <typename PerQuery>
MetricReport
evaluate_run(const RunFile& run, const Qrels& qrels, std::size_t k, const std::string& name, PerQuery&& per_query,
             std::vector<std::string>* warnings) {
    TRISAMPLER_EXPECT(k >= 1, name + ": k must be >= 1");
    MetricReport report{name + "@" + std::to_string(k), k, {}, 0.0};
    double total = 0.0;
    for (const auto& [q, ranking] : run.entries()) {
        if (!qrels.contains(q)) {
            if (warnings != nullptr) {
                warnings->push_back("query '" + q + "' in run has no qrels; excluded");
            }
            continue;
        }
        const double v = per_query(ranking, qrels.positives(q));
        report.per_query.emplace(q, v);
        total += v;
    }
    if (!report.per_query.empty()) {
        report.mean = total / static_cast<double>(report.per_query.size());
    }
    return report;
}

}  // namespace detail

/// Mean over run queries of 1/rank of the first relevant document within
/// the top k (0 when none).
inline MetricReport
mrr_at_k(const RunFile& run, const Qrels& qrels, std::size_t k, std::vector<std::string>* warnings = nullptr) {
    return detail::evaluate_run(
        run, qrels, k, "mrr",
        [k](const std::vector<RunEntry>& ranking, const std::set<std::string>& relevant) {
            for (const auto& e : ranking) {
                if (e.rank > k) {
                    break;
                }
                if (relevant.count(e.doc_id)) {
                    return 1.0 / static_cast<double>(e.rank);
                }
            }
            return 0.0;
        },
        warnings);
}

/// Mean over run queries of |relevant in top k| / |relevant|.
inline MetricReport
recall_at_k(const RunFile& run, const Qrels& qrels, std::size_t k, std::vector<std::string>* warnings = nullptr) {
    return detail::evaluate_run(
        run, qrels, k, "recall",
        [k](const std::vector<RunEntry>& ranking, const std::set<std::string>& relevant) {
            std::size_t hits = 0;
            for (const auto& e : ranking) {
                if (e.rank > k) {
                    break;
                }
                hits += relevant.count(e.doc_id);
            }
            return static_cast<double>(hits) / static_cast<double>(relevant.size());
        },
        warnings);
}

/// Top-k retrieval for the listed query rows. `queries` must already be in
/// the index's embedding space.
inline RunFile
retrieve(const Index& index, const EmbeddingMatrix& queries, std::span<const RowId> query_rows, std::size_t k,
         unsigned threads = 1) {
    std::vector<TopKResult> results(query_rows.size());
    parallel_for(query_rows.size(), threads,
                 [&](std::size_t i) { results[i] = index.top_k(queries.row(query_rows[i]), k); });
    RunFile run;
    for (std::size_t i = 0; i < query_rows.size(); ++i) {
        std::vector<std::pair<std::string, double>> scored;
        scored.reserve(results[i].size());
        for (const auto& h : results[i].hits) {
            scored.emplace_back(index.corpus().id(h.row), h.score);
        }
        run.set_ranking(queries.id(query_rows[i]), std::move(scored));
    }
    return run;
}

/// Query rows that appear in `qrels`, in qrels order.
inline std::vector<RowId>
judged_query_rows(const Qrels& qrels, const EmbeddingMatrix& queries) {
    std::vector<RowId> rows;
    for (const auto& [q, docs] : qrels.entries()) {
        auto r = queries.find(q);
        if (!r) {
            throw DataError("qrels query '" + q + "' not present in query embeddings");
        }
        rows.push_back(*r);
    }
    return rows;
}

/// Encodes both sides with `encoder`, retrieves exactly, and scores.
inline RunFile
encode_and_retrieve(const ToyEncoder& encoder, const EmbeddingMatrix& corpus, const EmbeddingMatrix& queries,
                    const Qrels& qrels, std::size_t k, unsigned threads = 1) {
    auto encoded = std::make_shared<const EmbeddingMatrix>(encoder.encode_all(corpus, Tower::document, threads));
    const auto encoded_queries = encoder.encode_all(queries, Tower::query, threads);
    const auto index = Index::build(std::move(encoded), IndexMode::exact);
    const auto rows = judged_query_rows(qrels, queries);
    return retrieve(index, encoded_queries, rows, k, threads);
}

/// Deterministic train/held-out split of the judged queries: an evenly
/// spaced `fraction` of them (in id order) is held out.
inline std::pair<Qrels, Qrels>
split_qrels(const Qrels& qrels, double fraction) {
    TRISAMPLER_EXPECT(fraction >= 0.0 && fraction < 1.0, "holdout fraction must lie in [0, 1)");
    if (fraction == 0.0) {
        return {qrels, qrels};
    }
    Qrels::Map train;
    Qrels::Map held;
    std::size_t i = 0;
    for (const auto& [q, docs] : qrels.entries()) {
        const bool hold = std::floor(static_cast<double>(i + 1) * fraction) > std::floor(static_cast<double>(i) * fraction);
        (hold ? held : train).emplace(q, docs);
        ++i;
    }
    return {Qrels(std::move(train)), Qrels(std::move(held))};
}

struct CompareOptions {
    double holdout_fraction = 0.25;
    std::size_t mrr_k = 10;
    std::size_t recall_k = 50;
    unsigned threads = 1;
};

struct ComparisonCell {
    std::string variant;
    std::uint64_t seed = 0;
    std::optional<double> mrr;
    std::optional<double> recall;
    std::string error;  // set when the run failed
};

struct ComparisonAggregate {
    std::string variant;
    std::size_t runs = 0;  // successful runs
    double mrr_mean = 0.0;
    double mrr_std = 0.0;
    double recall_mean = 0.0;
    double recall_std = 0.0;
};

struct ComparisonTable {
    std::size_t mrr_k = 10;
    std::size_t recall_k = 50;
    std::vector<ComparisonCell> cells;            // variant-major, seeds in order
    std::vector<ComparisonAggregate> aggregates;  // one per listed variant

    const ComparisonAggregate*
    aggregate(const std::string& variant) const {
        for (const auto& a : aggregates) {
            if (a.variant == variant) {
                return &a;
            }
        }
        return nullptr;
    }
};

namespace detail {

inline std::pair<double, double>
mean_and_stddev(const std::vector<double>& xs) {
    if (xs.empty()) {
        return {0.0, 0.0};
    }
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
    }
    const double mean = sum / static_cast<double>(xs.size());
    if (xs.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

inline std::string
fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

/// Trains one encoder per (sampler, seed) on the training split of the
/// generated dataset and scores it on the held-out split. A run that fails
/// numerically is reported as a failed cell; the rest still run.
inline ComparisonTable
compare_samplers(const SyntheticSpec& spec, const std::vector<SamplerConfig>& samplers, const TrainerConfig& trainer,
                 const std::vector<std::uint64_t>& seeds, const CompareOptions& options = {}) {
    TRISAMPLER_EXPECT(!samplers.empty(), "compare_samplers: no sampler variants");
    TRISAMPLER_EXPECT(!seeds.empty(), "compare_samplers: no seeds");
    const auto data = generate_synthetic(spec);
    const auto [train_qrels, eval_qrels] = split_qrels(data.qrels, options.holdout_fraction);

    ComparisonTable table;
    table.mrr_k = options.mrr_k;
    table.recall_k = options.recall_k;
    table.cells.resize(samplers.size() * seeds.size());
    parallel_for(table.cells.size(), options.threads, [&](std::size_t i) {
        const auto& sampler = samplers[i / seeds.size()];
        const auto seed = seeds[i % seeds.size()];
        auto& cell = table.cells[i];
        cell.variant = to_string(sampler.variant);
        cell.seed = seed;
        TrainerConfig cfg = trainer;
        cfg.seed = stream_seed(seed, "trainer");
        cfg.sampler = sampler;
        cfg.sampler.seed = stream_seed(seed, "sampler");
        cfg.threads = 1;
        try {
            const auto trained = train(data.corpus, data.queries, train_qrels, cfg);
            const auto run = encode_and_retrieve(trained.encoder, data.corpus, data.queries, eval_qrels,
                                                 std::max(options.mrr_k, options.recall_k));
            cell.mrr = mrr_at_k(run, eval_qrels, options.mrr_k).mean;
            cell.recall = recall_at_k(run, eval_qrels, options.recall_k).mean;
        } catch (const NumericError& e) {
            cell.error = e.what();
        }
    });

    for (std::size_t v = 0; v < samplers.size(); ++v) {
        std::vector<double> mrrs;
        std::vector<double> recalls;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto& cell = table.cells[v * seeds.size() + s];
            if (cell.mrr) {
                mrrs.push_back(*cell.mrr);
                recalls.push_back(*cell.recall);
            }
        }
        ComparisonAggregate agg;
        agg.variant = to_string(samplers[v].variant);
        agg.runs = mrrs.size();
        std::tie(agg.mrr_mean, agg.mrr_std) = detail::mean_and_stddev(mrrs);
        std::tie(agg.recall_mean, agg.recall_std) = detail::mean_and_stddev(recalls);
        table.aggregates.push_back(agg);
    }
    return table;
}

/// Per-run rows, a blank line, then one aggregate row per variant. With more
/// than one variant the aggregate block gains a delta column against the
/// first listed variant.
inline std::string
format_comparison_csv(const ComparisonTable& t) {
    const auto mrr = "mrr@" + std::to_string(t.mrr_k);
    const auto rec = "recall@" + std::to_string(t.recall_k);
    std::string out = "variant,seed," + mrr + "," + rec + "\n";
    for (const auto& c : t.cells) {
        out += c.variant + "," + std::to_string(c.seed) + ",";
        if (c.mrr) {
            out += detail::fixed6(*c.mrr) + "," + detail::fixed6(*c.recall) + "\n";
        } else {
            out += "failed,failed\n";
        }
    }
    out += "\nvariant,runs,mean_" + mrr + ",std_" + mrr + ",mean_" + rec + ",std_" + rec;
    const bool compare = t.aggregates.size() > 1;
    if (compare) {
        out += ",delta_" + mrr;
    }
    out += "\n";
    for (const auto& a : t.aggregates) {
        out += a.variant + "," + std::to_string(a.runs) + "," + detail::fixed6(a.mrr_mean) + "," +
               detail::fixed6(a.mrr_std) + "," + detail::fixed6(a.recall_mean) + "," + detail::fixed6(a.recall_std);
        if (compare) {
            out += "," + detail::fixed6(a.mrr_mean - t.aggregates.front().mrr_mean);
        }
        out += "\n";
    }
    return out;
}

inline std::string
format_comparison_table(const ComparisonTable& t) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-16s %5s %22s %22s\n", "variant", "runs",
                  ("mrr@" + std::to_string(t.mrr_k) + " (mean +- sd)").c_str(),
                  ("recall@" + std::to_string(t.recall_k) + " (mean +- sd)").c_str());
    out += line;
    for (const auto& a : t.aggregates) {
        std::snprintf(line, sizeof(line), "%-16s %5zu %13.4f +- %.4f %13.4f +- %.4f\n", a.variant.c_str(), a.runs,
                      a.mrr_mean, a.mrr_std, a.recall_mean, a.recall_std);
        out += line;
    }
    for (const auto& c : t.cells) {
        if (!c.error.empty()) {
            out += "failed: " + c.variant + " seed " + std::to_string(c.seed) + ": " + c.error + "\n";
        }
    }
    return out;
}

}  // namespace trisampler
