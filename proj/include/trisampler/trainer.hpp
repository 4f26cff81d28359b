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

// Desk-scale dual-encoder training with dynamic negatives.
//
// Each tower is one linear projection, h = x W, and the relevance score is
// the inner product of the two projections. The loss for a triple is the
// softmax cross-entropy of the positive against its n sampled negatives;
// its gradient with respect to each score is chain-ruled by hand into both
// projection matrices. Every `refresh_every` steps the corpus is re-encoded,
// a new index epoch is built, and all negatives are resampled. Between
// refreshes the cached scores used for sampling go stale; the loss itself
// always uses fresh encodings.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "trisampler/core_data.hpp"
#include "trisampler/error.hpp"
#include "trisampler/parallel.hpp"
#include "trisampler/random.hpp"
#include "trisampler/sampler.hpp"
#include "trisampler/vector_index.hpp"

namespace trisampler {

/// -log(exp(s_pos) / (exp(s_pos) + sum_i exp(s_neg_i))), via log-sum-exp.
inline double
contrastive_loss(double s_pos, std::span<const double> s_negs) {
    TRISAMPLER_EXPECT(!s_negs.empty(), "contrastive_loss: no negatives");
    double top = s_pos;
    for (double s : s_negs) {
        top = std::max(top, s);
    }
    double total = std::exp(s_pos - top);
    for (double s : s_negs) {
        total += std::exp(s - top);
    }
    return top + std::log(total) - s_pos;
}

struct LossGradients {
    double positive = 0.0;          // dL/ds_pos
    std::vector<double> negatives;  // dL/ds_neg_j
};

/// dL/ds_pos = -sum_i softmax_i over negatives, dL/ds_neg_j = softmax_j.
/// positive is formed as the negated sum of the negative terms, so the two
/// cancel exactly.
inline LossGradients
loss_gradients(double s_pos, std::span<const double> s_negs) {
    TRISAMPLER_EXPECT(!s_negs.empty(), "loss_gradients: no negatives");
    double top = s_pos;
    for (double s : s_negs) {
        top = std::max(top, s);
    }
    double denom = std::exp(s_pos - top);
    for (double s : s_negs) {
        denom += std::exp(s - top);
    }
    LossGradients g;
    g.negatives.reserve(s_negs.size());
    double sum = 0.0;
    for (double s : s_negs) {
        g.negatives.push_back(std::exp(s - top) / denom);
        sum += g.negatives.back();
    }
    g.positive = -sum;
    return g;
}

enum class Tower { query, document };

/// Two linear towers. Projections are dim_in x dim_out, row-major.
struct ToyEncoder {
    std::size_t dim_in = 0;
    std::size_t dim_out = 0;
    std::vector<double> query_proj;
    std::vector<double> doc_proj;

    /// Independent N(0, 1/dim_in) entries per tower.
    static ToyEncoder
    initialize(std::size_t dim_in, std::size_t dim_out, std::uint64_t seed) {
        TRISAMPLER_EXPECT(dim_in > 0 && dim_out > 0, "encoder dims must be positive");
        ToyEncoder e{dim_in, dim_out, std::vector<double>(dim_in * dim_out), std::vector<double>(dim_in * dim_out)};
        Rng rng(stream_seed(seed, "encoder"));
        const double scale = 1.0 / std::sqrt(static_cast<double>(dim_in));
        for (double& w : e.query_proj) {
            w = scale * standard_normal(rng);
        }
        for (double& w : e.doc_proj) {
            w = scale * standard_normal(rng);
        }
        return e;
    }

    /// Both towers the identity: scores equal raw inner products.
    static ToyEncoder
    identity(std::size_t dim) {
        ToyEncoder e{dim, dim, std::vector<double>(dim * dim, 0.0), {}};
        for (std::size_t i = 0; i < dim; ++i) {
            e.query_proj[i * dim + i] = 1.0;
        }
        e.doc_proj = e.query_proj;
        return e;
    }

    const std::vector<double>&
    projection(Tower t) const {
        return t == Tower::query ? query_proj : doc_proj;
    }

    template <typename T>
    std::vector<double>
    encode(std::span<const T> x, Tower tower) const {
        TRISAMPLER_EXPECT(x.size() == dim_in, "encode: input dim mismatch");
        const auto& w = projection(tower);
        std::vector<double> h(dim_out, 0.0);
        for (std::size_t i = 0; i < dim_in; ++i) {
            const double xi = x[i];
            const double* row = w.data() + i * dim_out;
            for (std::size_t j = 0; j < dim_out; ++j) {
                h[j] += xi * row[j];
            }
        }
        return h;
    }

    EmbeddingMatrix
    encode_all(const EmbeddingMatrix& raw, Tower tower, unsigned threads = 1) const {
        std::vector<float> data(raw.count() * dim_out);
        parallel_for(raw.count(), threads, [&](std::size_t r) {
            const auto h = encode(raw.row(static_cast<RowId>(r)), tower);
            for (std::size_t j = 0; j < dim_out; ++j) {
                data[r * dim_out + j] = static_cast<float>(h[j]);
            }
        });
        return EmbeddingMatrix(raw.ids(), dim_out, std::move(data));
    }

    bool
    finite() const {
        auto ok = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
        };
        return ok(query_proj) && ok(doc_proj);
    }

    friend bool
    operator==(const ToyEncoder&, const ToyEncoder&) = default;
};

inline nlohmann::json
to_json(const ToyEncoder& e) {
    return {{"dim_in", e.dim_in}, {"dim_out", e.dim_out}, {"query_proj", e.query_proj}, {"doc_proj", e.doc_proj}};
}

inline ToyEncoder
encoder_from_json(const nlohmann::json& j) {
    ToyEncoder e;
    try {
        e.dim_in = j.at("dim_in").get<std::size_t>();
        e.dim_out = j.at("dim_out").get<std::size_t>();
        e.query_proj = j.at("query_proj").get<std::vector<double>>();
        e.doc_proj = j.at("doc_proj").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("encoder json: ") + ex.what());
    }
    if (e.query_proj.size() != e.dim_in * e.dim_out || e.doc_proj.size() != e.dim_in * e.dim_out) {
        throw FormatError("encoder json: projection size does not match dims");
    }
    return e;
}

/// (q, d+, {d-}) in row space of the raw query / corpus matrices.
struct TrainingTriple {
    RowId query = 0;
    RowId positive = 0;
    std::vector<RowId> negatives;

    friend bool
    operator==(const TrainingTriple&, const TrainingTriple&) = default;
};

struct EncoderGradient {
    std::vector<double> query_proj;
    std::vector<double> doc_proj;
};

struct BatchLoss {
    double loss = 0.0;  // mean over triples that have negatives
    std::size_t triples = 0;
    EncoderGradient gradient;  // of the mean loss
};

/// Mean contrastive loss over `batch` and, if requested, its gradient with
/// respect to both projections. Triples without negatives are skipped.
inline BatchLoss
batch_loss(const ToyEncoder& enc, const EmbeddingMatrix& corpus, const EmbeddingMatrix& queries,
           std::span<const TrainingTriple> batch, bool with_gradient = true) {
    const std::size_t din = enc.dim_in;
    const std::size_t dout = enc.dim_out;
    BatchLoss out;
    if (with_gradient) {
        out.gradient.query_proj.assign(din * dout, 0.0);
        out.gradient.doc_proj.assign(din * dout, 0.0);
    }
    std::vector<double> s_negs;
    std::vector<std::vector<double>> neg_h;
    std::vector<double> pull(dout);
    for (const auto& t : batch) {
        if (t.negatives.empty()) {
            continue;
        }
        const auto xq = queries.row(t.query);
        const auto hq = enc.encode(xq, Tower::query);
        const auto xp = corpus.row(t.positive);
        const auto hp = enc.encode(xp, Tower::document);
        const double s_pos = dot_score(hq, hp);
        s_negs.clear();
        neg_h.clear();
        for (auto r : t.negatives) {
            neg_h.push_back(enc.encode(corpus.row(r), Tower::document));
            s_negs.push_back(dot_score(hq, neg_h.back()));
        }
        out.loss += contrastive_loss(s_pos, s_negs);
        ++out.triples;
        if (!with_gradient) {
            continue;
        }
        const auto g = loss_gradients(s_pos, s_negs);
        // dL/dh_q = g+ h_d+ + sum_j g_j h_dj; dL/dh_d = g_d h_q.
        for (std::size_t j = 0; j < dout; ++j) {
            pull[j] = g.positive * hp[j];
        }
        for (std::size_t k = 0; k < neg_h.size(); ++k) {
            for (std::size_t j = 0; j < dout; ++j) {
                pull[j] += g.negatives[k] * neg_h[k][j];
            }
        }
        auto add_outer = [dout](std::vector<double>& m, std::span<const float> x, const std::vector<double>& v,
                                double scale) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double xi = scale * x[i];
                double* row = m.data() + i * dout;
                for (std::size_t j = 0; j < dout; ++j) {
                    row[j] += xi * v[j];
                }
            }
        };
        add_outer(out.gradient.query_proj, xq, pull, 1.0);
        add_outer(out.gradient.doc_proj, xp, hq, g.positive);
        for (std::size_t k = 0; k < t.negatives.size(); ++k) {
            add_outer(out.gradient.doc_proj, corpus.row(t.negatives[k]), hq, g.negatives[k]);
        }
    }
    if (out.triples > 0) {
        const double inv = 1.0 / static_cast<double>(out.triples);
        out.loss *= inv;
        for (double& v : out.gradient.query_proj) {
            v *= inv;
        }
        for (double& v : out.gradient.doc_proj) {
            v *= inv;
        }
    }
    return out;
}

/// The source system rebuilds training instances every 2000 steps; the desk
/// default scales that by the corpus size ratio to 200.
inline constexpr std::size_t kReferenceRefreshSteps = 2000;
inline constexpr std::size_t kDeskRefreshScale = 10;
inline constexpr std::size_t kDeskRefreshSteps = kReferenceRefreshSteps / kDeskRefreshScale;

struct TrainerConfig {
    double learning_rate = 0.01;
    std::size_t steps = 1000;
    std::size_t refresh_every = kDeskRefreshSteps;
    std::size_t batch_size = 32;
    std::size_t dim_out = 0;  // 0: same as input dim
    std::size_t log_every = 50;
    SamplerConfig sampler;
    IndexMode index_mode = IndexMode::exact;
    ApproximateParams index_params;
    std::uint64_t seed = 0;
    bool shared_init = true;
    /// When false, wall_ms is logged as 0 so logs are byte-reproducible.
    bool wall_clock = true;
    unsigned threads = 1;

    void
    validate() const {
        TRISAMPLER_EXPECT(refresh_every >= 1, "trainer: refresh_every must be >= 1");
        TRISAMPLER_EXPECT(batch_size >= 1, "trainer: batch_size must be >= 1");
        TRISAMPLER_EXPECT(log_every >= 1, "trainer: log_every must be >= 1");
        TRISAMPLER_EXPECT(learning_rate > 0.0 && std::isfinite(learning_rate), "trainer: learning_rate must be > 0");
        sampler.validate();
    }
};

struct TrainingRecord {
    std::size_t step = 0;
    double loss = 0.0;
    std::uint64_t epoch = 0;
    double in_region_fraction = 0.0;
    double wall_ms = 0.0;

    friend bool
    operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

inline nlohmann::json
to_json(const TrainingRecord& r) {
    return {{"step", r.step},
            {"loss", r.loss},
            {"epoch", r.epoch},
            {"in_region_fraction", r.in_region_fraction},
            {"wall_ms", r.wall_ms}};
}

/// JSON-lines, one record per line.
inline std::string
format_training_log(std::span<const TrainingRecord> log) {
    std::string out;
    for (const auto& r : log) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

struct SamplingStats {
    std::size_t negatives = 0;
    std::size_t in_region = 0;
    std::size_t fallbacks = 0;
    std::size_t samples = 0;

    double
    in_region_fraction() const {
        return negatives == 0 ? 0.0 : static_cast<double>(in_region) / static_cast<double>(negatives);
    }
};

struct TrainResult {
    ToyEncoder encoder;
    std::vector<TrainingRecord> log;
    std::uint64_t final_epoch = 0;
    std::size_t refreshes = 0;  // rebuilds after the initial one
    SamplingStats last_sampling;
};

/// Trains a fresh encoder on the (query, positive) pairs of `qrels`.
/// `corpus` and `queries` hold raw input features. Throws NumericError if
/// the loss or the parameters stop being finite.
inline TrainResult
train(const EmbeddingMatrix& corpus, const EmbeddingMatrix& queries, const Qrels& qrels,
      const TrainerConfig& config) {
    config.validate();
    TRISAMPLER_EXPECT(!corpus.empty(), "train: empty corpus");
    TRISAMPLER_EXPECT(corpus.dim() == queries.dim(), "train: query and corpus dims differ");
    const auto resolved = resolve_qrels(qrels, queries, corpus);
    const auto pairs = training_pairs(resolved);
    TRISAMPLER_EXPECT(!pairs.empty(), "train: no (query, positive) pairs");

    const auto clock_start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        if (!config.wall_clock) {
            return 0.0;
        }
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - clock_start).count();
    };

    TrainResult result;
    auto& enc = result.encoder;
    enc = ToyEncoder::initialize(corpus.dim(), config.dim_out == 0 ? corpus.dim() : config.dim_out, config.seed);
    if (config.shared_init) {
        enc.doc_proj = enc.query_proj;
    }

    std::vector<TrainingTriple> triples(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        triples[i].query = pairs[i].query;
        triples[i].positive = pairs[i].positive;
    }

    std::unique_ptr<Index> index;
    auto refresh = [&] {
        auto encoded_corpus = std::make_shared<const EmbeddingMatrix>(enc.encode_all(corpus, Tower::document, config.threads));
        const auto encoded_queries = enc.encode_all(queries, Tower::query, config.threads);
        auto next = std::make_unique<Index>(
            Index::build(std::move(encoded_corpus), config.index_mode, config.index_params, index.get()));
        index = std::move(next);
        const SamplingContext ctx(*index, encoded_queries, resolved);
        const auto samples = sample_all(ctx, pairs, config.sampler, index->epoch(), config.threads);
        SamplingStats stats;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            triples[i].negatives.clear();
            for (const auto& c : samples[i].negatives) {
                triples[i].negatives.push_back(c.row);
            }
            stats.negatives += samples[i].negatives.size();
            stats.in_region += samples[i].in_region_count();
            stats.fallbacks += samples[i].fallback ? 1 : 0;
            ++stats.samples;
        }
        result.last_sampling = stats;
    };

    auto record = [&](std::size_t step) {
        const double loss = batch_loss(enc, corpus, queries, triples, false).loss;
        if (!std::isfinite(loss)) {
            throw NumericError("training diverged: non-finite loss at step " + std::to_string(step));
        }
        result.log.push_back(
            {step, loss, index->epoch(), result.last_sampling.in_region_fraction(), elapsed_ms()});
    };

    refresh();
    record(0);

    Rng order_rng(stream_seed(config.seed, "batches"));
    std::vector<std::size_t> order(triples.size());
    std::size_t cursor = order.size();
    std::vector<TrainingTriple> batch;
    for (std::size_t step = 1; step <= config.steps; ++step) {
        batch.clear();
        while (batch.size() < std::min(config.batch_size, triples.size())) {
            if (cursor == order.size()) {
                for (std::size_t i = 0; i < order.size(); ++i) {
                    order[i] = i;
                }
                for (std::size_t i = order.size(); i > 1; --i) {
                    std::swap(order[i - 1], order[uniform_index(order_rng, i)]);
                }
                cursor = 0;
            }
            batch.push_back(triples[order[cursor++]]);
        }
        const auto bl = batch_loss(enc, corpus, queries, batch, true);
        if (!std::isfinite(bl.loss)) {
            throw NumericError("training diverged: non-finite loss at step " + std::to_string(step));
        }
        for (std::size_t i = 0; i < enc.query_proj.size(); ++i) {
            enc.query_proj[i] -= config.learning_rate * bl.gradient.query_proj[i];
            enc.doc_proj[i] -= config.learning_rate * bl.gradient.doc_proj[i];
        }
        if (!enc.finite()) {
            throw NumericError("training diverged: non-finite parameters at step " + std::to_string(step));
        }
        if (step % config.log_every == 0 || step == config.steps) {
            record(step);
        }
        if (step % config.refresh_every == 0) {
            refresh();
            ++result.refreshes;
        }
    }
    result.final_epoch = index->epoch();
    return result;
}

}  // namespace trisampler
