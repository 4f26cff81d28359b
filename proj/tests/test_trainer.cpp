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

#include <cmath>

#include "test_support.hpp"

namespace ts = trisampler;

TEST(Loss, Examples) {
    const std::vector<double> one{0.0};
    EXPECT_NEAR(ts::contrastive_loss(0.0, one), std::log(2.0), 1e-15);
    EXPECT_NEAR(ts::contrastive_loss(0.0, std::vector<double>{0, 0, 0}), std::log(4.0), 1e-15);
    double prev = INFINITY;
    for (double s = -5.0; s <= 40.0; s += 0.5) {
        const double l = ts::contrastive_loss(s, one);
        EXPECT_LE(l, prev);
        EXPECT_GE(l, 0.0);
        prev = l;
    }
    EXPECT_LT(prev, 1e-15);
    // log-sum-exp keeps huge scores finite
    EXPECT_TRUE(std::isfinite(ts::contrastive_loss(1e4, std::vector<double>{-1e4, 2e4})));
    EXPECT_THROW(ts::contrastive_loss(0.0, std::vector<double>{}), ts::ContractError);
}

TEST(Loss, GradientExamples) {
    const auto g = ts::loss_gradients(1.5, std::vector<double>{1.5});
    EXPECT_NEAR(g.positive, -0.5, 1e-15);
    EXPECT_NEAR(g.negatives[0], 0.5, 1e-15);
}

TEST(LossProperty, SoftmaxIdentities) {
    for (const auto& in : ts::testing::loss_inputs(1000, 1)) {
        const auto g = ts::loss_gradients(in.s_pos, in.s_negs);
        double sum = g.positive;
        for (double x : g.negatives) {
            sum += x;
            EXPECT_GT(x, 0.0);
        }
        EXPECT_LE(std::abs(sum), 1e-12);
        for (std::size_t j = 0; j + 1 < g.negatives.size(); ++j) {
            const double ratio = g.negatives[j] / g.negatives[j + 1];
            const double expect = std::exp(in.s_negs[j] - in.s_negs[j + 1]);
            EXPECT_LE(std::abs(ratio - expect) / expect, 1e-9);
        }
    }
}

TEST(LossProperty, FiniteDifferenceOracle) {
    double worst = 0.0;
    for (const auto& in : ts::testing::loss_inputs(1000, 2)) {
        worst = std::max(worst, ts::testing::loss_gradient_fd_error(in));
    }
    RecordProperty("worst_relative_error", std::to_string(worst));
    EXPECT_LT(worst, 1e-6);
}

// Chain rule through both towers against central differences of the batch loss.
TEST(BatchLossProperty, EncoderGradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto corpus = ts::testing::random_matrix(12, 5, seed, false, "d");
        const auto queries = ts::testing::random_matrix(4, 5, seed + 100, false, "q");
        auto enc = ts::ToyEncoder::initialize(5, 3, seed);
        std::vector<ts::TrainingTriple> batch{{0, 1, {2, 3, 4}}, {1, 5, {6}}, {3, 7, {8, 9, 10, 11}}, {2, 0, {}}};
        const auto bl = ts::batch_loss(enc, corpus, queries, batch, true);
        EXPECT_EQ(bl.triples, 3u);
        const double h = 1e-5;
        for (auto* which : {&enc.query_proj, &enc.doc_proj}) {
            const auto& analytic = which == &enc.query_proj ? bl.gradient.query_proj : bl.gradient.doc_proj;
            double diff = 0.0, ref = 0.0;
            for (std::size_t i = 0; i < which->size(); ++i) {
                const double keep = (*which)[i];
                (*which)[i] = keep + h;
                const double up = ts::batch_loss(enc, corpus, queries, batch, false).loss;
                (*which)[i] = keep - h;
                const double down = ts::batch_loss(enc, corpus, queries, batch, false).loss;
                (*which)[i] = keep;
                const double fd = (up - down) / (2 * h);
                diff += (analytic[i] - fd) * (analytic[i] - fd);
                ref += fd * fd;
            }
            EXPECT_LT(std::sqrt(diff / ref), 1e-6);
        }
    }
}

TEST(Encoder, IdentityAndJsonRoundTrip) {
    const auto id = ts::ToyEncoder::identity(3);
    const std::vector<float> x{1.5f, -2.0f, 0.25f};
    const auto h = id.encode<float>(x, ts::Tower::query);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(h[i], x[i]);
    }
    const auto enc = ts::ToyEncoder::initialize(4, 2, 9);
    EXPECT_EQ(ts::encoder_from_json(ts::to_json(enc)), enc);
    EXPECT_EQ(ts::encoder_from_json(nlohmann::json::parse(ts::to_json(enc).dump())), enc);
    auto broken = ts::to_json(enc);
    broken["dim_out"] = 5;
    EXPECT_THROW(ts::encoder_from_json(broken), ts::FormatError);
    EXPECT_THROW(ts::encoder_from_json(nlohmann::json::object()), ts::FormatError);
}

TEST(Trainer, RefreshCadenceDefault) {
    EXPECT_EQ(ts::kReferenceRefreshSteps, 2000u);
    EXPECT_EQ(ts::TrainerConfig{}.refresh_every, 200u);
    EXPECT_EQ(ts::kDeskRefreshSteps * ts::kDeskRefreshScale, ts::kReferenceRefreshSteps);
}

TEST(Trainer, ZeroStepsKeepsInitialization) {
    const auto data = ts::testing::small_dataset(1);
    ts::TrainerConfig cfg;
    cfg.steps = 0;
    cfg.seed = 5;
    cfg.wall_clock = false;
    const auto r = ts::train(data.corpus, data.queries, data.qrels, cfg);
    auto init = ts::ToyEncoder::initialize(data.corpus.dim(), data.corpus.dim(), 5);
    init.doc_proj = init.query_proj;
    EXPECT_EQ(r.encoder, init);
    ASSERT_EQ(r.log.size(), 1u);
    EXPECT_EQ(r.log[0].step, 0u);
    EXPECT_EQ(r.log[0].epoch, 0u);

    cfg.shared_init = false;
    EXPECT_EQ(ts::train(data.corpus, data.queries, data.qrels, cfg).encoder,
              ts::ToyEncoder::initialize(data.corpus.dim(), data.corpus.dim(), 5));
}

TEST(Trainer, DescendsOnSeparableClusters) {
    // Two well separated clusters; each query's positive is its cluster-mate.
    ts::SyntheticSpec spec;
    spec.clusters = 2;
    spec.docs = 200;
    spec.queries = 40;
    spec.dim = 8;
    spec.seed = 3;
    const auto data = ts::generate_synthetic(spec);
    ts::TrainerConfig cfg;
    cfg.steps = 500;
    cfg.wall_clock = false;
    cfg.sampler.pool_size = 50;
    const auto r = ts::train(data.corpus, data.queries, data.qrels, cfg);
    EXPECT_LT(r.log.back().loss, r.log.front().loss);
}

TEST(Trainer, DeterministicLogsAndEpochs) {
    const auto data = ts::testing::small_dataset(2);
    ts::TrainerConfig cfg;
    cfg.steps = 450;
    cfg.wall_clock = false;
    cfg.seed = 17;
    cfg.sampler.seed = 18;
    const auto a = ts::train(data.corpus, data.queries, data.qrels, cfg);
    cfg.threads = 4;
    const auto b = ts::train(data.corpus, data.queries, data.qrels, cfg);
    EXPECT_EQ(ts::format_training_log(a.log), ts::format_training_log(b.log));
    EXPECT_EQ(a.encoder, b.encoder);
    EXPECT_EQ(a.refreshes, 2u);
    EXPECT_EQ(a.final_epoch, 2u);
    // records at 0 and every 50 steps; 450 is also the final step
    EXPECT_EQ(a.log.size(), 1u + 9u);
    EXPECT_EQ(a.log.back().step, 450u);
    EXPECT_EQ(a.log.back().epoch, 2u);
    for (const auto& rec : a.log) {
        EXPECT_GE(rec.in_region_fraction, 0.0);
        EXPECT_LE(rec.in_region_fraction, 1.0);
    }
}

TEST(Trainer, DivergenceIsNumericError) {
    const auto data = ts::testing::small_dataset(4);
    ts::TrainerConfig cfg;
    cfg.steps = 100;
    cfg.learning_rate = 1e6;
    EXPECT_THROW(ts::train(data.corpus, data.queries, data.qrels, cfg), ts::NumericError);
}

TEST(Trainer, InvalidConfig) {
    const auto data = ts::testing::small_dataset(4);
    ts::TrainerConfig cfg;
    cfg.refresh_every = 0;
    EXPECT_THROW(ts::train(data.corpus, data.queries, data.qrels, cfg), ts::ContractError);
    cfg = {};
    cfg.learning_rate = -1;
    EXPECT_THROW(ts::train(data.corpus, data.queries, data.qrels, cfg), ts::ContractError);
}

TEST(Synthetic, SingleClusterIsTight) {
    ts::SyntheticSpec spec;
    spec.clusters = 1;
    spec.docs = 10;
    spec.queries = 2;
    const auto data = ts::generate_synthetic(spec);
    for (ts::RowId a = 0; a < data.corpus.count(); ++a) {
        for (ts::RowId b = a + 1; b < data.corpus.count(); ++b) {
            EXPECT_GT(ts::dot_score(data.corpus.row(a), data.corpus.row(b)), 0.0);
        }
    }
}

TEST(Synthetic, DeterministicBytes) {
    ts::testing::TempDir dir;
    ts::SyntheticSpec spec;
    spec.docs = 500;
    spec.queries = 30;
    for (const char* sub : {"a", "b"}) {
        const auto data = ts::generate_synthetic(spec);
        ts::write_embeddings(data.corpus, dir.file(std::string(sub) + ".emb"));
        ts::write_qrels(data.qrels, dir.file(std::string(sub) + ".tsv"));
    }
    EXPECT_EQ(ts::testing::slurp(dir.file("a.emb")), ts::testing::slurp(dir.file("b.emb")));
    EXPECT_EQ(ts::testing::slurp(dir.file("a.tsv")), ts::testing::slurp(dir.file("b.tsv")));
    spec.seed = 43;
    EXPECT_NE(ts::generate_synthetic(spec).corpus, ts::generate_synthetic(ts::SyntheticSpec{}).corpus);
}

TEST(Synthetic, IdentityEncoderRetrievesPositives) {
    const auto data = ts::generate_synthetic(ts::SyntheticSpec{});
    EXPECT_EQ(data.corpus.count(), 5000u);
    EXPECT_EQ(data.queries.count(), 200u);
    EXPECT_EQ(data.qrels.size(), 200u);
    const auto run = ts::encode_and_retrieve(ts::ToyEncoder::identity(64), data.corpus, data.queries, data.qrels, 10);
    EXPECT_GT(ts::mrr_at_k(run, data.qrels, 10).mean, 0.9);
}

TEST(Synthetic, SpecJson) {
    ts::SyntheticSpec spec;
    spec.docs = 900;
    spec.trap_rate = 0.25;
    EXPECT_EQ(ts::synthetic_spec_from_json(ts::to_json(spec)), spec);
    EXPECT_THROW(ts::synthetic_spec_from_json(nlohmann::json{{"clusterz", 3}}), ts::ConfigError);
    EXPECT_THROW(ts::synthetic_spec_from_json(nlohmann::json{{"docs", 10}}), ts::ConfigError);
    EXPECT_THROW(ts::synthetic_spec_from_json(nlohmann::json{{"docs", "many"}}), ts::ConfigError);
}
