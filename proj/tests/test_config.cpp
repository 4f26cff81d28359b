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

#include "test_support.hpp"
#include "trisampler/config.hpp"

namespace ts = trisampler;
using nlohmann::json;

TEST(Config, EmptyDocumentGivesModuleDefaults) {
    const auto c = ts::parse_cli_config(json::object());
    EXPECT_EQ(c.sampler.negatives, 15u);
    EXPECT_EQ(c.sampler.candidate_pool(), 200u);
    EXPECT_EQ(c.trainer.refresh_every, 200u);
    EXPECT_EQ(c.trainer.steps, 1000u);
    EXPECT_FALSE(c.trainer.wall_clock);
    EXPECT_EQ(c.eval.mrr_k, 10u);
    EXPECT_EQ(c.eval.recall_k, 50u);
    EXPECT_EQ(c.eval.variants.size(), 4u);
    EXPECT_EQ(c.data.spec, ts::SyntheticSpec{});
    EXPECT_EQ(c.compare_seeds(), (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
}

TEST(Config, ParsesEverySection) {
    const auto c = ts::parse_cli_config(json::parse(R"({
        "seed": 9, "threads": 2, "output_dir": "o",
        "data": {"dir": "d", "run": "r.trec", "spec": {"docs": 800, "queries": 20}},
        "index": {"mode": "approximate", "lists": 10, "probes": 3, "k": 7},
        "sampler": {"variant": "simans", "profile": "document", "negatives": 4, "simans_a": 2.0},
        "trainer": {"learning_rate": 0.2, "steps": 3, "batch_size": 4, "shared_init": false},
        "eval": {"mrr_k": 5, "variants": ["top_ns", "rand_ns"], "seeds": [4, 2]}
    })"));
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.data.spec.docs, 800u);
    EXPECT_EQ(c.data.path_of("", "corpus.emb"), "d/corpus.emb");
    EXPECT_EQ(c.index.mode, ts::IndexMode::approximate);
    EXPECT_EQ(c.index.params.probes, 3u);
    EXPECT_EQ(c.sampler.variant, ts::Variant::simans);
    EXPECT_EQ(c.sampler.candidate_pool(), 400u);
    EXPECT_FALSE(c.trainer.shared_init);
    EXPECT_EQ(c.eval.variants, (std::vector<ts::Variant>{ts::Variant::top_ns, ts::Variant::rand_ns}));
    EXPECT_EQ(c.compare_seeds(), (std::vector<std::uint64_t>{4, 2}));
    const auto t = c.resolved_trainer();
    EXPECT_EQ(t.index_mode, ts::IndexMode::approximate);
    EXPECT_EQ(t.sampler.variant, ts::Variant::simans);
    EXPECT_NE(t.seed, t.sampler.seed);
}

TEST(Config, UnknownKeysNameTheirPath) {
    auto message = [](const char* text) {
        try {
            ts::parse_cli_config(json::parse(text));
        } catch (const ts::ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message(R"({"sampler": {"k": 3}})").find("sampler.k"), std::string::npos);
    EXPECT_NE(message(R"({"colour": 1})").find("colour"), std::string::npos);
    EXPECT_NE(message(R"({"data": {"spec": {"dims": 3}}})").find("data.spec.dims"), std::string::npos);
    EXPECT_NE(message(R"({"sampler": {"variant": "best"}})").find("sampler.variant"), std::string::npos);
    EXPECT_NE(message(R"({"trainer": {"steps": "many"}})").find("trainer.steps"), std::string::npos);
    EXPECT_NE(message(R"({"sampler": {"negatives": 500}})"), "no error");
    EXPECT_NE(message(R"([1, 2])"), "no error");
}

TEST(Config, Overrides) {
    json j = json::object();
    ts::apply_override(j, "trainer.steps=5");
    ts::apply_override(j, "sampler.variant=uniform");
    ts::apply_override(j, "eval.seeds=[1,2]");
    ts::apply_override(j, "data.spec.trap_rate=0.1");
    const auto c = ts::parse_cli_config(j);
    EXPECT_EQ(c.trainer.steps, 5u);
    EXPECT_EQ(c.sampler.variant, ts::Variant::uniform);
    EXPECT_EQ(c.eval.seeds, (std::vector<std::uint64_t>{1, 2}));
    EXPECT_DOUBLE_EQ(c.data.spec.trap_rate, 0.1);

    EXPECT_THROW(ts::apply_override(j, "novalue"), ts::ConfigError);
    EXPECT_THROW(ts::apply_override(j, "=3"), ts::ConfigError);
    EXPECT_THROW(ts::apply_override(j, "trainer..steps=3"), ts::ConfigError);
    EXPECT_THROW(ts::apply_override(j, "trainer.steps.x=3"), ts::ConfigError);
}

TEST(Config, LoadJsonFileErrors) {
    ts::testing::TempDir dir;
    ts::testing::spit(dir.file("bad.json"), "{ nope");
    EXPECT_THROW(ts::load_json_file(dir.file("bad.json")), ts::ConfigError);
    EXPECT_THROW(ts::load_json_file(dir.file("missing.json")), ts::IoError);
}
