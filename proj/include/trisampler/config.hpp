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

// Experiment configuration: one JSON document with sections data, index,
// sampler, trainer and eval, plus top-level seed, threads and output_dir.
// Every field is optional. Unknown keys are rejected with their full path.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "trisampler/core_data.hpp"
#include "trisampler/error.hpp"
#include "trisampler/evaluation.hpp"
#include "trisampler/sampler.hpp"
#include "trisampler/synthetic.hpp"
#include "trisampler/trainer.hpp"

namespace trisampler {

struct DataConfig {
    /// Directory holding corpus.emb, queries.emb and qrels.tsv. Empty:
    /// generate from `spec` in memory.
    std::string dir;
    std::string corpus;   // overrides dir/corpus.emb
    std::string queries;  // overrides dir/queries.emb
    std::string qrels;    // overrides dir/qrels.tsv
    std::string run;      // run file scored by `eval`
    SyntheticSpec spec;

    bool
    from_files() const {
        return !dir.empty() || !corpus.empty() || !queries.empty() || !qrels.empty();
    }

    std::string
    path_of(const std::string& explicit_path, const std::string& file) const {
        if (!explicit_path.empty()) {
            return explicit_path;
        }
        return (dir.empty() ? std::string(".") : dir) + "/" + file;
    }
};

struct IndexConfig {
    IndexMode mode = IndexMode::exact;
    ApproximateParams params;
    std::size_t k = 100;  // depth of the run written by `index`
};

struct EvalConfig {
    std::size_t mrr_k = 10;
    std::size_t recall_k = 50;
    double holdout_fraction = 0.25;
    std::vector<Variant> variants = {Variant::uniform, Variant::topk_weighted, Variant::debiased,
                                     Variant::trisampler};
    /// Explicit seed list for `compare`; empty means seed, seed+1, ...
    std::vector<std::uint64_t> seeds;
    std::size_t num_seeds = 5;
};

struct CliConfig {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string output_dir = "out";
    DataConfig data;
    IndexConfig index;
    SamplerConfig sampler;
    TrainerConfig trainer;
    EvalConfig eval;

    CliConfig() {
        trainer.wall_clock = false;  // byte-identical logs by default
    }

    /// Trainer settings with seeds fanned out from the top-level seed.
    TrainerConfig
    resolved_trainer() const {
        TrainerConfig t = trainer;
        t.sampler = resolved_sampler();
        t.seed = stream_seed(seed, "trainer");
        t.index_mode = index.mode;
        t.index_params = index.params;
        t.threads = threads;
        return t;
    }

    SamplerConfig
    resolved_sampler() const {
        SamplerConfig s = sampler;
        s.seed = stream_seed(seed, "sampler");
        return s;
    }

    std::vector<std::uint64_t>
    compare_seeds() const {
        if (!eval.seeds.empty()) {
            return eval.seeds;
        }
        std::vector<std::uint64_t> out;
        for (std::size_t i = 0; i < eval.num_seeds; ++i) {
            out.push_back(seed + i);
        }
        return out;
    }
};

namespace detail {

using FieldSetter = std::function<void(const nlohmann::json&)>;

// Walks an object, dispatching each key to its setter; anything else is an
// unknown key.
inline void
read_object(const nlohmann::json& j, const std::string& path, const std::map<std::string, FieldSetter>& fields) {
    if (!j.is_object()) {
        throw ConfigError(path + ": expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        const auto where = path.empty() ? key : path + "." + key;
        auto it = fields.find(key);
        if (it == fields.end()) {
            throw ConfigError("unknown key '" + where + "'");
        }
        try {
            it->second(value);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

template <typename T>
FieldSetter
into(T& target) {
    return [&target](const nlohmann::json& v) { target = v.get<T>(); };
}

inline IndexMode
parse_index_mode(const std::string& s) {
    if (s == "exact") {
        return IndexMode::exact;
    }
    if (s == "approximate") {
        return IndexMode::approximate;
    }
    throw std::invalid_argument("unknown index mode '" + s + "' (exact | approximate)");
}

inline CorpusProfile
parse_profile(const std::string& s) {
    if (s == "passage") {
        return CorpusProfile::passage;
    }
    if (s == "document") {
        return CorpusProfile::document;
    }
    throw std::invalid_argument("unknown profile '" + s + "' (passage | document)");
}

inline Variant
variant_or_throw(const std::string& s) {
    if (auto v = parse_variant(s)) {
        return *v;
    }
    throw std::invalid_argument("unknown sampler variant '" + s + "'");
}

}  // namespace detail

inline CliConfig
parse_cli_config(const nlohmann::json& j) {
    using detail::into;
    CliConfig c;
    auto& d = c.data;
    auto& ix = c.index;
    auto& s = c.sampler;
    auto& t = c.trainer;
    auto& e = c.eval;

    detail::read_object(
        j, "",
        {{"seed", into(c.seed)},
         {"threads", into(c.threads)},
         {"output_dir", into(c.output_dir)},
         {"data",
          [&](const nlohmann::json& v) {
              detail::read_object(v, "data",
                                  {{"dir", into(d.dir)},
                                   {"corpus", into(d.corpus)},
                                   {"queries", into(d.queries)},
                                   {"qrels", into(d.qrels)},
                                   {"run", into(d.run)},
                                   {"spec", [&](const nlohmann::json& sv) {
                                        d.spec = synthetic_spec_from_json(sv, "data.spec");
                                    }}});
          }},
         {"index",
          [&](const nlohmann::json& v) {
              detail::read_object(
                  v, "index",
                  {{"mode", [&](const nlohmann::json& m) { ix.mode = detail::parse_index_mode(m.get<std::string>()); }},
                   {"lists", into(ix.params.lists)},
                   {"probes", into(ix.params.probes)},
                   {"iterations", into(ix.params.iterations)},
                   {"k", into(ix.k)}});
          }},
         {"sampler",
          [&](const nlohmann::json& v) {
              detail::read_object(
                  v, "sampler",
                  {{"variant", [&](const nlohmann::json& m) { s.variant = detail::variant_or_throw(m.get<std::string>()); }},
                   {"profile", [&](const nlohmann::json& m) { s.profile = detail::parse_profile(m.get<std::string>()); }},
                   {"pool_size", into(s.pool_size)},
                   {"transitional_size", into(s.transitional_size)},
                   {"negatives", into(s.negatives)},
                   {"gaussian_coef", into(s.gaussian_coef)},
                   {"simans_a", into(s.simans_a)},
                   {"simans_b", into(s.simans_b)}});
          }},
         {"trainer",
          [&](const nlohmann::json& v) {
              detail::read_object(v, "trainer",
                                  {{"learning_rate", into(t.learning_rate)},
                                   {"steps", into(t.steps)},
                                   {"refresh_every", into(t.refresh_every)},
                                   {"batch_size", into(t.batch_size)},
                                   {"dim_out", into(t.dim_out)},
                                   {"log_every", into(t.log_every)},
                                   {"shared_init", into(t.shared_init)},
                                   {"wall_clock", into(t.wall_clock)}});
          }},
         {"eval", [&](const nlohmann::json& v) {
              detail::read_object(
                  v, "eval",
                  {{"mrr_k", into(e.mrr_k)},
                   {"recall_k", into(e.recall_k)},
                   {"holdout_fraction", into(e.holdout_fraction)},
                   {"seeds", into(e.seeds)},
                   {"num_seeds", into(e.num_seeds)},
                   {"variants", [&](const nlohmann::json& m) {
                        e.variants.clear();
                        for (const auto& name : m.get<std::vector<std::string>>()) {
                            e.variants.push_back(detail::variant_or_throw(name));
                        }
                    }}});
          }}});

    try {
        c.sampler.validate();
        c.trainer.validate();
        TRISAMPLER_EXPECT(c.index.k >= 1, "index.k must be >= 1");
        TRISAMPLER_EXPECT(c.eval.mrr_k >= 1 && c.eval.recall_k >= 1, "eval cutoffs must be >= 1");
        TRISAMPLER_EXPECT(c.eval.holdout_fraction >= 0.0 && c.eval.holdout_fraction < 1.0,
                          "eval.holdout_fraction must lie in [0, 1)");
        TRISAMPLER_EXPECT(!c.eval.variants.empty(), "eval.variants must not be empty");
        TRISAMPLER_EXPECT(!c.eval.seeds.empty() || c.eval.num_seeds >= 1, "eval needs at least one seed");
    } catch (const ContractError& ex) {
        throw ConfigError(ex.what());
    }
    return c;
}

/// Applies `path=value` to a config document. The value is parsed as JSON
/// when it parses, otherwise taken as a string. Intermediate objects are
/// created on demand; whether the key is known is decided at parse time.
inline void
apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects path=value, got '" + assignment + "'");
    }
    const auto path = assignment.substr(0, eq);
    const auto raw = assignment.substr(eq + 1);
    auto value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        value = raw;
    }
    if (j.is_null()) {
        j = nlohmann::json::object();
    }
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) {
            throw ConfigError("--set: empty path component in '" + path + "'");
        }
        if (!node->is_object()) {
            throw ConfigError("--set: '" + path.substr(0, start == 0 ? 0 : start - 1) + "' is not an object");
        }
        if (dot == std::string::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) {
            *node = nlohmann::json::object();
        }
        start = dot + 1;
    }
}

inline nlohmann::json
load_json_file(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    auto j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) {
        throw ConfigError("'" + path + "' is not valid JSON");
    }
    return j;
}

}  // namespace trisampler
