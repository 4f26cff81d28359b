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

// trisampler: gen | index | sample | train | eval | compare.
//
// Exit codes: 0 success, 2 usage or configuration, 3 numerical failure,
// 4 I/O or malformed input file.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "trisampler/config.hpp"
#include "trisampler/trisampler.hpp"

namespace ts = trisampler;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out;
};

void
add_common(CLI::App* cmd, CommonArgs& a, bool config_flags = true) {
    if (config_flags) {
        cmd->add_option("--config", a.config_path, "JSON config file");
    }
    cmd->add_option("--set", a.overrides, "override a config field: path=value")->take_all();
    cmd->add_option("--seed", a.seed, "root seed");
    cmd->add_option("--threads", a.threads, "worker thread cap");
}

ts::CliConfig
load_config(const CommonArgs& a) {
    nlohmann::json j = nlohmann::json::object();
    if (!a.config_path.empty()) {
        j = ts::load_json_file(a.config_path);
    }
    for (const auto& o : a.overrides) {
        ts::apply_override(j, o);
    }
    auto cfg = ts::parse_cli_config(j);
    if (a.seed) {
        cfg.seed = *a.seed;
    }
    if (a.threads) {
        cfg.threads = *a.threads;
    }
    return cfg;
}

void
warn(const std::string& msg) {
    std::cerr << "warning: " << msg << "\n";
}

std::string
ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw ts::IoError("cannot create directory '" + dir + "': " + ec.message());
    }
    return dir;
}

void
write_text(const std::string& path, const std::string& text) {
    ts::detail::write_file_bytes(path, text);
}

ts::SyntheticDataset
load_dataset(const ts::CliConfig& cfg) {
    const auto& d = cfg.data;
    if (!d.from_files()) {
        return ts::generate_synthetic(d.spec);
    }
    std::vector<std::string> warnings;
    auto corpus = ts::load_embeddings(d.path_of(d.corpus, "corpus.emb"));
    auto queries = ts::load_embeddings(d.path_of(d.queries, "queries.emb"));
    auto qrels = ts::load_qrels(d.path_of(d.qrels, "qrels.tsv"), &warnings);
    for (const auto& w : warnings) {
        warn(w);
    }
    if (corpus.dim() != queries.dim()) {
        throw ts::DataError("corpus dim " + std::to_string(corpus.dim()) + " != query dim " +
                            std::to_string(queries.dim()));
    }
    return {std::move(corpus), std::move(queries), std::move(qrels)};
}

std::string
metrics_json(const ts::MetricReport& mrr, const ts::MetricReport& recall) {
    nlohmann::ordered_json j;
    j[mrr.metric] = mrr.mean;
    j[recall.metric] = recall.mean;
    j["queries"] = mrr.query_count();
    return j.dump(2) + "\n";
}

int
cmd_gen(const CommonArgs& a, const std::string& spec_path) {
    nlohmann::json j = nlohmann::json::object();
    if (!spec_path.empty()) {
        j = ts::load_json_file(spec_path);
    }
    for (const auto& o : a.overrides) {
        ts::apply_override(j, o);
    }
    auto spec = ts::synthetic_spec_from_json(j);
    if (a.seed) {
        spec.seed = *a.seed;
    }
    const auto data = ts::generate_synthetic(spec);
    const auto dir = ensure_dir(a.out);
    ts::write_embeddings(data.corpus, dir + "/corpus.emb");
    ts::write_embeddings(data.queries, dir + "/queries.emb");
    ts::write_qrels(data.qrels, dir + "/qrels.tsv");
    std::cout << "wrote " << data.corpus.count() << " docs, " << data.queries.count() << " queries to " << dir
              << "\n";
    return 0;
}

int
cmd_index(const ts::CliConfig& cfg, const std::string& out) {
    const auto data = load_dataset(cfg);
    auto corpus = std::make_shared<const ts::EmbeddingMatrix>(data.corpus);
    const auto index = ts::Index::build(corpus, cfg.index.mode, cfg.index.params);
    const auto rows = ts::judged_query_rows(data.qrels, data.queries);
    const auto run = ts::retrieve(index, data.queries, rows, cfg.index.k, ts::resolve_threads(cfg.threads));
    const auto dir = ensure_dir(out.empty() ? cfg.output_dir : out);
    ts::write_run(run, dir + "/run.trec");
    std::cout << ts::to_string(index.mode()) << " index over " << corpus->count() << " docs";
    if (index.mode() == ts::IndexMode::approximate) {
        std::cout << " (" << index.list_count() << " lists)";
    }
    std::cout << "; wrote top-" << cfg.index.k << " for " << rows.size() << " queries\n";
    return 0;
}

int
cmd_sample(const ts::CliConfig& cfg, const std::string& out) {
    if (out.empty()) {
        throw ts::ConfigError("sample: --out <tsv> is required");
    }
    const auto data = load_dataset(cfg);
    const auto sampler = cfg.resolved_sampler();
    if (sampler.candidate_pool() > data.corpus.count()) {
        warn("candidate pool K=" + std::to_string(sampler.candidate_pool()) + " exceeds corpus size " +
             std::to_string(data.corpus.count()) + "; pools shrink to what the corpus holds");
    }
    const auto resolved = ts::resolve_qrels(data.qrels, data.queries, data.corpus);
    const auto pairs = ts::training_pairs(resolved);
    auto corpus = std::make_shared<const ts::EmbeddingMatrix>(data.corpus);
    const auto index = ts::Index::build(corpus, cfg.index.mode, cfg.index.params);
    const ts::SamplingContext ctx(index, data.queries, resolved);
    const auto samples = ts::sample_all(ctx, pairs, sampler, 0, ts::resolve_threads(cfg.threads));
    std::size_t fallbacks = 0;
    for (const auto& s : samples) {
        fallbacks += s.fallback ? 1 : 0;
    }
    ts::write_negative_samples(ts::to_records(ctx, samples), out);
    std::cout << ts::to_string(sampler.variant) << ": " << samples.size() << " pairs, " << fallbacks
              << " fallbacks\n";
    return 0;
}

int
cmd_train(const ts::CliConfig& cfg, const std::string& out) {
    const auto data = load_dataset(cfg);
    const auto [train_qrels, eval_qrels] = ts::split_qrels(data.qrels, cfg.eval.holdout_fraction);
    const auto result = ts::train(data.corpus, data.queries, train_qrels, cfg.resolved_trainer());
    const auto threads = ts::resolve_threads(cfg.threads);
    const auto run = ts::encode_and_retrieve(result.encoder, data.corpus, data.queries, eval_qrels,
                                             std::max(cfg.eval.mrr_k, cfg.eval.recall_k), threads);
    const auto mrr = ts::mrr_at_k(run, eval_qrels, cfg.eval.mrr_k);
    const auto recall = ts::recall_at_k(run, eval_qrels, cfg.eval.recall_k);

    const auto dir = ensure_dir(out.empty() ? cfg.output_dir : out);
    write_text(dir + "/train_log.jsonl", ts::format_training_log(result.log));
    write_text(dir + "/encoder.json", ts::to_json(result.encoder).dump() + "\n");
    ts::write_run(run, dir + "/run.trec");
    write_text(dir + "/metrics.json", metrics_json(mrr, recall));
    std::cout << "trained " << cfg.trainer.steps << " steps, final epoch " << result.final_epoch << "; "
              << mrr.metric << " " << mrr.mean << ", " << recall.metric << " " << recall.mean << "\n";
    return 0;
}

int
cmd_eval(const ts::CliConfig& cfg, const std::string& out) {
    if (cfg.data.run.empty()) {
        throw ts::ConfigError("eval: data.run must name a run file");
    }
    std::vector<std::string> warnings;
    const auto qrels = cfg.data.from_files() ? ts::load_qrels(cfg.data.path_of(cfg.data.qrels, "qrels.tsv"), &warnings)
                                             : ts::generate_synthetic(cfg.data.spec).qrels;
    const auto run = ts::load_run(cfg.data.run);
    const auto mrr = ts::mrr_at_k(run, qrels, cfg.eval.mrr_k, &warnings);
    const auto recall = ts::recall_at_k(run, qrels, cfg.eval.recall_k);
    for (const auto& w : warnings) {
        warn(w);
    }
    const auto dir = ensure_dir(out.empty() ? cfg.output_dir : out);
    write_text(dir + "/metrics.json", metrics_json(mrr, recall));
    std::cout << mrr.metric << " " << mrr.mean << ", " << recall.metric << " " << recall.mean << " over "
              << mrr.query_count() << " queries\n";
    return 0;
}

int
cmd_compare(const ts::CliConfig& cfg, const std::string& out) {
    if (cfg.data.from_files()) {
        warn("compare always generates its dataset from data.spec; data files are ignored");
    }
    std::vector<ts::SamplerConfig> samplers;
    for (auto v : cfg.eval.variants) {
        auto s = cfg.sampler;
        s.variant = v;
        samplers.push_back(s);
    }
    auto trainer = cfg.resolved_trainer();
    ts::CompareOptions options;
    options.holdout_fraction = cfg.eval.holdout_fraction;
    options.mrr_k = cfg.eval.mrr_k;
    options.recall_k = cfg.eval.recall_k;
    options.threads = ts::resolve_threads(cfg.threads);
    const auto table = ts::compare_samplers(cfg.data.spec, samplers, trainer, cfg.compare_seeds(), options);
    const auto dir = ensure_dir(out.empty() ? cfg.output_dir : out);
    write_text(dir + "/compare.csv", ts::format_comparison_csv(table));
    std::cout << ts::format_comparison_table(table);
    return 0;
}

}  // namespace

int
main(int argc, char** argv) {
    CLI::App app{"trisampler: negative sampling experiments for dense retrieval"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string spec_path;

    auto* gen = app.add_subcommand("gen", "generate a synthetic corpus, queries and qrels");
    add_common(gen, args, false);
    gen->add_option("--spec", spec_path, "synthetic spec JSON");
    gen->add_option("--out", args.out, "output directory")->required();

    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const ts::CliConfig&, const std::string&);
    };
    const Sub subs[] = {
        {"index", "build an index over the raw corpus and write a run", cmd_index},
        {"sample", "sample negatives for every (query, positive) pair", cmd_sample},
        {"train", "train the toy dual encoder and score held-out queries", cmd_train},
        {"eval", "score a run file against qrels", cmd_eval},
        {"compare", "compare sampler variants across seeds", cmd_compare},
    };
    std::vector<CLI::App*> commands;
    for (const auto& s : subs) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        add_common(cmd, args);
        cmd->add_option("--out", args.out, std::string(s.name) == "sample" ? "output TSV" : "output directory");
        commands.push_back(cmd);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen(args, spec_path);
        }
        for (std::size_t i = 0; i < commands.size(); ++i) {
            if (commands[i]->parsed()) {
                return subs[i].run(load_config(args), args.out);
            }
        }
        return kExitUsage;
    } catch (const ts::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ts::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ts::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ts::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
