// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
//
// Command-line driver. Every stage reads and writes files; see README.md for
// the formats. Exit codes: 0 ok, 1 usage, 2 data or I/O, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpr/dpr.hpp"

namespace fs = std::filesystem;
using namespace dpr;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

const std::vector<std::string> kConfigKeys = {"dim",       "buckets",       "shared",     "head",
                                              "max_len_query", "max_len_passage", "batch_size", "hard_negatives",
                                              "peak_lr",   "warmup_frac",   "total_steps", "seed",
                                              "workers",   "validate_every", "patience"};

/// --config plus one flag per config key; flags win over the file.
struct ConfigFlags {
    std::string path;
    std::map<std::string, std::string> values;

    void attach(CLI::App* app) {
        app->add_option("--config", path, "key = value config file");
        for (const auto& key : kConfigKeys) {
            std::string flag = "--" + key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            app->add_option(flag, values[key], "override config key " + key);
        }
    }

    [[nodiscard]] PipelineConfig resolve() const {
        PipelineConfig c = path.empty() ? PipelineConfig{} : load_config(path);
        for (const auto& [key, v] : values) {
            if (!v.empty()) apply_config_value(c, key, v);
        }
        return c;
    }

    [[nodiscard]] bool has(const std::string& key) const {
        auto it = values.find(key);
        return it != values.end() && !it->second.empty();
    }
};

std::string one_line(std::string s) {
    for (auto& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

std::vector<std::string> query_texts(const std::vector<Query>& qs) {
    std::vector<std::string> out;
    out.reserve(qs.size());
    for (const auto& q : qs) out.push_back(q.text);
    return out;
}

void print_stage(const std::string& stage, const EvalReport& r) {
    std::cout << "stage=" << stage;
    for (const auto& [name, v] : detail::selected_means(r)) std::cout << ' ' << name << '=' << format_score(v);
    std::cout << '\n';
}

void report_store(const PairStore& s, std::size_t dropped, const char* what) {
    std::cout << "pairs=" << s.size() << ' ' << what << '=' << dropped << '\n';
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string family = "dropout";
    std::string out_dir;
    std::size_t passages = 5000, train = 4000, test = 1000, views = 1;
    std::size_t pretrain_pairs = 0, documents = 0;
    double drop = 0.3;
    std::uint64_t seed = 0, world_seed = 1;
    SyntheticConfig world;
};

void cmd_synth(const SynthArgs& a) {
    if (a.family != "dropout" && a.family != "question") throw UsageError("synth: family must be dropout or question");
    fs::create_directories(a.out_dir);
    SyntheticWorld world(a.world, a.world_seed);
    auto b = make_benchmark(world, a.family == "dropout" ? QueryFamily::dropout : QueryFamily::question, a.passages,
                            a.train, a.test, a.seed, a.drop, a.views);
    const fs::path d(a.out_dir);
    write_passages((d / "passages.jsonl").string(), b.corpus);
    write_raw_pairs((d / "train.jsonl").string(), b.train_pairs);
    write_queries((d / "test_queries.jsonl").string(), b.test_queries);
    std::ofstream qr(d / "test.qrels");
    write_qrels(b.test_qrels, qr);
    if (!qr) throw IoError("write failed: " + (d / "test.qrels").string());
    if (a.pretrain_pairs > 0) {
        auto pre = make_question_pairs(world, a.pretrain_pairs, 2, 10'000'000, mix_seed(a.seed));
        write_raw_pairs((d / "pretrain.jsonl").string(), pre);
    }
    if (a.documents > 0) {
        Rng rng(mix_seed(a.seed + 1));
        write_documents((d / "documents.jsonl").string(), world.documents(a.documents, 4, 5, rng));
    }
    std::cout << "passages=" << b.corpus.size() << " train=" << b.train_pairs.size() << " test=" << b.test_queries.size()
              << '\n';
}

// --- train -----------------------------------------------------------------

std::optional<ProxyCorpus> load_proxy(const std::string& passages, const std::string& queries, const std::string& qrels,
                                      std::size_t cap, std::uint64_t seed) {
    if (passages.empty() && queries.empty() && qrels.empty()) return std::nullopt;
    if (passages.empty() || queries.empty() || qrels.empty()) {
        throw UsageError("proxy validation needs --proxy-passages, --proxy-queries and --proxy-qrels");
    }
    PassageCollection pool(read_passages(passages));
    auto qs = read_queries(queries);
    auto qr = read_qrels(qrels);
    std::vector<PassageId> gold;
    for (const auto& q : qs) {
        auto it = qr.relevant.find(q.id);
        if (it == qr.relevant.end() || it->second.empty()) {
            throw DataError("proxy query " + std::to_string(q.id) + " has no relevant passage");
        }
        gold.push_back(*it->second.begin());
    }
    return build_proxy_corpus(qs, gold, {}, pool, cap, seed);
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Dense passage retrieval toolkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    // synth
    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic retrieval benchmark");
    s_synth->add_option("family", synth.family, "dropout | question")->required();
    s_synth->add_option("--out-dir", synth.out_dir, "output directory")->required();
    s_synth->add_option("--passages", synth.passages, "corpus size")->capture_default_str();
    s_synth->add_option("--train", synth.train, "training passages")->capture_default_str();
    s_synth->add_option("--test", synth.test, "held-out queries")->capture_default_str();
    s_synth->add_option("--views", synth.views, "queries per training passage")->capture_default_str();
    s_synth->add_option("--drop", synth.drop, "dropout probability")->capture_default_str();
    s_synth->add_option("--pretrain-pairs", synth.pretrain_pairs, "also write question pairs over fresh passages")
        ->capture_default_str();
    s_synth->add_option("--documents", synth.documents, "also write multi-paragraph documents")->capture_default_str();
    s_synth->add_option("--seed", synth.seed, "sampling seed")->capture_default_str();
    s_synth->add_option("--world-seed", synth.world_seed, "vocabulary and topic seed")->capture_default_str();
    s_synth->add_option("--vocab", synth.world.vocab_size, "background vocabulary size")->capture_default_str();
    s_synth->add_option("--topics", synth.world.topics, "number of topics")->capture_default_str();
    s_synth->add_option("--topic-words", synth.world.topic_words, "words per topic")->capture_default_str();
    s_synth->add_option("--topic-mix", synth.world.topic_mix, "fraction of topic words")->capture_default_str();
    s_synth->add_option("--zipf", synth.world.zipf_exponent, "background Zipf exponent")->capture_default_str();

    // gen
    std::string docs_path, out_path;
    double keep_prob = 0.1;
    std::uint64_t seed = 0;
    std::size_t passes = 1;
    auto* s_gen = app.add_subcommand("gen", "Generate pre-training pairs from documents");
    s_gen->require_subcommand(1);
    auto* s_ict = s_gen->add_subcommand("ict", "Sentence as query, its paragraph as positive");
    auto* s_bfs = s_gen->add_subcommand("bfs", "Body sentence as query, first paragraph as positive");
    for (auto* s : {s_ict, s_bfs}) {
        s->add_option("--docs", docs_path, "documents JSONL")->required();
        s->add_option("--out", out_path, "output pair store")->required();
        s->add_option("--seed", seed, "sampling seed")->capture_default_str();
    }
    s_ict->add_option("--keep-prob", keep_prob, "probability the query sentence stays in the positive")
        ->capture_default_str();
    s_bfs->add_option("--passes", passes, "sentences sampled per document")->capture_default_str();

    // ingest
    std::string records_path, passages_path;
    auto* s_ingest = app.add_subcommand("ingest", "Convert existing pair corpora into a pair store");
    s_ingest->require_subcommand(1);
    auto* s_qa = s_ingest->add_subcommand("qa", "Question/answer records grounded in passages");
    s_qa->add_option("--records", records_path, "QA JSONL")->required();
    s_qa->add_option("--passages", passages_path, "passages JSONL")->required();
    auto* s_dialogue = s_ingest->add_subcommand("dialogue", "Thread context as query, response as positive");
    s_dialogue->add_option("--threads", records_path, "dialogue JSONL")->required();
    auto* s_raw = s_ingest->add_subcommand("raw", "Raw query/positive/negatives records");
    s_raw->add_option("--pairs", records_path, "raw pairs JSONL")->required();
    for (auto* s : {s_qa, s_dialogue, s_raw}) s->add_option("--out", out_path, "output pair store")->required();

    // downsample
    std::string store_path;
    std::uint64_t sample_n = 0;
    auto* s_down = app.add_subcommand("downsample", "Uniform order-preserving sample of a pair store");
    s_down->add_option("--store", store_path, "input pair store")->required();
    s_down->add_option("--n", sample_n, "pairs to keep")->required();
    s_down->add_option("--seed", seed, "sampling seed")->capture_default_str();
    s_down->add_option("--out", out_path, "output pair store")->required();

    // mine
    std::string ckpt_path, index_path;
    std::size_t negatives = 1, depth = 100;
    double k1 = 0.9, b = 0.4;
    auto* s_mine = app.add_subcommand("mine", "Attach hard negatives to a pair store");
    s_mine->require_subcommand(1);
    auto* s_mine_bm25 = s_mine->add_subcommand("bm25", "Top BM25 passages excluding gold");
    auto* s_mine_dense = s_mine->add_subcommand("dense", "Sampled from the dense top-depth excluding gold");
    for (auto* s : {s_mine_bm25, s_mine_dense}) {
        s->add_option("--store", store_path, "input pair store")->required();
        s->add_option("--passages", passages_path, "passages JSONL")->required();
        s->add_option("--out", out_path, "output pair store")->required();
        s->add_option("--negatives", negatives, "negatives per pair")->capture_default_str();
    }
    s_mine_bm25->add_option("--k1", k1)->capture_default_str();
    s_mine_bm25->add_option("--b", b)->capture_default_str();
    s_mine_dense->add_option("--checkpoint", ckpt_path, "encoder checkpoint")->required();
    s_mine_dense->add_option("--index", index_path, "prebuilt index of the passages (built if absent)");
    s_mine_dense->add_option("--depth", depth, "dense candidates considered")->capture_default_str();
    s_mine_dense->add_option("--seed", seed, "sampling seed")->capture_default_str();

    // train
    ConfigFlags train_flags;
    std::string init_path, resume_path, metrics_path;
    std::string proxy_passages, proxy_queries, proxy_qrels;
    std::size_t proxy_cap = 10000;
    auto* s_train = app.add_subcommand("train", "Train the bi-encoder on a pair store");
    s_train->add_option("--store", store_path, "training pair store")->required();
    s_train->add_option("--out", out_path, "output checkpoint")->required();
    s_train->add_option("--init", init_path, "start from this checkpoint's parameters at step 0");
    s_train->add_option("--resume", resume_path, "continue this checkpoint's step counter");
    s_train->add_option("--metrics", metrics_path, "metrics log (one line per validation interval)");
    s_train->add_option("--proxy-passages", proxy_passages, "proxy validation pool");
    s_train->add_option("--proxy-queries", proxy_queries, "proxy validation queries");
    s_train->add_option("--proxy-qrels", proxy_qrels, "proxy validation qrels");
    s_train->add_option("--proxy-cap", proxy_cap, "proxy corpus size")->capture_default_str();
    train_flags.attach(s_train);

    // pretrain-finetune
    ConfigFlags pf_flags;
    std::string pretrain_path, finetune_path, queries_path, qrels_path, out_dir;
    std::uint64_t pretrain_steps = 0, finetune_steps = 200;
    double pretrain_epochs = 1.0;
    auto* s_pf = app.add_subcommand("pretrain-finetune", "Pre-train, evaluate zero-shot, fine-tune, evaluate");
    s_pf->add_option("--pretrain", pretrain_path, "pre-training pair store")->required();
    s_pf->add_option("--finetune", finetune_path, "fine-tuning pair store")->required();
    s_pf->add_option("--passages", passages_path, "evaluation passages")->required();
    s_pf->add_option("--queries", queries_path, "evaluation queries")->required();
    s_pf->add_option("--qrels", qrels_path, "evaluation qrels")->required();
    s_pf->add_option("--out-dir", out_dir, "checkpoint directory")->required();
    s_pf->add_option("--pretrain-steps", pretrain_steps, "pre-training steps (0: use --pretrain-epochs)")
        ->capture_default_str();
    s_pf->add_option("--pretrain-epochs", pretrain_epochs, "passes over the pre-training store")->capture_default_str();
    s_pf->add_option("--finetune-steps", finetune_steps, "fine-tuning steps")->capture_default_str();
    pf_flags.attach(s_pf);

    // index
    std::size_t shard_rows = 4096;
    auto* s_index = app.add_subcommand("index", "Embed passages into a flat index");
    s_index->add_option("--checkpoint", ckpt_path, "encoder checkpoint")->required();
    s_index->add_option("--passages", passages_path, "passages JSONL")->required();
    s_index->add_option("--out", out_path, "index file")->required();
    s_index->add_option("--shard-rows", shard_rows, "passages encoded per shard")->capture_default_str();

    // search
    std::size_t k = 100;
    auto* s_search = app.add_subcommand("search", "Retrieve top-k passages for queries into a run file");
    s_search->require_subcommand(1);
    auto* s_search_dense = s_search->add_subcommand("dense", "Exact inner-product search");
    s_search_dense->add_option("--checkpoint", ckpt_path, "encoder checkpoint")->required();
    s_search_dense->add_option("--index", index_path, "index file")->required();
    auto* s_search_bm25 = s_search->add_subcommand("bm25", "BM25 over passages");
    s_search_bm25->add_option("--passages", passages_path, "passages JSONL")->required();
    s_search_bm25->add_option("--k1", k1)->capture_default_str();
    s_search_bm25->add_option("--b", b)->capture_default_str();
    for (auto* s : {s_search_dense, s_search_bm25}) {
        s->add_option("--queries", queries_path, "queries JSONL")->required();
        s->add_option("--out", out_path, "run file")->required();
        s->add_option("--k", k, "results per query")->capture_default_str();
    }

    // eval
    std::string run_path, format = "table";
    auto* s_eval = app.add_subcommand("eval", "Score a run file against qrels");
    s_eval->add_option("--run", run_path, "run file")->required();
    s_eval->add_option("--qrels", qrels_path, "qrels file")->required();
    s_eval->add_option("--format", format, "table | kv")->capture_default_str()->check(CLI::IsMember({"table", "kv"}));

    // analyze
    std::string test_path, bank_path, run_b_path, dist_path, name_a = "A", name_b = "B";
    std::size_t shortlist = 100, strat_k = 20;
    auto* s_analyze = app.add_subcommand("analyze", "Train/test question overlap analysis");
    s_analyze->require_subcommand(1);
    auto* s_overlap = s_analyze->add_subcommand("overlap", "Fraction of test questions found verbatim in the bank");
    auto* s_distance = s_analyze->add_subcommand("distance", "Word edit distance to the nearest bank question");
    for (auto* s : {s_overlap, s_distance}) {
        s->add_option("--test", test_path, "test queries JSONL")->required();
        s->add_option("--bank", bank_path, "bank queries JSONL")->required();
    }
    s_distance->add_option("--out", out_path, "TSV of query_id, distance, flagged")->required();
    s_distance->add_option("--shortlist", shortlist, "BM25 shortlist size")->capture_default_str();
    auto* s_strat = s_analyze->add_subcommand("stratify", "Mean distance by hit/miss of two runs");
    s_strat->add_option("--run-a", run_path, "run of model A")->required();
    s_strat->add_option("--run-b", run_b_path, "run of model B")->required();
    s_strat->add_option("--qrels", qrels_path, "qrels file")->required();
    s_strat->add_option("--distances", dist_path, "output of analyze distance")->required();
    s_strat->add_option("--k", strat_k, "recall cutoff")->capture_default_str();
    s_strat->add_option("--name-a", name_a)->capture_default_str();
    s_strat->add_option("--name-b", name_b)->capture_default_str();
    s_strat->add_option("--format", format, "table | kv")->capture_default_str()->check(CLI::IsMember({"table", "kv"}));

    // ablate-datasize
    ConfigFlags ab_flags;
    std::string sizes_arg = "0,1000,10000", seeds_arg = "0,1,2", workdir;
    auto* s_ablate = app.add_subcommand("ablate-datasize", "Fine-tuned R@20 across pre-training sample sizes");
    s_ablate->add_option("--pretrain", pretrain_path, "pre-training pair store to sample from")->required();
    s_ablate->add_option("--finetune", finetune_path, "fine-tuning pair store")->required();
    s_ablate->add_option("--passages", passages_path, "evaluation passages")->required();
    s_ablate->add_option("--queries", queries_path, "evaluation queries")->required();
    s_ablate->add_option("--qrels", qrels_path, "evaluation qrels")->required();
    s_ablate->add_option("--sizes", sizes_arg, "comma-separated sample sizes")->capture_default_str();
    s_ablate->add_option("--seeds", seeds_arg, "comma-separated seeds")->capture_default_str();
    s_ablate->add_option("--pretrain-epochs", pretrain_epochs, "passes over each sample")->capture_default_str();
    s_ablate->add_option("--finetune-steps", finetune_steps, "fine-tuning steps")->capture_default_str();
    s_ablate->add_option("--workdir", workdir, "directory for sampled stores")->required();
    s_ablate->add_option("--out", out_path, "TSV table")->required();
    ab_flags.attach(s_ablate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return kExitUsage;
    }

    if (*s_synth) {
        cmd_synth(synth);
    } else if (*s_ict || *s_bfs) {
        auto docs = read_documents(docs_path);
        auto r = *s_ict ? gen_ict(docs, keep_prob, seed) : gen_bfs(docs, seed, passes);
        report_store(build_pair_store(r.pairs, out_path), r.skipped, "skipped");
    } else if (*s_qa) {
        PassageCollection coll(read_passages(passages_path));
        auto r = ingest_qa_pairs(read_qa_records(records_path), coll);
        report_store(build_pair_store(r.pairs, out_path), r.skipped, "dropped");
    } else if (*s_dialogue) {
        auto r = ingest_dialogue(read_dialogue(records_path));
        report_store(build_pair_store(r.pairs, out_path), r.skipped, "dropped");
    } else if (*s_raw) {
        auto pairs = read_raw_pairs(records_path);
        for (const auto& p : pairs) check_pair(p);
        report_store(build_pair_store(pairs, out_path), 0, "dropped");
    } else if (*s_down) {
        auto store = PairStore::open(store_path);
        report_store(downsample(store, sample_n, seed, out_path), store.size() - sample_n, "dropped");
    } else if (*s_mine_bm25 || *s_mine_dense) {
        auto store = PairStore::open(store_path);
        PassageCollection coll(read_passages(passages_path));
        MiningResult r;
        if (*s_mine_bm25) {
            Bm25Params bp;
            bp.k1 = k1;
            bp.b = b;
            r = mine_bm25_negatives(InvertedIndex::build(coll.all(), bp), coll, store, negatives);
        } else {
            auto params = load_checkpoint(ckpt_path).params;
            auto ix = index_path.empty() ? embed_corpus(params, coll.all()) : EmbeddingIndex::open(index_path);
            r = mine_hard_negatives(ix, params, coll, store, depth, negatives, seed);
        }
        report_store(build_pair_store(r.pairs, out_path), r.without_negatives, "without_negatives");
    } else if (*s_train) {
        if (!init_path.empty() && !resume_path.empty()) throw UsageError("--init and --resume are exclusive");
        auto cfg = train_flags.resolve();
        EncoderParams params;
        std::uint64_t start = 0;
        if (!resume_path.empty() || !init_path.empty()) {
            auto ck = load_checkpoint(resume_path.empty() ? init_path : resume_path);
            params = std::move(ck.params);
            if (!resume_path.empty()) start = ck.step;
        } else {
            params = init_params(cfg.encoder, cfg.train.seed);
        }
        auto store = PairStore::open(store_path);
        auto proxy = load_proxy(proxy_passages, proxy_queries, proxy_qrels, proxy_cap, cfg.train.seed);
        Validator validator;
        if (proxy) validator = [&](const EncoderParams& p, std::uint64_t) { return proxy_validate(p, *proxy); };
        std::ofstream metrics;
        if (!metrics_path.empty()) {
            metrics.open(metrics_path, start > 0 ? std::ios::app : std::ios::trunc);
            if (!metrics) throw IoError("cannot create " + metrics_path);
        }
        auto r = train(cfg.train, std::move(params), store, validator, start, metrics_path.empty() ? nullptr : &metrics);
        save_checkpoint(out_path, r.best, r.final_step);
        std::cout << "final_step=" << r.final_step << " best_step=" << r.best_step
                  << " best_proxy_mrr=" << (r.best_mrr ? format_score(*r.best_mrr) : std::string("na"))
                  << " stopped_early=" << (r.stopped_early ? 1 : 0) << '\n';
    } else if (*s_pf) {
        auto cfg = pf_flags.resolve();
        auto pre = PairStore::open(pretrain_path);
        auto ft = PairStore::open(finetune_path);
        EvalTask task{read_passages(passages_path), read_queries(queries_path), read_qrels(qrels_path)};
        TrainConfig pc = cfg.train;
        pc.total_steps = pretrain_steps > 0 ? pretrain_steps : steps_for_epochs(pre.size(), pretrain_epochs, pc.batch_size);
        TrainConfig fc = cfg.train;
        fc.total_steps = finetune_steps;
        auto r = pretrain_finetune(cfg.encoder, cfg.train.seed, pre, pc, ft, fc, task);
        fs::create_directories(out_dir);
        save_checkpoint((fs::path(out_dir) / "pretrained.ckpt").string(), r.pretrained, r.pretrain_steps);
        save_checkpoint((fs::path(out_dir) / "finetuned.ckpt").string(), r.finetuned, finetune_steps);
        print_stage("w/o_FT", r.zero_shot);
        print_stage("w/_FT", r.finetuned_report);
    } else if (*s_index) {
        auto params = load_checkpoint(ckpt_path).params;
        auto ix = embed_corpus(params, read_passages(passages_path), shard_rows, out_path);
        std::cout << "passages=" << ix.size() << " dim=" << ix.dim() << '\n';
    } else if (*s_search_dense || *s_search_bm25) {
        auto qs = read_queries(queries_path);
        RunFile run;
        if (*s_search_dense) {
            auto params = load_checkpoint(ckpt_path).params;
            run = dense_run(params, EmbeddingIndex::open(index_path), qs, k);
        } else {
            Bm25Params bp;
            bp.k1 = k1;
            bp.b = b;
            auto passages = read_passages(passages_path);
            run = bm25_run(InvertedIndex::build(passages, bp), qs, k);
        }
        write_run(run, out_path);
        std::cout << "queries=" << run.queries.size() << '\n';
    } else if (*s_eval) {
        auto rep = evaluate(read_run(run_path), read_qrels(qrels_path));
        std::cout << (format == "kv" ? format_report_kv(rep) : format_report_table(rep));
    } else if (*s_overlap) {
        auto frac = verbatim_overlap(query_texts(read_queries(test_path)), query_texts(read_queries(bank_path)));
        std::cout << "verbatim_overlap=" << format_score(frac) << '\n';
    } else if (*s_distance) {
        auto test = read_queries(test_path);
        QuestionBank bank(query_texts(read_queries(bank_path)));
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw IoError("cannot create " + out_path);
        std::size_t flagged = 0;
        for (const auto& q : test) {
            auto d = min_distance_to_bank(q.text, bank, shortlist);
            flagged += d.flagged ? 1 : 0;
            out << q.id << '\t' << d.distance << '\t' << (d.flagged ? 1 : 0) << '\n';
        }
        if (!out) throw IoError("write failed: " + out_path);
        std::cout << "queries=" << test.size() << " flagged=" << flagged << '\n';
    } else if (*s_strat) {
        std::map<QueryId, double> dist;
        std::ifstream in(dist_path);
        if (!in) throw IoError("cannot open " + dist_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            std::istringstream ls(line);
            QueryId q;
            double d;
            if (!(ls >> q >> d)) throw DataError(dist_path + ":" + std::to_string(lineno) + ": expected query_id distance");
            dist[q] = d;
        }
        auto rep = stratified_comparison(read_run(run_path), read_run(run_b_path), read_qrels(qrels_path), strat_k, dist);
        std::cout << (format == "kv" ? format_overlap_kv(rep) : format_overlap_table(rep, name_a, name_b));
    } else if (*s_ablate) {
        auto cfg = ab_flags.resolve();
        auto parse_list = [](const std::string& s, const char* what) {
            std::vector<std::uint64_t> out;
            std::stringstream ss(s);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                try {
                    std::size_t used = 0;
                    out.push_back(std::stoull(tok, &used));
                    if (used != tok.size()) throw std::invalid_argument(tok);
                } catch (const std::exception&) {
                    throw UsageError(std::string("bad ") + what + " entry '" + tok + "'");
                }
            }
            return out;
        };
        DataSizeOptions opts;
        opts.sizes = parse_list(sizes_arg, "--sizes");
        opts.seeds = parse_list(seeds_arg, "--seeds");
        opts.pretrain_epochs = pretrain_epochs;
        opts.workdir = workdir;
        fs::create_directories(workdir);
        auto pool = PairStore::open(pretrain_path);
        auto ft = PairStore::open(finetune_path);
        EvalTask task{read_passages(passages_path), read_queries(queries_path), read_qrels(qrels_path)};
        TrainConfig fc = cfg.train;
        fc.total_steps = finetune_steps;
        auto rows = ablate_datasize(cfg.encoder, pool, cfg.train, ft, fc, task, opts);
        auto table = format_datasize_table(rows);
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw IoError("cannot create " + out_path);
        out << table;
        if (!out) throw IoError("write failed: " + out_path);
        std::cout << table;
    }
    return 0;
}

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << one_line(e.what()) << '\n';
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "error: data: " << one_line(e.what()) << '\n';
        return kExitData;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << one_line(e.what()) << '\n';
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: io: " << one_line(e.what()) << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: data: " << one_line(e.what()) << '\n';
        return kExitData;
    }
}
