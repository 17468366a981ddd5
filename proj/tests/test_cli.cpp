// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <regex>

#include "support/helpers.hpp"

using namespace dpr;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
  protected:
    dpr::testing::TempDir dir;

    std::string f(const std::string& name) { return dir.file(name); }

    Result run(const std::string& args) {
        const std::string cmd =
            std::string(DPR_CLI_PATH) + " " + args + " >" + f("stdout.txt") + " 2>" + f("stderr.txt");
        int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = read_text(f("stdout.txt"));
        r.err = read_text(f("stderr.txt"));
        return r;
    }

    Result ok(const std::string& args) {
        auto r = run(args);
        EXPECT_EQ(r.code, 0) << args << "\n" << r.err;
        return r;
    }

    // Small dropout benchmark plus its training store.
    void toy(std::size_t passages = 200) {
        ok("synth dropout --out-dir " + f("toy") + " --passages " + std::to_string(passages) + " --train 150 --test 50");
        ok("ingest raw --pairs " + f("toy/train.jsonl") + " --out " + f("train.store"));
    }

    static std::string small_model() { return " --dim 16 --buckets 4096 --batch-size 8 "; }
};

std::vector<double> logged_losses(const std::string& log) {
    std::vector<double> out;
    std::regex re("loss=([^ ]+)");
    for (std::sregex_iterator it(log.begin(), log.end(), re), end; it != end; ++it) out.push_back(std::stod((*it)[1]));
    return out;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(Cli, GenIctOneDocument) {
    std::vector<Document> docs{{1, "T", {"First one. Second two. Third three."}}};
    write_documents(f("docs.jsonl"), docs);
    auto r = ok("gen ict --keep-prob 1.0 --docs " + f("docs.jsonl") + " --out " + f("ict.store"));
    EXPECT_EQ(r.out, "pairs=3 skipped=0\n");
    auto store = PairStore::open(f("ict.store"));
    ASSERT_EQ(store.size(), 3u);
    for (std::uint64_t i = 0; i < 3; ++i) EXPECT_EQ(store.at(i).positive.text, docs[0].paragraphs[0]);
}

TEST_F(Cli, GenIsByteDeterministic) {
    ok("synth dropout --out-dir " + f("w") + " --passages 20 --train 10 --test 5 --documents 30");
    for (const char* task : {"ict", "bfs"}) {
        ok(std::string("gen ") + task + " --docs " + f("w/documents.jsonl") + " --out " + f("a.store") + " --seed 4");
        ok(std::string("gen ") + task + " --docs " + f("w/documents.jsonl") + " --out " + f("b.store") + " --seed 4");
        EXPECT_EQ(dpr::testing::slurp(f("a.store")), dpr::testing::slurp(f("b.store")));
        EXPECT_GT(PairStore::open(f("a.store")).size(), 0u);
    }
}

TEST_F(Cli, IngestQaCountsDanglingRecords) {
    std::vector<Passage> ps{{1, std::nullopt, "the passage"}};
    write_passages(f("p.jsonl"), ps);
    {
        std::ofstream out(f("qa.jsonl"));
        out << R"({"question": "q one", "answer": "a", "passage_id": 1})" << '\n'
            << R"({"question": "q two", "answer": "b", "passage_id": 99})" << '\n';
    }
    auto r = ok("ingest qa --records " + f("qa.jsonl") + " --passages " + f("p.jsonl") + " --out " + f("qa.store"));
    EXPECT_EQ(r.out, "pairs=1 dropped=1\n");
}

TEST_F(Cli, IngestDialogueAndDownsample) {
    {
        std::ofstream out(f("d.jsonl"));
        for (int i = 0; i < 20; ++i) out << R"({"context": ["hi", "there"], "response": "reply )" << i << "\"}\n";
        out << R"({"context": ["hi"], "response": ""})" << '\n';
    }
    auto r = ok("ingest dialogue --threads " + f("d.jsonl") + " --out " + f("d.store"));
    EXPECT_EQ(r.out, "pairs=20 dropped=1\n");
    r = ok("downsample --store " + f("d.store") + " --n 5 --seed 2 --out " + f("s.store"));
    EXPECT_EQ(r.out, "pairs=5 dropped=15\n");
    EXPECT_EQ(run("downsample --store " + f("d.store") + " --n 50 --out " + f("x.store")).code, 1);
}

TEST_F(Cli, TrainWritesOneMetricsLinePerInterval) {
    toy();
    auto r = ok("train --store " + f("train.store") + " --out " + f("m.ckpt") + small_model() +
                "--total-steps 50 --validate-every 10 --metrics " + f("metrics.txt"));
    EXPECT_NE(r.out.find("final_step=50"), std::string::npos);
    auto log = read_text(f("metrics.txt"));
    EXPECT_EQ(count_lines(log), 5u);
    EXPECT_EQ(log.rfind("step=10 loss=", 0), 0u);
    EXPECT_NE(log.find("proxy_mrr=na"), std::string::npos);
}

TEST_F(Cli, ProxyValidationIsLogged) {
    toy();
    ok("train --store " + f("train.store") + " --out " + f("m.ckpt") + small_model() +
       "--total-steps 20 --validate-every 10 --metrics " + f("metrics.txt") + " --proxy-passages " +
       f("toy/passages.jsonl") + " --proxy-queries " + f("toy/test_queries.jsonl") + " --proxy-qrels " +
       f("toy/test.qrels") + " --proxy-cap 100");
    auto log = read_text(f("metrics.txt"));
    EXPECT_EQ(count_lines(log), 2u);
    EXPECT_EQ(log.find("proxy_mrr=na"), std::string::npos);
}

TEST_F(Cli, WorkersAgreeWithSingleWorker) {
    toy();
    ok("mine bm25 --store " + f("train.store") + " --passages " + f("toy/passages.jsonl") + " --out " + f("neg.store"));
    const std::string common = " --store " + f("neg.store") + small_model() + "--total-steps 12 --validate-every 1 ";
    ok("train" + common + "--workers 1 --out " + f("a.ckpt") + " --metrics " + f("a.txt"));
    ok("train" + common + "--workers 2 --out " + f("b.ckpt") + " --metrics " + f("b.txt"));
    auto a = logged_losses(read_text(f("a.txt")));
    auto b = logged_losses(read_text(f("b.txt")));
    ASSERT_EQ(a.size(), 12u);
    ASSERT_EQ(b.size(), 12u);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(std::abs(a[i] - b[i]), 1e-6 * std::abs(a[i]));
}

TEST_F(Cli, ResumeContinuesStepCounter) {
    toy();
    const std::string common = " --store " + f("train.store") + small_model() + "--validate-every 10 ";
    ok("train" + common + "--total-steps 20 --out " + f("a.ckpt") + " --metrics " + f("m.txt"));
    EXPECT_EQ(load_checkpoint(f("a.ckpt")).step, 20u);
    auto r = ok("train" + common + "--total-steps 40 --resume " + f("a.ckpt") + " --out " + f("b.ckpt") +
                " --metrics " + f("m.txt"));
    EXPECT_NE(r.out.find("final_step=40"), std::string::npos);
    EXPECT_EQ(load_checkpoint(f("b.ckpt")).step, 40u);
    auto log = read_text(f("m.txt"));
    EXPECT_EQ(count_lines(log), 4u);
    EXPECT_NE(log.find("step=30 "), std::string::npos);
    EXPECT_EQ(run("train" + common + "--total-steps 40 --resume " + f("a.ckpt") + " --init " + f("a.ckpt") +
                  " --out " + f("c.ckpt"))
                  .code,
              1);
}

TEST_F(Cli, ConfigFileAndFlagPrecedence) {
    toy();
    {
        std::ofstream out(f("cfg.txt"));
        out << "dim = 8\nbuckets = 1024\nbatch_size = 4\ntotal_steps = 3\n";
    }
    ok("train --store " + f("train.store") + " --config " + f("cfg.txt") + " --dim 12 --out " + f("c.ckpt"));
    auto ck = load_checkpoint(f("c.ckpt"));
    EXPECT_EQ(ck.params.config.dim, 12u);
    EXPECT_EQ(ck.params.config.buckets, 1024u);
    EXPECT_EQ(ck.step, 3u);
    {
        std::ofstream out(f("bad.txt"));
        out << "learning_rate = 1\n";
    }
    auto r = run("train --store " + f("train.store") + " --config " + f("bad.txt") + " --out " + f("d.ckpt"));
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(count_lines(r.err), 1u);
}

TEST_F(Cli, IndexSearchEvalPipeline) {
    toy();
    ok("train --store " + f("train.store") + " --out " + f("m.ckpt") + small_model() + "--total-steps 30");
    ok("index --checkpoint " + f("m.ckpt") + " --passages " + f("toy/passages.jsonl") + " --out " + f("a.idx"));
    ok("index --checkpoint " + f("m.ckpt") + " --passages " + f("toy/passages.jsonl") + " --out " + f("b.idx") +
       " --shard-rows 7");
    EXPECT_EQ(dpr::testing::slurp(f("a.idx")), dpr::testing::slurp(f("b.idx")));
    ok("search dense --checkpoint " + f("m.ckpt") + " --index " + f("a.idx") + " --queries " +
       f("toy/test_queries.jsonl") + " --out " + f("dense.run") + " --k 20");
    auto run_file = read_run(f("dense.run"));
    EXPECT_EQ(run_file.queries.size(), 50u);
    auto r = ok("eval --format kv --run " + f("dense.run") + " --qrels " + f("toy/test.qrels"));
    EXPECT_NE(r.out.find("queries=50\n"), std::string::npos);
    ok("mine dense --store " + f("train.store") + " --passages " + f("toy/passages.jsonl") + " --checkpoint " +
       f("m.ckpt") + " --index " + f("a.idx") + " --depth 10 --negatives 2 --out " + f("dn.store"));
    EXPECT_EQ(PairStore::open(f("dn.store")).at(0).hard_negatives.size(), 2u);
}

TEST_F(Cli, PerfectBm25RunScoresOne) {
    std::vector<Passage> ps;
    std::vector<Query> qs;
    std::ofstream qr(f("q.qrels"));
    for (std::size_t i = 0; i < 10; ++i) {
        std::string w = "word" + std::to_string(i);
        ps.push_back({i, std::nullopt, w + " " + w});
        qs.push_back({100 + i, w});
        qr << 100 + i << ' ' << i << '\n';
    }
    qr.close();
    write_passages(f("p.jsonl"), ps);
    write_queries(f("q.jsonl"), qs);
    ok("search bm25 --passages " + f("p.jsonl") + " --queries " + f("q.jsonl") + " --out " + f("bm25.run"));
    auto r = ok("eval --format kv --run " + f("bm25.run") + " --qrels " + f("q.qrels"));
    EXPECT_EQ(r.out, "queries=10\nmissing_from_run=0\nMRR@10=1\nR@5=1\nR@20=1\nR@100=1\nR-Prec=1\n");
    auto t = ok("eval --run " + f("bm25.run") + " --qrels " + f("q.qrels"));
    EXPECT_NE(t.out.find("1.0000"), std::string::npos);
}

TEST_F(Cli, EvalRejectsUnknownQueries) {
    {
        std::ofstream run(f("x.run"));
        run << "7 1 1 0.5\n";
        std::ofstream qr(f("x.qrels"));
        qr << "8 1\n";
    }
    auto r = run("eval --run " + f("x.run") + " --qrels " + f("x.qrels"));
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
    EXPECT_EQ(r.err.rfind("error: data: ", 0), 0u);
    EXPECT_EQ(count_lines(r.err), 1u);
}

TEST_F(Cli, AnalyzeOverlapPlanted) {
    std::vector<Query> test, bank;
    for (std::size_t i = 0; i < 100; ++i) test.push_back({i, "test question number " + std::to_string(i)});
    for (std::size_t i = 0; i < 9; ++i) bank.push_back({i, "Test question number " + std::to_string(i * 7) + "?"});
    for (std::size_t i = 0; i < 50; ++i) bank.push_back({100 + i, "other question " + std::to_string(i)});
    write_queries(f("test.jsonl"), test);
    write_queries(f("bank.jsonl"), bank);
    auto r = ok("analyze overlap --test " + f("test.jsonl") + " --bank " + f("bank.jsonl"));
    EXPECT_EQ(r.out, "verbatim_overlap=0.09\n");
    ok("analyze distance --test " + f("test.jsonl") + " --bank " + f("bank.jsonl") + " --out " + f("dist.tsv"));
    auto dist = read_text(f("dist.tsv"));
    EXPECT_EQ(count_lines(dist), 100u);
    EXPECT_EQ(dist.rfind("0\t0\t0\n", 0), 0u);
}

TEST_F(Cli, AnalyzeStratify) {
    {
        std::ofstream qr(f("q.qrels"));
        std::ofstream a(f("a.run"));
        std::ofstream b(f("b.run"));
        std::ofstream d(f("d.tsv"));
        for (int q = 0; q < 4; ++q) {
            qr << q << ' ' << q << '\n';
            a << q << ' ' << (q < 2 ? q : 99) << " 1 1.0\n";
            b << q << ' ' << (q % 2 == 0 ? q : 99) << " 1 1.0\n";
            d << q << '\t' << q << "\t0\n";
        }
    }
    auto r = ok("analyze stratify --format kv --run-a " + f("a.run") + " --run-b " + f("b.run") + " --qrels " +
                f("q.qrels") + " --distances " + f("d.tsv"));
    EXPECT_NE(r.out.find("a_hit_b_hit_mean=0\n"), std::string::npos);
    EXPECT_NE(r.out.find("a_hit_b_miss_mean=1\n"), std::string::npos);
    EXPECT_NE(r.out.find("a_miss_b_hit_mean=2\n"), std::string::npos);
    EXPECT_NE(r.out.find("a_miss_b_miss_mean=3\n"), std::string::npos);
}

TEST_F(Cli, AblationGridAndBaselineRow) {
    ok("synth question --out-dir " + f("q") + " --passages 200 --train 100 --test 50 --pretrain-pairs 300");
    ok("ingest raw --pairs " + f("q/train.jsonl") + " --out " + f("ft.store"));
    ok("ingest raw --pairs " + f("q/pretrain.jsonl") + " --out " + f("pre.store"));
    const std::string task =
        " --passages " + f("q/passages.jsonl") + " --queries " + f("q/test_queries.jsonl") + " --qrels " + f("q/test.qrels");
    auto r = ok("ablate-datasize --pretrain " + f("pre.store") + " --finetune " + f("ft.store") + task +
                " --sizes 0,100,300 --seeds 3 --finetune-steps 10 --workdir " + f("work") + " --out " + f("grid.tsv") +
                small_model());
    auto table = read_text(f("grid.tsv"));
    EXPECT_EQ(table, r.out);
    EXPECT_EQ(count_lines(table), 4u);
    std::istringstream ts(table);
    std::string header, row0;
    std::getline(ts, header);
    std::getline(ts, row0);
    EXPECT_EQ(header, "pretrain_size\tmedian_r20\tseed0_r20");
    // size 0 must equal a plain fine-tuning run from the same seed
    ok("train --store " + f("ft.store") + " --out " + f("base.ckpt") + small_model() + "--seed 3 --total-steps 10");
    ok("index --checkpoint " + f("base.ckpt") + " --passages " + f("q/passages.jsonl") + " --out " + f("base.idx"));
    ok("search dense --checkpoint " + f("base.ckpt") + " --index " + f("base.idx") + " --queries " +
       f("q/test_queries.jsonl") + " --out " + f("base.run"));
    auto ev = ok("eval --format kv --run " + f("base.run") + " --qrels " + f("q/test.qrels"));
    std::smatch m;
    ASSERT_TRUE(std::regex_search(ev.out, m, std::regex("R@20=([^\n]+)")));
    EXPECT_EQ(row0, "0\t" + m[1].str() + "\t" + m[1].str());
}

TEST_F(Cli, PretrainFinetuneReportsBothStages) {
    ok("synth question --out-dir " + f("q") + " --passages 200 --train 100 --test 50 --pretrain-pairs 200");
    ok("ingest raw --pairs " + f("q/train.jsonl") + " --out " + f("ft.store"));
    ok("ingest raw --pairs " + f("q/pretrain.jsonl") + " --out " + f("pre.store"));
    auto r = ok("pretrain-finetune --pretrain " + f("pre.store") + " --finetune " + f("ft.store") + " --passages " +
                f("q/passages.jsonl") + " --queries " + f("q/test_queries.jsonl") + " --qrels " + f("q/test.qrels") +
                " --out-dir " + f("pf") + " --finetune-steps 10" + small_model());
    EXPECT_EQ(r.out.rfind("stage=w/o_FT MRR@10=", 0), 0u);
    EXPECT_NE(r.out.find("\nstage=w/_FT MRR@10="), std::string::npos);
    EXPECT_EQ(load_checkpoint(f("pf/pretrained.ckpt")).step, 25u);
    EXPECT_EQ(load_checkpoint(f("pf/finetuned.ckpt")).step, 10u);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("eval --run " + f("nope.run")).code, 1);
    auto missing = run("eval --run " + f("nope.run") + " --qrels " + f("nope.qrels"));
    EXPECT_EQ(missing.code, 2);
    EXPECT_EQ(count_lines(missing.err), 1u);
    toy();
    auto nan = run("train --store " + f("train.store") + " --out " + f("n.ckpt") + small_model() +
                   "--total-steps 20 --warmup-frac 0 --peak-lr 1e308");
    EXPECT_EQ(nan.code, 3) << nan.err;
    EXPECT_EQ(nan.err.rfind("error: numeric: ", 0), 0u);
}
