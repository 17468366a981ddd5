// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Retrieval metrics and run/qrels files.
//
// Run file: one line per hit, `query_id passage_id rank score`, queries in
// ascending id order and hits in rank order. Qrels: `query_id passage_id` lines.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dpr/bm25.hpp"
#include "dpr/error.hpp"
#include "dpr/types.hpp"

namespace dpr {

using RelevantSet = std::set<PassageId>;

/// 1 iff a relevant id appears in the first k entries.
inline int recall_at_k(std::span<const PassageId> ranked, const RelevantSet& relevant, std::size_t k) {
    if (k < 1) throw UsageError("recall_at_k: k must be >= 1");
    if (relevant.empty()) throw UsageError("recall_at_k: empty relevant set");
    const std::size_t n = std::min(k, ranked.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (relevant.contains(ranked[i])) return 1;
    }
    return 0;
}

/// Reciprocal rank of the first relevant id within the first k entries, else 0.
inline double mrr_at_k(std::span<const PassageId> ranked, const RelevantSet& relevant, std::size_t k) {
    if (k < 1) throw UsageError("mrr_at_k: k must be >= 1");
    if (relevant.empty()) throw UsageError("mrr_at_k: empty relevant set");
    const std::size_t n = std::min(k, ranked.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (relevant.contains(ranked[i])) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

/// |top-R ∩ relevant| / R with R = |relevant|.
inline double r_precision(std::span<const PassageId> ranked, const RelevantSet& relevant) {
    if (relevant.empty()) throw UsageError("r_precision: empty relevant set");
    const std::size_t r = relevant.size();
    const std::size_t n = std::min(r, ranked.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += relevant.contains(ranked[i]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(r);
}

struct RunEntry {
    PassageId passage_id = 0;
    double score = 0.0;
    std::uint32_t rank = 0;

    friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

/// Ranked output per query. Ranks are 1..n and ids unique within a query.
struct RunFile {
    std::map<QueryId, std::vector<RunEntry>> queries;

    void add(QueryId q, std::span<const ScoredPassage> hits) {
        auto& v = queries[q];
        v.clear();
        for (std::size_t i = 0; i < hits.size(); ++i) {
            v.push_back({hits[i].id, hits[i].score, static_cast<std::uint32_t>(i + 1)});
        }
    }

    [[nodiscard]] std::vector<PassageId> ranked_ids(QueryId q) const {
        std::vector<PassageId> out;
        auto it = queries.find(q);
        if (it != queries.end()) {
            for (const auto& e : it->second) out.push_back(e.passage_id);
        }
        return out;
    }

    void validate() const {
        for (const auto& [q, entries] : queries) {
            std::unordered_set<PassageId> seen;
            for (std::size_t i = 0; i < entries.size(); ++i) {
                if (entries[i].rank != i + 1) {
                    throw DataError("run: ranks of query " + std::to_string(q) + " are not contiguous from 1");
                }
                if (!seen.insert(entries[i].passage_id).second) {
                    throw DataError("run: duplicate passage " + std::to_string(entries[i].passage_id) + " for query " +
                                    std::to_string(q));
                }
            }
        }
    }

    friend bool operator==(const RunFile&, const RunFile&) = default;
};

struct Qrels {
    std::map<QueryId, RelevantSet> relevant;
};

inline std::string format_score(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", s);
    return buf;
}

inline void write_run(const RunFile& run, std::ostream& out) {
    for (const auto& [q, entries] : run.queries) {
        for (const auto& e : entries) {
            out << q << ' ' << e.passage_id << ' ' << e.rank << ' ' << format_score(e.score) << '\n';
        }
    }
}

inline void write_run(const RunFile& run, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path);
    write_run(run, out);
    if (!out) throw IoError("write failed: " + path);
}

inline RunFile read_run(std::istream& in) {
    RunFile run;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream ls(line);
        QueryId q;
        RunEntry e;
        if (!(ls >> q >> e.passage_id >> e.rank >> e.score)) {
            throw DataError("run line " + std::to_string(lineno) + ": expected `query_id passage_id rank score`");
        }
        run.queries[q].push_back(e);
    }
    for (auto& [q, entries] : run.queries) {
        std::stable_sort(entries.begin(), entries.end(), [](const RunEntry& a, const RunEntry& b) { return a.rank < b.rank; });
    }
    run.validate();
    return run;
}

inline RunFile read_run(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_run(in);
}

inline Qrels read_qrels(std::istream& in) {
    Qrels qr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream ls(line);
        QueryId q;
        PassageId p;
        if (!(ls >> q >> p)) throw DataError("qrels line " + std::to_string(lineno) + ": expected `query_id passage_id`");
        qr.relevant[q].insert(p);
    }
    return qr;
}

inline Qrels read_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_qrels(in);
}

inline void write_qrels(const Qrels& qrels, std::ostream& out) {
    for (const auto& [q, rel] : qrels.relevant) {
        for (auto p : rel) out << q << ' ' << p << '\n';
    }
}

struct MetricSelection {
    bool mrr10 = true;
    bool r5 = true;
    bool r20 = true;
    bool r100 = true;
    bool rprec = true;
};

struct QueryMetrics {
    QueryId query = 0;
    double mrr10 = 0.0;
    double r5 = 0.0;
    double r20 = 0.0;
    double r100 = 0.0;
    double rprec = 0.0;
    bool in_run = true;
};

/// Per-query values and their macro averages.
struct EvalReport {
    MetricSelection selection;
    std::vector<QueryMetrics> per_query;
    QueryMetrics mean;
    std::size_t missing_from_run = 0;

    [[nodiscard]] std::size_t num_queries() const { return per_query.size(); }
};

/// Every qrels query is scored; queries absent from the run score 0 and are
/// counted. A run query unknown to qrels is a DataError.
inline EvalReport evaluate(const RunFile& run, const Qrels& qrels, MetricSelection sel = {}) {
    for (const auto& [q, entries] : run.queries) {
        if (!qrels.relevant.contains(q)) {
            throw DataError("run query " + std::to_string(q) + " has no relevance judgments");
        }
    }
    EvalReport rep;
    rep.selection = sel;
    rep.mean.query = 0;
    for (const auto& [q, rel] : qrels.relevant) {
        if (rel.empty()) throw DataError("qrels query " + std::to_string(q) + " has no relevant passages");
        QueryMetrics m;
        m.query = q;
        m.in_run = run.queries.contains(q);
        if (!m.in_run) ++rep.missing_from_run;
        auto ranked = run.ranked_ids(q);
        if (sel.mrr10) m.mrr10 = mrr_at_k(ranked, rel, 10);
        if (sel.r5) m.r5 = recall_at_k(ranked, rel, 5);
        if (sel.r20) m.r20 = recall_at_k(ranked, rel, 20);
        if (sel.r100) m.r100 = recall_at_k(ranked, rel, 100);
        if (sel.rprec) m.rprec = r_precision(ranked, rel);
        rep.per_query.push_back(m);
    }
    if (!rep.per_query.empty()) {
        const auto n = static_cast<double>(rep.per_query.size());
        for (const auto& m : rep.per_query) {
            rep.mean.mrr10 += m.mrr10;
            rep.mean.r5 += m.r5;
            rep.mean.r20 += m.r20;
            rep.mean.r100 += m.r100;
            rep.mean.rprec += m.rprec;
        }
        rep.mean.mrr10 /= n;
        rep.mean.r5 /= n;
        rep.mean.r20 /= n;
        rep.mean.r100 /= n;
        rep.mean.rprec /= n;
    }
    return rep;
}

namespace detail {

inline std::vector<std::pair<std::string, double>> selected_means(const EvalReport& r) {
    std::vector<std::pair<std::string, double>> out;
    if (r.selection.mrr10) out.emplace_back("MRR@10", r.mean.mrr10);
    if (r.selection.r5) out.emplace_back("R@5", r.mean.r5);
    if (r.selection.r20) out.emplace_back("R@20", r.mean.r20);
    if (r.selection.r100) out.emplace_back("R@100", r.mean.r100);
    if (r.selection.rprec) out.emplace_back("R-Prec", r.mean.rprec);
    return out;
}

}  // namespace detail

/// Aligned two-row table: metric names, then macro averages.
inline std::string format_report_table(const EvalReport& r) {
    auto cols = detail::selected_means(r);
    std::ostringstream os;
    char buf[64];
    os << "queries " << r.num_queries() << " (missing from run: " << r.missing_from_run << ")\n";
    for (const auto& [name, v] : cols) {
        std::snprintf(buf, sizeof buf, "%10s", name.c_str());
        os << buf;
    }
    os << '\n';
    for (const auto& [name, v] : cols) {
        std::snprintf(buf, sizeof buf, "%10.4f", v);
        os << buf;
    }
    os << '\n';
    return os.str();
}

/// `key=value` lines for scripts.
inline std::string format_report_kv(const EvalReport& r) {
    std::ostringstream os;
    os << "queries=" << r.num_queries() << '\n' << "missing_from_run=" << r.missing_from_run << '\n';
    for (const auto& [name, v] : detail::selected_means(r)) os << name << '=' << format_score(v) << '\n';
    return os.str();
}

}  // namespace dpr
