// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Pre-training pair generators (inverse cloze, body-first selection) and
// ingestion of question/passage and dialogue corpora.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpr/pair_store.hpp"
#include "dpr/random.hpp"
#include "dpr/text.hpp"
#include "dpr/types.hpp"

namespace dpr {

struct Document {
    std::uint64_t id = 0;
    std::string title;
    std::vector<std::string> paragraphs;
};

struct QARecord {
    std::string question;
    std::string answer;
    PassageId passage_id = 0;
};

struct DialogueThread {
    std::vector<std::string> context;
    std::string response;
};

/// Output of a generator: the pairs plus how many inputs were skipped or dropped.
struct GenResult {
    std::vector<TrainPair> pairs;
    std::size_t skipped = 0;
};

/// Id of paragraph `index` of document `doc_id`.
inline PassageId paragraph_id(std::uint64_t doc_id, std::size_t index) {
    return mix_seed(doc_id) ^ static_cast<std::uint64_t>(index);
}

inline std::string join(std::span<const std::string> parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

/// Inverse cloze task: every sentence of every multi-sentence paragraph becomes a
/// query whose positive is its paragraph. The sentence stays in the positive with
/// probability keep_prob and is removed otherwise. Single-sentence paragraphs are
/// skipped.
inline GenResult gen_ict(std::span<const Document> docs, double keep_prob, std::uint64_t seed) {
    if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) {
        throw UsageError("gen_ict: keep_prob must lie in [0, 1]");
    }
    Rng rng(seed);
    GenResult out;
    std::uint64_t qid = 0;
    for (const auto& doc : docs) {
        for (std::size_t p = 0; p < doc.paragraphs.size(); ++p) {
            auto sentences = split_sentences(doc.paragraphs[p]);
            if (sentences.size() < 2) {
                ++out.skipped;
                continue;
            }
            for (std::size_t s = 0; s < sentences.size(); ++s) {
                bool keep = uniform01(rng) < keep_prob;
                TrainPair pair;
                pair.query = {qid++, sentences[s]};
                pair.positive.id = paragraph_id(doc.id, p);
                if (!doc.title.empty()) pair.positive.title = doc.title;
                if (keep) {
                    pair.positive.text = doc.paragraphs[p];
                } else {
                    std::vector<std::string> rest;
                    rest.reserve(sentences.size() - 1);
                    for (std::size_t j = 0; j < sentences.size(); ++j) {
                        if (j != s) rest.push_back(sentences[j]);
                    }
                    pair.positive.text = join(rest, " ");
                }
                out.pairs.push_back(std::move(pair));
            }
        }
    }
    return out;
}

/// Body-first selection: per pass, one sentence sampled from a document's
/// non-first paragraphs is paired with the first paragraph. Documents with a
/// single paragraph are skipped.
inline GenResult gen_bfs(std::span<const Document> docs, std::uint64_t seed, std::size_t passes = 1) {
    Rng rng(seed);
    GenResult out;
    std::uint64_t qid = 0;
    for (std::size_t pass = 0; pass < passes; ++pass) {
        for (const auto& doc : docs) {
            if (doc.paragraphs.size() < 2) {
                if (pass == 0) ++out.skipped;
                continue;
            }
            std::vector<std::string> body;
            for (std::size_t p = 1; p < doc.paragraphs.size(); ++p) {
                auto s = split_sentences(doc.paragraphs[p]);
                body.insert(body.end(), s.begin(), s.end());
            }
            if (body.empty()) {
                if (pass == 0) ++out.skipped;
                continue;
            }
            TrainPair pair;
            pair.query = {qid++, body[uniform_index(rng, body.size())]};
            pair.positive.id = paragraph_id(doc.id, 0);
            if (!doc.title.empty()) pair.positive.title = doc.title;
            pair.positive.text = doc.paragraphs[0];
            out.pairs.push_back(std::move(pair));
        }
    }
    return out;
}

/// Question -> source passage pairs. Records whose passage id does not resolve
/// are dropped and counted. Hard negatives are left empty for later mining.
inline GenResult ingest_qa_pairs(std::span<const QARecord> records, const PassageCollection& passages) {
    GenResult out;
    std::uint64_t qid = 0;
    for (const auto& rec : records) {
        const Passage* p = passages.find(rec.passage_id);
        if (p == nullptr || words(rec.question).empty()) {
            ++out.skipped;
            ++qid;
            continue;
        }
        TrainPair pair;
        pair.query = {qid++, rec.question};
        pair.positive = *p;
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

/// Builds the query text of a dialogue: all context turns joined by the turn separator.
inline std::string dialogue_query(std::span<const std::string> context) {
    return join(context, std::string(" ") + kTurnSeparator + " ");
}

/// Context -> response pairs. Threads with an empty response or no context are dropped.
/// Query-side truncation (keep the most recent tokens) happens at tokenization.
inline GenResult ingest_dialogue(std::span<const DialogueThread> threads) {
    GenResult out;
    std::uint64_t qid = 0;
    for (const auto& t : threads) {
        bool has_context = false;
        for (const auto& turn : t.context) has_context = has_context || !words(turn).empty();
        if (!has_context || words(t.response).empty()) {
            ++out.skipped;
            ++qid;
            continue;
        }
        TrainPair pair;
        pair.query = {qid++, dialogue_query(t.context)};
        pair.positive.id = content_id(std::nullopt, t.response);
        pair.positive.text = t.response;
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

}  // namespace dpr
