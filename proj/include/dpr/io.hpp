// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

// Line-delimited JSON readers and writers for corpora.
//
//   passages  {"id": u64, "title": str?, "text": str}
//   queries   {"id": u64, "text": str}
//   documents {"id": u64, "title": str, "paragraphs": [str]}
//   qa        {"question": str, "answer": str, "passage_id": u64}
//   dialogue  {"context": [str], "response": str}
//   raw pairs {"query_text": str, "positive_text": str, "positive_title": str?,
//              "negative_texts": [str]?, "negative_ids": [u64]?, "query_id": u64?,
//              "positive_id": u64?}

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpr/error.hpp"
#include "dpr/pretrain_tasks.hpp"
#include "dpr/types.hpp"

namespace dpr {

namespace detail {

inline void for_each_json_line(const std::string& path, const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            fn(j, lineno);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

}  // namespace detail

inline std::vector<Passage> read_passages(const std::string& path) {
    std::vector<Passage> out;
    detail::for_each_json_line(path, [&](const nlohmann::json& j, std::size_t) {
        Passage p;
        p.id = j.at("id").get<PassageId>();
        p.title = detail::optional_string(j, "title");
        p.text = j.at("text").get<std::string>();
        out.push_back(std::move(p));
    });
    return out;
}

inline std::vector<Query> read_queries(const std::string& path) {
    std::vector<Query> out;
    detail::for_each_json_line(path, [&](const nlohmann::json& j, std::size_t) {
        out.push_back({j.at("id").get<QueryId>(), j.at("text").get<std::string>()});
    });
    return out;
}

inline std::vector<Document> read_documents(const std::string& path) {
    std::vector<Document> out;
    detail::for_each_json_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
        Document d;
        d.id = j.at("id").get<std::uint64_t>();
        d.title = j.value("title", std::string());
        d.paragraphs = j.at("paragraphs").get<std::vector<std::string>>();
        if (d.paragraphs.empty()) throw DataError(path + ":" + std::to_string(lineno) + ": document without paragraphs");
        out.push_back(std::move(d));
    });
    return out;
}

inline std::vector<QARecord> read_qa_records(const std::string& path) {
    std::vector<QARecord> out;
    detail::for_each_json_line(path, [&](const nlohmann::json& j, std::size_t) {
        out.push_back({j.at("question").get<std::string>(), j.value("answer", std::string()),
                       j.at("passage_id").get<PassageId>()});
    });
    return out;
}

inline std::vector<DialogueThread> read_dialogue(const std::string& path) {
    std::vector<DialogueThread> out;
    detail::for_each_json_line(path, [&](const nlohmann::json& j, std::size_t) {
        out.push_back({j.at("context").get<std::vector<std::string>>(), j.at("response").get<std::string>()});
    });
    return out;
}

/// Raw (query, positive, negatives) records. Missing ids default to the line
/// ordinal for queries and a content hash for passages.
inline std::vector<TrainPair> read_raw_pairs(const std::string& path) {
    std::vector<TrainPair> out;
    detail::for_each_json_line(path, [&](const nlohmann::json& j, std::size_t) {
        TrainPair p;
        p.query.id = j.value("query_id", static_cast<QueryId>(out.size()));
        p.query.text = j.at("query_text").get<std::string>();
        p.positive.title = detail::optional_string(j, "positive_title");
        p.positive.text = j.at("positive_text").get<std::string>();
        p.positive.id = j.contains("positive_id") ? j.at("positive_id").get<PassageId>()
                                                  : content_id(p.positive.title, p.positive.text);
        if (auto it = j.find("negative_texts"); it != j.end()) {
            std::vector<PassageId> ids;
            if (j.contains("negative_ids")) ids = j.at("negative_ids").get<std::vector<PassageId>>();
            if (!ids.empty() && ids.size() != it->size()) throw DataError("negative_ids must align with negative_texts");
            for (std::size_t k = 0; k < it->size(); ++k) {
                Passage n;
                n.text = (*it)[k].get<std::string>();
                n.id = ids.empty() ? content_id(std::nullopt, n.text) : ids[k];
                if (n.id != p.positive.id) p.hard_negatives.push_back(std::move(n));
            }
        }
        out.push_back(std::move(p));
    });
    return out;
}

inline nlohmann::json passage_json(const Passage& p) {
    nlohmann::json j{{"id", p.id}, {"text", p.text}};
    if (p.title) j["title"] = *p.title;
    return j;
}

template <typename Range, typename ToJson>
void write_jsonl(const std::string& path, const Range& items, ToJson to_json) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path);
    for (const auto& it : items) out << to_json(it).dump() << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline void write_passages(const std::string& path, std::span<const Passage> passages) {
    write_jsonl(path, passages, passage_json);
}

inline void write_queries(const std::string& path, std::span<const Query> queries) {
    write_jsonl(path, queries, [](const Query& q) { return nlohmann::json{{"id", q.id}, {"text", q.text}}; });
}

inline void write_documents(const std::string& path, std::span<const Document> docs) {
    write_jsonl(path, docs, [](const Document& d) {
        return nlohmann::json{{"id", d.id}, {"title", d.title}, {"paragraphs", d.paragraphs}};
    });
}

inline void write_raw_pairs(const std::string& path, std::span<const TrainPair> pairs) {
    write_jsonl(path, pairs, [](const TrainPair& p) {
        nlohmann::json j{{"query_id", p.query.id}, {"query_text", p.query.text}, {"positive_id", p.positive.id},
                         {"positive_text", p.positive.text}};
        if (p.positive.title) j["positive_title"] = *p.positive.title;
        auto negs = nlohmann::json::array();
        auto ids = nlohmann::json::array();
        for (const auto& n : p.hard_negatives) {
            negs.push_back(n.text);
            ids.push_back(n.id);
        }
        j["negative_texts"] = negs;
        j["negative_ids"] = ids;
        return j;
    });
}

}  // namespace dpr
