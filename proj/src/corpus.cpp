#include "acr/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "acr/error.hpp"
#include "acr/io.hpp"

namespace acr {

std::size_t Corpus::document_count() const {
    std::size_t n = 0;
    for (const auto& [id, docs] : patients) n += docs.size();
    return n;
}

const Document* Corpus::find_document(const std::string& doc_id) const {
    for (const auto& [pid, docs] : patients) {
        for (const auto& d : docs) {
            if (d.doc_id == doc_id) return &d;
        }
    }
    return nullptr;
}

std::vector<TokenSpan> token_spans(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= n) break;
        std::size_t begin = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        spans.push_back({begin, i});
    }
    return spans;
}

std::vector<std::string_view> tokenize(std::string_view text) {
    std::vector<std::string_view> out;
    for (const auto& s : token_spans(text)) out.push_back(text.substr(s.begin, s.end - s.begin));
    return out;
}

std::size_t token_count(std::string_view text) { return token_spans(text).size(); }

std::vector<Chunk> chunk_document(const Document& doc, std::size_t chunk_size,
                                  std::size_t overlap) {
    if (chunk_size < 1) throw DataError("chunk_size must be >= 1");
    if (overlap >= chunk_size)
        throw DataError("overlap (" + std::to_string(overlap) + ") must be < chunk_size (" +
                        std::to_string(chunk_size) + ")");

    const auto tokens = tokenize(doc.text);
    const std::size_t total = tokens.size();
    std::vector<Chunk> chunks;
    if (total == 0) return chunks;  // whitespace-only text: nothing to cover

    const std::size_t stride = chunk_size - overlap;
    for (std::size_t start = 0, ordinal = 0;; start += stride, ++ordinal) {
        const std::size_t end = std::min(start + chunk_size, total);
        std::string text;
        for (std::size_t i = start; i < end; ++i) {
            if (i > start) text += ' ';
            text.append(tokens[i]);
        }
        char suffix[8];
        std::snprintf(suffix, sizeof(suffix), "%06zu", ordinal);
        chunks.push_back(Chunk{doc.doc_id + ":" + suffix, doc.patient_id, doc.doc_id, start, end,
                               std::move(text)});
        if (end >= total) break;
    }
    return chunks;
}

std::vector<Chunk> chunk_corpus(const Corpus& corpus, std::size_t chunk_size,
                                std::size_t overlap) {
    std::vector<Chunk> all;
    for (const auto& [pid, docs] : corpus.patients) {
        for (const auto& doc : docs) {
            auto chunks = chunk_document(doc, chunk_size, overlap);
            all.insert(all.end(), std::make_move_iterator(chunks.begin()),
                       std::make_move_iterator(chunks.end()));
        }
    }
    return all;
}

namespace {

Document parse_document_record(const nlohmann::json& rec, const std::string& origin,
                               std::size_t line_no) {
    auto where = [&] { return origin + ":" + std::to_string(line_no); };
    for (const char* field : {"patient_id", "doc_id", "authored_at", "doc_type", "text"}) {
        if (!rec.contains(field) || !rec[field].is_string())
            throw DataError(where() + ": missing or non-string field '" + std::string(field) + "'");
    }
    Document doc;
    doc.patient_id = rec["patient_id"].get<std::string>();
    doc.doc_id = rec["doc_id"].get<std::string>();
    doc.doc_type = rec["doc_type"].get<std::string>();
    doc.text = rec["text"].get<std::string>();
    if (doc.patient_id.empty()) throw DataError(where() + ": empty patient_id");
    if (doc.doc_id.empty()) throw DataError(where() + ": empty doc_id");
    if (doc.text.empty()) throw DataError(where() + ": empty text for doc '" + doc.doc_id + "'");
    const auto date = Date::parse(rec["authored_at"].get<std::string>());
    if (!date)
        throw DataError(where() + ": invalid date '" + rec["authored_at"].get<std::string>() +
                        "' for doc '" + doc.doc_id + "'");
    doc.authored_at = *date;
    return doc;
}

}  // namespace

Corpus parse_corpus_jsonl(const std::string& content, const std::string& origin) {
    Corpus corpus;
    std::unordered_map<std::string, std::size_t> seen_doc_ids;  // doc_id -> line
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded())
            throw DataError(origin + ":" + std::to_string(line_no) + ": malformed JSON record");
        Document doc = parse_document_record(rec, origin, line_no);
        auto [it, inserted] = seen_doc_ids.emplace(doc.doc_id, line_no);
        if (!inserted)
            throw DataError(origin + ": duplicate doc_id '" + doc.doc_id + "' at lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no));
        corpus.patients[doc.patient_id].push_back(std::move(doc));
    }
    for (auto& [pid, docs] : corpus.patients) {
        std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) {
            if (a.authored_at != b.authored_at) return a.authored_at < b.authored_at;
            return a.doc_id < b.doc_id;
        });
    }
    return corpus;
}

Corpus load_corpus(const std::string& path) {
    return parse_corpus_jsonl(read_file(path), path);
}

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& [pid, docs] : corpus.patients) {
        for (const auto& doc : docs) {
            nlohmann::ordered_json rec;
            rec["patient_id"] = doc.patient_id;
            rec["doc_id"] = doc.doc_id;
            rec["authored_at"] = doc.authored_at.to_string();
            rec["doc_type"] = doc.doc_type;
            rec["text"] = doc.text;
            out += rec.dump();
            out += '\n';
        }
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    write_file_atomic(path, corpus_to_jsonl(corpus));
}

}  // namespace acr
