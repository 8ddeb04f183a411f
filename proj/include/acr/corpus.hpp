#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "acr/date.hpp"

namespace acr {

struct Document {
    std::string patient_id;
    std::string doc_id;  // globally unique within a corpus
    Date authored_at;
    std::string doc_type;
    std::string text;  // non-empty
};

/// Immutable after load; documents per patient are sorted ascending by
/// (authored_at, doc_id). Safe for concurrent reads.
struct Corpus {
    std::map<std::string, std::vector<Document>> patients;

    std::size_t patient_count() const { return patients.size(); }
    std::size_t document_count() const;
    const Document* find_document(const std::string& doc_id) const;
};

/// Token span as [begin, end) byte offsets into the source text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Maximal runs of non-whitespace characters, in order.
std::vector<TokenSpan> token_spans(std::string_view text);
std::vector<std::string_view> tokenize(std::string_view text);
std::size_t token_count(std::string_view text);

struct Chunk {
    std::string chunk_id;  // doc_id + ":" + zero-padded ordinal
    std::string patient_id;
    std::string doc_id;
    std::size_t token_start = 0;  // inclusive
    std::size_t token_end = 0;    // exclusive
    std::string text;             // covered tokens re-joined with single spaces
};

/// Sliding windows with stride = chunk_size - overlap; the final chunk may be
/// shorter. A document with zero tokens yields no chunks. Throws DataError when
/// overlap >= chunk_size or chunk_size < 1.
std::vector<Chunk> chunk_document(const Document& doc, std::size_t chunk_size,
                                  std::size_t overlap);

/// Chunks for every document of every patient, in corpus iteration order.
std::vector<Chunk> chunk_corpus(const Corpus& corpus, std::size_t chunk_size,
                                std::size_t overlap);

/// Loads a JSONL corpus file (one Document per line, fields patient_id, doc_id,
/// authored_at, doc_type, text). Errors carry the offending line number.
Corpus load_corpus(const std::string& path);

/// Parses corpus records from an in-memory JSONL string (same contract).
Corpus parse_corpus_jsonl(const std::string& content, const std::string& origin = "<memory>");

/// Serializes a corpus back to JSONL, patients and documents in sorted order.
std::string corpus_to_jsonl(const Corpus& corpus);

void save_corpus(const Corpus& corpus, const std::string& path);

}  // namespace acr
