#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acr/corpus.hpp"
#include "acr/embedding.hpp"

namespace acr {

struct SearchHit {
    std::string chunk_id;
    std::string patient_id;
    double score = 0.0;
};

/// Dense exact-cosine index. Entries are sorted by chunk_id and vectors stored
/// contiguously; the built index is immutable and searches are lock-free
/// concurrent reads.
class VectorIndex {
public:
    std::size_t size() const { return chunk_ids_.size(); }
    std::size_t dimension() const { return dim_; }
    const std::string& fingerprint() const { return fingerprint_; }

    const std::string& chunk_id(std::size_t i) const { return chunk_ids_[i]; }
    const std::string& patient_id(std::size_t i) const { return patient_ids_[i]; }
    const std::string& doc_id(std::size_t i) const { return doc_ids_[i]; }
    const double* vector(std::size_t i) const { return vectors_.data() + i * dim_; }

    /// Top-k by cosine similarity, descending, ties broken by ascending
    /// chunk_id. k > size returns all entries ranked. OpenMP-parallel scoring.
    std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k) const;

    /// Single-threaded reference with identical output; kept for tests and the
    /// benchmark target.
    std::vector<SearchHit> search_serial(const EmbeddingVector& query, std::size_t k) const;

    std::string serialize() const;
    static VectorIndex deserialize(const std::string& bytes);

    void save(const std::string& path) const;
    static VectorIndex load(const std::string& path);

    friend VectorIndex build_index(const std::vector<Chunk>& chunks, Embedder& embedder);

private:
    std::vector<SearchHit> select_top_k(const std::vector<double>& scores, std::size_t k) const;

    std::size_t dim_ = 0;
    std::string fingerprint_;
    std::vector<std::string> chunk_ids_;    // sorted ascending
    std::vector<std::string> patient_ids_;  // parallel to chunk_ids_
    std::vector<std::string> doc_ids_;
    std::vector<double> vectors_;  // size() * dim_, row-major
};

/// Embeds all chunks (parallel, merged deterministically by chunk_id) and
/// builds the index. Throws on empty input or duplicate chunk_ids; embedder
/// failures are rethrown with the offending chunk_id.
VectorIndex build_index(const std::vector<Chunk>& chunks, Embedder& embedder);

}  // namespace acr
