#include "acr/vector_index.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "acr/error.hpp"
#include "acr/io.hpp"

namespace acr {

namespace {

constexpr char kMagic[8] = {'A', 'C', 'R', 'V', 'I', 'D', 'X', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

struct Cursor {
    const std::string& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) throw DataError("index file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

std::vector<SearchHit> VectorIndex::select_top_k(const std::vector<double>& scores,
                                                 std::size_t k) const {
    const std::size_t n = size();
    k = std::min(k, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return chunk_ids_[a] < chunk_ids_[b];
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      better);
    std::vector<SearchHit> hits;
    hits.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t idx = order[i];
        hits.push_back({chunk_ids_[idx], patient_ids_[idx], scores[idx]});
    }
    return hits;
}

std::vector<SearchHit> VectorIndex::search(const EmbeddingVector& query, std::size_t k) const {
    if (query.size() != dim_)
        throw DataError("query dimension " + std::to_string(query.size()) +
                        " != index dimension " + std::to_string(dim_));
    if (k < 1) throw DataError("k must be >= 1");
    const std::size_t n = size();
    std::vector<double> scores(n);
    const double* q = query.data();
    // Parallel over entries; each score is computed by one thread in a fixed
    // dimension order, so results are bit-identical to the serial path.
    #pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const double* v = vectors_.data() + static_cast<std::size_t>(i) * dim_;
        double s = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) s += q[j] * v[j];
        scores[static_cast<std::size_t>(i)] = s;
    }
    return select_top_k(scores, k);
}

std::vector<SearchHit> VectorIndex::search_serial(const EmbeddingVector& query,
                                                  std::size_t k) const {
    if (query.size() != dim_)
        throw DataError("query dimension " + std::to_string(query.size()) +
                        " != index dimension " + std::to_string(dim_));
    if (k < 1) throw DataError("k must be >= 1");
    const std::size_t n = size();
    std::vector<double> scores(n);
    const double* q = query.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* v = vectors_.data() + i * dim_;
        double s = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) s += q[j] * v[j];
        scores[i] = s;
    }
    return select_top_k(scores, k);
}

VectorIndex build_index(const std::vector<Chunk>& chunks, Embedder& embedder) {
    if (chunks.empty()) throw DataError("cannot build an index from zero chunks");

    std::vector<std::size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return chunks[a].chunk_id < chunks[b].chunk_id;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (chunks[order[i - 1]].chunk_id == chunks[order[i]].chunk_id)
            throw DataError("duplicate chunk_id '" + chunks[order[i]].chunk_id + "'");
    }

    VectorIndex index;
    index.chunk_ids_.resize(chunks.size());
    index.patient_ids_.resize(chunks.size());
    index.doc_ids_.resize(chunks.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Chunk& c = chunks[order[i]];
        index.chunk_ids_[i] = c.chunk_id;
        index.patient_ids_[i] = c.patient_id;
        index.doc_ids_[i] = c.doc_id;
    }

    // Batched so an embedder failure can be attributed to a chunk; the builtin
    // embedder parallelizes within a batch and results land in chunk_id order.
    constexpr std::size_t kBatch = 512;
    for (std::size_t begin = 0; begin < order.size(); begin += kBatch) {
        const std::size_t end = std::min(begin + kBatch, order.size());
        std::vector<std::string> texts;
        texts.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) texts.push_back(chunks[order[i]].text);
        std::vector<EmbeddingVector> vectors;
        try {
            vectors = embedder.embed(texts);
        } catch (const std::exception& e) {
            throw DataError("embedding failed in batch starting at chunk '" +
                            index.chunk_ids_[begin] + "': " + e.what());
        }
        if (vectors.size() != texts.size())
            throw DataError("embedder returned " + std::to_string(vectors.size()) +
                            " vectors for " + std::to_string(texts.size()) + " texts");
        if (index.dim_ == 0) {
            index.dim_ = vectors.front().size();
            index.vectors_.assign(chunks.size() * index.dim_, 0.0);
        }
        for (std::size_t i = begin; i < end; ++i) {
            const EmbeddingVector& v = vectors[i - begin];
            if (v.size() != index.dim_)
                throw DataError("embedder returned mixed dimensions at chunk '" +
                                index.chunk_ids_[i] + "'");
            std::copy(v.begin(), v.end(), index.vectors_.begin() + i * index.dim_);
        }
    }

    index.fingerprint_ = embedder.fingerprint();
    return index;
}

std::string VectorIndex::serialize() const {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(dim_));
    put_u64(out, size());
    put_str(out, fingerprint_);
    for (std::size_t i = 0; i < size(); ++i) {
        put_str(out, chunk_ids_[i]);
        put_str(out, patient_ids_[i]);
        put_str(out, doc_ids_[i]);
    }
    for (double v : vectors_) put_f64(out, v);
    return out;
}

VectorIndex VectorIndex::deserialize(const std::string& bytes) {
    Cursor cur{bytes};
    cur.need(sizeof(kMagic));
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError("not an index file (bad magic)");
    cur.pos = sizeof(kMagic);
    const std::uint32_t version = cur.u32();
    if (version != kVersion)
        throw DataError("unsupported index version " + std::to_string(version));
    VectorIndex index;
    index.dim_ = cur.u32();
    const std::uint64_t count = cur.u64();
    index.fingerprint_ = cur.str();
    index.chunk_ids_.reserve(count);
    index.patient_ids_.reserve(count);
    index.doc_ids_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        index.chunk_ids_.push_back(cur.str());
        index.patient_ids_.push_back(cur.str());
        index.doc_ids_.push_back(cur.str());
    }
    index.vectors_.resize(count * index.dim_);
    for (double& v : index.vectors_) v = cur.f64();
    if (cur.pos != bytes.size()) throw DataError("trailing bytes in index file");
    return index;
}

void VectorIndex::save(const std::string& path) const { write_file_atomic(path, serialize()); }

VectorIndex VectorIndex::load(const std::string& path) { return deserialize(read_file(path)); }

}  // namespace acr
