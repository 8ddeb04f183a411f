// Benchmark comparing the OpenMP kernels against their serial references:
// vector search (parallel scoring vs single-thread scan) and knowledge
// acquisition (parallel per-patient consolidation vs jobs=1).

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "acr/corpus.hpp"
#include "acr/embedding.hpp"
#include "acr/kb.hpp"
#include "acr/rng.hpp"
#include "acr/synthgen.hpp"
#include "acr/vector_index.hpp"

using namespace acr;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<Chunk> random_chunks(Rng& rng, std::size_t n, std::size_t tokens_per_chunk) {
    std::vector<Chunk> chunks;
    chunks.reserve(n);
    const std::vector<std::string> vocab = {
        "carcinoma", "lesion",   "therapy", "response", "margin",  "biopsy",
        "nodule",    "baseline", "relapse", "remission", "staging", "infusion"};
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        for (std::size_t t = 0; t < tokens_per_chunk; ++t) {
            if (t) text += ' ';
            text += vocab[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(vocab.size()) - 1))];
        }
        char id[32];
        std::snprintf(id, sizeof(id), "c%08zu", i);
        chunks.push_back(Chunk{id, "p" + std::to_string(i % 997), "d" + std::to_string(i), 0,
                               tokens_per_chunk, std::move(text)});
    }
    return chunks;
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n_chunks = argc > 1 ? std::stoul(argv[1]) : 50000;
    std::size_t n_queries = argc > 2 ? std::stoul(argv[2]) : 50;
    std::size_t dim = argc > 3 ? std::stoul(argv[3]) : 256;

#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled\n");
#endif

    Rng rng(7);
    BuiltinEmbedder embedder(dim, 7);

    auto t0 = Clock::now();
    const auto chunks = random_chunks(rng, n_chunks, 24);
    const VectorIndex index = build_index(chunks, embedder);
    std::printf("index build: %zu chunks, dim %zu, %.1f ms\n", index.size(), index.dimension(),
                ms_since(t0));

    std::vector<EmbeddingVector> queries;
    for (std::size_t q = 0; q < n_queries; ++q)
        queries.push_back(embed_builtin("relapse staging report " + std::to_string(q), dim, 7));

    t0 = Clock::now();
    std::size_t checksum_serial = 0;
    for (const auto& q : queries) checksum_serial += index.search_serial(q, 1000).size();
    const double serial_ms = ms_since(t0);

    t0 = Clock::now();
    std::size_t checksum_parallel = 0;
    for (const auto& q : queries) checksum_parallel += index.search(q, 1000).size();
    const double parallel_ms = ms_since(t0);

    bool identical = checksum_serial == checksum_parallel;
    for (const auto& q : queries) {
        const auto a = index.search_serial(q, 100);
        const auto b = index.search(q, 100);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].chunk_id != b[i].chunk_id || a[i].score != b[i].score) identical = false;
        }
    }
    std::printf("search top-1000 x %zu: serial %.1f ms, parallel %.1f ms, speedup %.2fx, %s\n",
                n_queries, serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "results identical" : "RESULTS DIFFER");

    // Knowledge acquisition: parallel patients vs single thread.
    GeneratorParams params;
    params.seed = 11;
    params.n_patients = 120;
    params.docs_per_patient = {20, 60, "uniform"};
    const Ontology ontology = gen_ontology(params.seed);
    const SynthOutput synth = gen_patients(params, ontology);

#ifdef _OPENMP
    const int hw_threads = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
    t0 = Clock::now();
    const KnowledgeBase kb_serial = build_kb_from_corpus(synth.corpus, ontology);
    const double kb_serial_ms = ms_since(t0);
#ifdef _OPENMP
    omp_set_num_threads(hw_threads);
#endif
    t0 = Clock::now();
    const KnowledgeBase kb_parallel = build_kb_from_corpus(synth.corpus, ontology);
    const double kb_parallel_ms = ms_since(t0);

    const bool kb_identical = models_to_jsonl(kb_serial) == models_to_jsonl(kb_parallel);
    std::printf("knowledge acquisition x %zu patients: 1 thread %.1f ms, parallel %.1f ms, "
                "speedup %.2fx, %s\n",
                params.n_patients, kb_serial_ms, kb_parallel_ms, kb_serial_ms / kb_parallel_ms,
                kb_identical ? "models identical" : "MODELS DIFFER");

    return identical && kb_identical ? 0 : 1;
}
