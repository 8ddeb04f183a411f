#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acr/corpus.hpp"
#include "acr/embedding.hpp"
#include "acr/kb.hpp"
#include "acr/squerl.hpp"
#include "acr/vector_index.hpp"

namespace acr {

/// Chunk texts and document dates for hits coming back from the index (the
/// index itself stores only ids and vectors).
class ChunkStore {
public:
    ChunkStore() = default;
    ChunkStore(const Corpus& corpus, std::size_t chunk_size, std::size_t overlap);

    const Chunk& chunk(const std::string& chunk_id) const;
    Date doc_date(const std::string& doc_id) const;
    std::size_t size() const { return chunks_.size(); }

private:
    std::map<std::string, Chunk> chunks_;
    std::map<std::string, Date> doc_dates_;
};

struct PackedChunk {
    const Chunk* chunk = nullptr;
    double score = 0.0;
    Date authored_at;

    std::size_t tokens() const { return chunk->token_end - chunk->token_start; }
};

/// Grouped per-patient retriever output.
struct PatientHits {
    std::string patient_id;
    double best_score = 0.0;
    std::vector<PackedChunk> hits;  // descending score, ties by chunk_id
};

/// Retriever-only baseline: embed the query, take the top-k chunks, group by
/// patient. Per-patient score = max chunk score; ranking descending, ties by
/// patient_id. Throws on fingerprint mismatch or an empty index.
Cohort retrieve_cohort(const VectorIndex& index, Embedder& embedder,
                       const std::string& query_text, std::size_t k);

/// As retrieve_cohort but also returns the per-patient hit lists needed by the
/// reader stage.
std::vector<PatientHits> retrieve_patient_hits(const VectorIndex& index, Embedder& embedder,
                                               const std::string& query_text, std::size_t k,
                                               const ChunkStore& store);

/// Highest-scoring chunks first, truncated to the token budget and chunk cap.
/// The budget is a prefix rule: packing stops at the first chunk that would
/// overflow it.
std::vector<PackedChunk> pack_patient_context(const std::vector<PackedChunk>& hits,
                                              std::size_t context_budget,
                                              std::size_t max_chunks);

enum class ReaderAnswer { yes, no, indeterminate };

struct ReaderCallResult {
    ReaderAnswer answer = ReaderAnswer::no;
    bool transport_error = false;
    std::string error_message;
};

/// One reader invocation over one evidence group. An internal salvage reprompt
/// (for unparseable output) belongs to the same logical call.
class Reader {
public:
    virtual ~Reader() = default;
    virtual ReaderCallResult call(const std::string& query_text, const QueryAst* query_ast,
                                  const std::vector<PackedChunk>& chunks) = 0;
    virtual std::string name() const = 0;
};

struct ReaderVerdict {
    std::string patient_id;
    bool decision = false;  // yes/no
    std::vector<std::string> evidence_chunk_ids;
    std::size_t calls_used = 0;
    bool indeterminate = false;  // some group was unparseable after reprompt
    bool error = false;          // transport failure; patient excluded, never included
    std::string error_message;
};

struct ReadConfig {
    std::size_t context_budget = 128000;  // pack budget, tokens
    std::size_t max_chunks = SIZE_MAX;    // pack cap
    std::size_t max_calls = 3;            // evidence groups per patient
    std::size_t per_call_budget = 128000; // tokens per reader call
    int parallelism = 0;                  // 0 = OpenMP default
};

/// Splits packed evidence in rank order (no overlap) into at most max_calls
/// groups within the per-call budget; ORs the per-group answers, stopping at
/// the first yes. Chunks beyond the call budget are dropped, never a 4th call.
ReaderVerdict read_patient(const std::string& patient_id, const std::string& query_text,
                           const QueryAst* query_ast, const std::vector<PackedChunk>& packed,
                           Reader& reader, const ReadConfig& config);

struct ReadRunResult {
    Cohort cohort;  // yes-patients; ranking preserves retriever order
    std::vector<ReaderVerdict> verdicts;  // one per retrieved patient, by patient_id
};

/// Retrieve-then-read baseline. Per-patient reads run concurrently; verdicts
/// are merged by patient_id. Failed patients are excluded and flagged.
ReadRunResult retrieve_then_read(const VectorIndex& index, Embedder& embedder,
                                 const ChunkStore& store, Reader& reader,
                                 const std::string& query_text, const QueryAst* query_ast,
                                 std::size_t k, const ReadConfig& config);

/// Deterministic stand-in for an LLM reader: applies the fact extractor to
/// only the supplied chunks, consolidates a throwaway mini patient model and
/// evaluates the query AST on it.
class MockReader final : public Reader {
public:
    MockReader(const Ontology& ontology, ExtractorConfig ex = {}, ConsolidateConfig cc = {});

    ReaderCallResult call(const std::string& query_text, const QueryAst* query_ast,
                          const std::vector<PackedChunk>& chunks) override;
    std::string name() const override { return "mock"; }

private:
    const Ontology& ontology_;
    FactExtractor extractor_;
    ConsolidateConfig consolidate_config_;
};

struct ChatReaderConfig {
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string auth_env;
    double temperature = 0.0;
    double top_p = 0.95;
    int max_attempts = 3;
    int backoff_initial_ms = 100;
    int timeout_sec = 60;
};

/// Chat-completion reader. Prompts with the fixed template (reader_prompt.hpp)
/// and normalizes the reply to YES/NO; an unparseable reply triggers exactly
/// one stricter reprompt before the call is flagged indeterminate.
class ExternalChatReader final : public Reader {
public:
    explicit ExternalChatReader(ChatReaderConfig config);

    ReaderCallResult call(const std::string& query_text, const QueryAst* query_ast,
                          const std::vector<PackedChunk>& chunks) override;
    std::string name() const override { return "external:" + config_.model; }

    int retries() const { return retries_; }

private:
    ChatReaderConfig config_;
    int retries_ = 0;
};

/// Run manifest for a query run: configuration and prompt hashes plus
/// per-patient reader outcomes.
struct RunManifest {
    std::string system;
    std::string config_hash;
    std::string prompt_hash;
    std::vector<ReaderVerdict> verdicts;
    std::vector<std::string> errors;
};

std::string manifest_to_json(const RunManifest& manifest);

}  // namespace acr
