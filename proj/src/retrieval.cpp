#include "acr/retrieval.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "acr/error.hpp"
#include "acr/http_client.hpp"
#include "acr/reader_prompt.hpp"
#include "acr/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace acr {

ChunkStore::ChunkStore(const Corpus& corpus, std::size_t chunk_size, std::size_t overlap) {
    for (auto& chunk : chunk_corpus(corpus, chunk_size, overlap)) {
        const std::string id = chunk.chunk_id;
        chunks_.emplace(id, std::move(chunk));
    }
    for (const auto& [pid, docs] : corpus.patients) {
        for (const auto& doc : docs) doc_dates_.emplace(doc.doc_id, doc.authored_at);
    }
}

const Chunk& ChunkStore::chunk(const std::string& chunk_id) const {
    auto it = chunks_.find(chunk_id);
    if (it == chunks_.end()) throw DataError("unknown chunk_id '" + chunk_id + "'");
    return it->second;
}

Date ChunkStore::doc_date(const std::string& doc_id) const {
    auto it = doc_dates_.find(doc_id);
    if (it == doc_dates_.end()) throw DataError("unknown doc_id '" + doc_id + "'");
    return it->second;
}

namespace {

std::vector<SearchHit> checked_search(const VectorIndex& index, Embedder& embedder,
                                      const std::string& query_text, std::size_t k) {
    if (index.size() == 0) throw DataError("cannot query an empty index");
    const EmbeddingVector query_vec = embedder.embed_one(query_text);
    if (embedder.fingerprint() != index.fingerprint())
        throw DataError("embedder fingerprint '" + embedder.fingerprint() +
                        "' does not match index fingerprint '" + index.fingerprint() + "'");
    return index.search(query_vec, k);
}

}  // namespace

Cohort retrieve_cohort(const VectorIndex& index, Embedder& embedder,
                       const std::string& query_text, std::size_t k) {
    const auto hits = checked_search(index, embedder, query_text, k);
    std::map<std::string, double> best;  // patient -> max chunk score
    for (const auto& hit : hits) {
        auto [it, inserted] = best.emplace(hit.patient_id, hit.score);
        if (!inserted && hit.score > it->second) it->second = hit.score;
    }
    Cohort cohort;
    cohort.patient_ids.reserve(best.size());
    for (const auto& [pid, score] : best) cohort.patient_ids.push_back(pid);
    std::vector<Cohort::Ranked> ranking;
    ranking.reserve(best.size());
    for (const auto& [pid, score] : best) ranking.push_back({pid, score});
    std::stable_sort(ranking.begin(), ranking.end(),
                     [](const Cohort::Ranked& a, const Cohort::Ranked& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.patient_id < b.patient_id;
                     });
    cohort.ranking = std::move(ranking);
    return cohort;
}

std::vector<PatientHits> retrieve_patient_hits(const VectorIndex& index, Embedder& embedder,
                                               const std::string& query_text, std::size_t k,
                                               const ChunkStore& store) {
    const auto hits = checked_search(index, embedder, query_text, k);
    std::map<std::string, PatientHits> grouped;
    for (const auto& hit : hits) {
        PatientHits& ph = grouped[hit.patient_id];
        ph.patient_id = hit.patient_id;
        const Chunk& chunk = store.chunk(hit.chunk_id);
        ph.hits.push_back({&chunk, hit.score, store.doc_date(chunk.doc_id)});
        ph.best_score = std::max(ph.best_score, hit.score);
    }
    std::vector<PatientHits> out;
    out.reserve(grouped.size());
    for (auto& [pid, ph] : grouped) {
        std::stable_sort(ph.hits.begin(), ph.hits.end(),
                         [](const PackedChunk& a, const PackedChunk& b) {
                             if (a.score != b.score) return a.score > b.score;
                             return a.chunk->chunk_id < b.chunk->chunk_id;
                         });
        out.push_back(std::move(ph));
    }
    // Retriever patient order: best score descending, ties by patient_id.
    std::stable_sort(out.begin(), out.end(), [](const PatientHits& a, const PatientHits& b) {
        if (a.best_score != b.best_score) return a.best_score > b.best_score;
        return a.patient_id < b.patient_id;
    });
    return out;
}

std::vector<PackedChunk> pack_patient_context(const std::vector<PackedChunk>& hits,
                                              std::size_t context_budget,
                                              std::size_t max_chunks) {
    std::vector<PackedChunk> sorted = hits;
    std::stable_sort(sorted.begin(), sorted.end(), [](const PackedChunk& a, const PackedChunk& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk->chunk_id < b.chunk->chunk_id;
    });
    std::vector<PackedChunk> packed;
    std::size_t used = 0;
    for (const auto& hit : sorted) {
        if (packed.size() >= max_chunks) break;
        if (used + hit.tokens() > context_budget) break;
        used += hit.tokens();
        packed.push_back(hit);
    }
    return packed;
}

namespace {

std::size_t group_tokens(const std::vector<PackedChunk>& group) {
    std::size_t total = 0;
    for (const auto& hit : group) total += hit.tokens();
    return total;
}

}  // namespace

ReaderVerdict read_patient(const std::string& patient_id, const std::string& query_text,
                           const QueryAst* query_ast, const std::vector<PackedChunk>& packed,
                           Reader& reader, const ReadConfig& config) {
    ReaderVerdict verdict;
    verdict.patient_id = patient_id;
    if (packed.empty()) return verdict;  // no evidence: no, zero calls
    if (config.max_calls < 1) throw DataError("max_calls must be >= 1");

    // Rank-order split, no overlap; groups past max_calls are dropped.
    std::vector<std::vector<PackedChunk>> groups;
    for (const auto& hit : packed) {
        const bool fits = !groups.empty() && groups.back().size() > 0 &&
                          group_tokens(groups.back()) + hit.tokens() <= config.per_call_budget;
        if (fits) {
            groups.back().push_back(hit);
        } else {
            if (groups.size() == config.max_calls) break;
            groups.push_back({hit});
        }
    }

    bool any_indeterminate = false;
    for (const auto& group : groups) {
        for (const auto& hit : group) verdict.evidence_chunk_ids.push_back(hit.chunk->chunk_id);
        const ReaderCallResult result = reader.call(query_text, query_ast, group);
        ++verdict.calls_used;
        if (result.transport_error) {
            verdict.error = true;
            verdict.error_message = result.error_message;
            verdict.decision = false;
            return verdict;
        }
        if (result.answer == ReaderAnswer::yes) {
            verdict.decision = true;  // OR semantics, short-circuit
            return verdict;
        }
        if (result.answer == ReaderAnswer::indeterminate) any_indeterminate = true;
    }
    verdict.decision = false;
    verdict.indeterminate = any_indeterminate;
    return verdict;
}

ReadRunResult retrieve_then_read(const VectorIndex& index, Embedder& embedder,
                                 const ChunkStore& store, Reader& reader,
                                 const std::string& query_text, const QueryAst* query_ast,
                                 std::size_t k, const ReadConfig& config) {
    const auto patients = retrieve_patient_hits(index, embedder, query_text, k, store);

    std::vector<ReaderVerdict> verdicts(patients.size());
    std::string failure;
    int threads = 0;
#ifdef _OPENMP
    threads = config.parallelism > 0 ? config.parallelism : omp_get_max_threads();
#endif
    (void)threads;
    #pragma omp parallel for schedule(dynamic) num_threads(threads > 0 ? threads : 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(patients.size()); ++i) {
        try {
            const auto& ph = patients[static_cast<std::size_t>(i)];
            const auto packed =
                pack_patient_context(ph.hits, config.context_budget, config.max_chunks);
            verdicts[static_cast<std::size_t>(i)] =
                read_patient(ph.patient_id, query_text, query_ast, packed, reader, config);
        } catch (const std::exception& e) {
            #pragma omp critical
            if (failure.empty()) failure = e.what();
        }
    }
    if (!failure.empty()) throw DataError("retrieve-then-read failed: " + failure);

    ReadRunResult result;
    result.verdicts = std::move(verdicts);
    std::vector<Cohort::Ranked> ranking;
    for (std::size_t i = 0; i < patients.size(); ++i) {
        if (result.verdicts[i].decision)
            ranking.push_back({patients[i].patient_id, patients[i].best_score});
    }
    // patients[] is already in retriever order; survivors keep it.
    for (const auto& r : ranking) result.cohort.patient_ids.push_back(r.patient_id);
    std::sort(result.cohort.patient_ids.begin(), result.cohort.patient_ids.end());
    result.cohort.ranking = std::move(ranking);
    return result;
}

MockReader::MockReader(const Ontology& ontology, ExtractorConfig ex, ConsolidateConfig cc)
    : ontology_(ontology), extractor_(ontology, std::move(ex)), consolidate_config_(cc) {}

ReaderCallResult MockReader::call(const std::string& query_text, const QueryAst* query_ast,
                                  const std::vector<PackedChunk>& chunks) {
    (void)query_text;
    if (!query_ast) throw DataError("mock reader requires a parsed query AST");
    std::vector<Fact> facts;
    for (const auto& hit : chunks) {
        Document mini;
        mini.patient_id = hit.chunk->patient_id;
        mini.doc_id = hit.chunk->chunk_id;  // provenance points at the chunk
        mini.authored_at = hit.authored_at;
        mini.doc_type = "chunk";
        mini.text = hit.chunk->text;
        auto extracted = extractor_.extract(mini);
        facts.insert(facts.end(), std::make_move_iterator(extracted.begin()),
                     std::make_move_iterator(extracted.end()));
    }
    std::stable_sort(facts.begin(), facts.end(), fact_order_less);
    const PatientModel mini_model = consolidate("reader", facts, ontology_, consolidate_config_);
    ReaderCallResult result;
    result.answer = patient_satisfies(*query_ast, mini_model, ontology_) ? ReaderAnswer::yes
                                                                         : ReaderAnswer::no;
    return result;
}

namespace {

std::string render_chunk_block(const std::vector<PackedChunk>& chunks) {
    std::string block;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        block += "[" + std::to_string(i + 1) + "] (" + chunks[i].authored_at.to_string() + ") " +
                 chunks[i].chunk->text + "\n";
    }
    return block;
}

std::string substitute(std::string text, const std::string& key, const std::string& value) {
    const std::size_t at = text.find(key);
    if (at != std::string::npos) text.replace(at, key.size(), value);
    return text;
}

std::optional<ReaderAnswer> parse_yes_no(const std::string& reply) {
    std::string word;
    for (char c : reply) {
        if (std::isalpha(static_cast<unsigned char>(c)))
            word += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        else if (!word.empty())
            break;
    }
    if (word == "YES") return ReaderAnswer::yes;
    if (word == "NO") return ReaderAnswer::no;
    return std::nullopt;
}

}  // namespace

ExternalChatReader::ExternalChatReader(ChatReaderConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw UsageError("external reader: base_url not configured");
}

ReaderCallResult ExternalChatReader::call(const std::string& query_text,
                                          const QueryAst* query_ast,
                                          const std::vector<PackedChunk>& chunks) {
    (void)query_ast;
    const std::string user = substitute(
        substitute(kReaderUserTemplate, "{QUERY}", query_text), "{CHUNKS}",
        render_chunk_block(chunks));

    auto request_once = [&](bool reprompt) -> std::string {
        nlohmann::json body;
        body["model"] = config_.model;
        body["temperature"] = config_.temperature;
        body["top_p"] = config_.top_p;
        body["messages"] = nlohmann::json::array();
        body["messages"].push_back({{"role", "system"}, {"content", kReaderSystemPrompt}});
        body["messages"].push_back({{"role", "user"}, {"content", user}});
        if (reprompt)
            body["messages"].push_back({{"role", "user"}, {"content", kReaderReprompt}});
        HttpRequestOptions opts;
        opts.base_url = config_.base_url;
        opts.path = config_.path;
        opts.auth_env = config_.auth_env;
        opts.max_attempts = config_.max_attempts;
        opts.backoff_initial_ms = config_.backoff_initial_ms;
        opts.timeout_sec = config_.timeout_sec;
        const HttpResult res = http_post_json(opts, body.dump(), retries_);
        nlohmann::json payload = nlohmann::json::parse(res.body, nullptr, false);
        if (payload.is_discarded() || !payload.contains("choices") ||
            payload["choices"].empty())
            throw ExternalServiceError("chat response has no choices: " +
                                       res.body.substr(0, 200));
        return payload["choices"][0].at("message").at("content").get<std::string>();
    };

    ReaderCallResult result;
    try {
        if (auto answer = parse_yes_no(request_once(false))) {
            result.answer = *answer;
            return result;
        }
        if (auto answer = parse_yes_no(request_once(true))) {
            result.answer = *answer;
            return result;
        }
        result.answer = ReaderAnswer::indeterminate;
        return result;
    } catch (const ExternalServiceError& e) {
        result.transport_error = true;
        result.error_message = e.what();
        return result;
    }
}

std::string manifest_to_json(const RunManifest& manifest) {
    nlohmann::ordered_json j;
    j["system"] = manifest.system;
    j["config_hash"] = manifest.config_hash;
    j["prompt_hash"] = manifest.prompt_hash;
    j["verdicts"] = nlohmann::ordered_json::array();
    for (const auto& v : manifest.verdicts) {
        nlohmann::ordered_json vj;
        vj["patient_id"] = v.patient_id;
        vj["decision"] = v.decision ? "yes" : "no";
        vj["calls_used"] = v.calls_used;
        if (v.indeterminate) vj["indeterminate"] = true;
        if (v.error) {
            vj["error"] = true;
            vj["error_message"] = v.error_message;
        }
        j["verdicts"].push_back(vj);
    }
    j["errors"] = manifest.errors;
    return j.dump(2) + "\n";
}

}  // namespace acr
