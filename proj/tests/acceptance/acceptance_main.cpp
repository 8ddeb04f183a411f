// Acceptance suite: runs the reference benchmark (seed 42, 1000 patients,
// ~60 docs/patient, 200 queries) end-to-end through all three systems and
// checks every gate at its stated tolerance, one PASS/FAIL line per gate.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "acr/config.hpp"
#include "acr/corpus.hpp"
#include "acr/error.hpp"
#include "acr/eval.hpp"
#include "acr/kb.hpp"
#include "acr/retrieval.hpp"
#include "acr/rng.hpp"
#include "acr/squerl.hpp"
#include "acr/synthgen.hpp"
#include "acr/vector_index.hpp"
#include "support/oracles.hpp"

using namespace acr;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Benchmark {
    GeneratorParams params;
    Ontology ontology;
    SynthOutput synth;
    std::vector<QueryRecord> bank;
    GoldMatrix gold;
    ChunkStore store;
    VectorIndex index;
    std::map<std::string, Cohort> symbolic;
    std::map<std::string, Cohort> retriever;
    std::map<std::string, Cohort> read;
    EvalReport report_symbolic;
    EvalReport report_retriever;
    EvalReport report_read;
    KnowledgeBase kb;
};

Benchmark build_benchmark() {
    Benchmark b;
    b.params.seed = 42;
    b.params.n_patients = 1000;
    b.params.docs_per_patient = {20, 100, "uniform"};  // ~60 mean
    b.params.n_queries = 200;
    b.params.contradiction_length_coupling = true;

    auto t = Clock::now();
    b.ontology = gen_ontology(b.params.seed, b.params.ontology_filler_concepts);
    b.synth = gen_patients(b.params, b.ontology);
    b.bank = gen_query_bank(b.params, b.ontology, b.synth.abstractions);
    b.gold = gen_gold(b.synth.abstractions, b.bank, b.ontology);
    std::printf("[setup] generation: %zu patients, %zu documents, %zu queries (%.1fs)\n",
                b.synth.corpus.patient_count(), b.synth.corpus.document_count(), b.bank.size(),
                seconds_since(t));

    const RunConfig cfg;  // the reference configuration
    t = Clock::now();
    b.store = ChunkStore(b.synth.corpus, cfg.chunk_size, cfg.overlap);
    BuiltinEmbedder embedder(cfg.embedder.dimension, b.params.seed);
    b.index = build_index(chunk_corpus(b.synth.corpus, cfg.chunk_size, cfg.overlap), embedder);
    std::printf("[setup] index: %zu chunks, dim %zu (%.1fs)\n", b.index.size(),
                b.index.dimension(), seconds_since(t));

    t = Clock::now();
    b.kb = build_kb_from_corpus(b.synth.corpus, b.ontology);
    std::printf("[setup] knowledge acquisition (%.1fs)\n", seconds_since(t));

    t = Clock::now();
    for (const auto& rec : b.bank) {
        const auto ast = parse(rec.squerl_text, b.ontology);
        b.symbolic[rec.query_id] = execute(*ast, b.kb, b.ontology);
    }
    std::printf("[run] symbolic: %zu cohorts (%.1fs)\n", b.symbolic.size(), seconds_since(t));

    t = Clock::now();
    for (const auto& rec : b.bank) {
        const std::string& text = rec.nl_text.empty() ? rec.squerl_text : rec.nl_text;
        b.retriever[rec.query_id] = retrieve_cohort(b.index, embedder, text, cfg.top_k_chunks);
    }
    std::printf("[run] retriever-only (%.1fs)\n", seconds_since(t));

    t = Clock::now();
    MockReader reader(b.ontology);
    ReadConfig read_cfg;
    read_cfg.context_budget = cfg.context_budget;
    read_cfg.max_calls = cfg.max_reader_calls;
    read_cfg.per_call_budget = cfg.context_budget;
    for (const auto& rec : b.bank) {
        const std::string& text = rec.nl_text.empty() ? rec.squerl_text : rec.nl_text;
        const auto ast = parse(rec.squerl_text, b.ontology);
        const auto run = retrieve_then_read(b.index, embedder, b.store, reader, text, ast.get(),
                                            cfg.top_k_chunks, read_cfg);
        b.read[rec.query_id] = run.cohort;
    }
    std::printf("[run] retrieve-then-read (%.1fs)\n", seconds_since(t));

    t = Clock::now();
    const auto doc_counts = corpus_doc_counts(b.synth.corpus);
    for (auto [cohorts, report] : {std::pair{&b.symbolic, &b.report_symbolic},
                                   std::pair{&b.retriever, &b.report_retriever},
                                   std::pair{&b.read, &b.report_read}}) {
        EvalInputs inputs{b.bank, b.gold, *cohorts, cfg.alpha, cfg.beta, doc_counts};
        *report = evaluate(inputs);
    }
    b.report_symbolic.system = "symbolic";
    b.report_retriever.system = "retriever";
    b.report_read.system = "read";
    std::printf("[run] evaluation (%.1fs)\n\n", seconds_since(t));
    return b;
}

const CategoryEval& category_of(const EvalReport& report, QueryCategory cat) {
    for (const auto& c : report.categories) {
        if (c.category == cat) return c;
    }
    throw DataError("category missing from report");
}

// -----------------------------------------------------------------------
// criteria

bool criterion_gold_oracle(const Benchmark& b, std::string& detail) {
    const oracle::EligibilityOracle oracle_interp(b.ontology);
    std::vector<Abstraction> slice(b.synth.abstractions.begin(),
                                   b.synth.abstractions.begin() + 50);
    std::size_t pairs = 0, mismatches = 0;
    for (std::size_t qi = 0; qi < 20; ++qi) {
        const auto& rec = b.bank[qi];
        const auto ast = parse(rec.squerl_text, b.ontology);
        const Cohort& gold = b.gold.gold.at(rec.query_id);
        for (const auto& patient : slice) {
            const bool want = oracle_interp.eligible(*ast, patient);
            const bool got = gold.contains(patient.patient_id);
            if (want != got) ++mismatches;
            ++pairs;
        }
    }
    detail = std::to_string(pairs - mismatches) + "/" + std::to_string(pairs) +
             " pair labels agree with the brute-force eligibility interpreter";
    return pairs == 1000 && mismatches == 0;
}

bool criterion_engine_consistency(const Benchmark& b, std::string& detail) {
    const auto rows = consistency_checks(b.bank, b.symbolic);
    std::size_t paraphrase = 0, intersection = 0, subtype = 0, violations = 0;
    for (const auto& row : rows) {
        violations += row.violations + row.violations_rev;
        if (row.kind == "paraphrase") ++paraphrase;
        if (row.kind == "intersection") ++intersection;
        if (row.kind == "subtype") ++subtype;
    }
    detail = std::to_string(paraphrase) + " paraphrase pairs, " + std::to_string(intersection) +
             " intersection pairs, " + std::to_string(subtype) +
             " subtype pairs; total violating patients = " + std::to_string(violations);
    return paraphrase >= 3 && intersection >= 3 && subtype >= 4 && violations == 0;
}

bool criterion_metric_correctness(const Benchmark&, std::string& detail) {
    Rng rng(7777);
    double worst = 0.0;
    for (int round = 0; round < 1000; ++round) {
        std::vector<Confusion> cs;
        const int n = static_cast<int>(rng.uniform_int(1, 10));
        for (int i = 0; i < n; ++i) {
            cs.push_back({static_cast<std::size_t>(rng.uniform_int(0, 50)),
                          static_cast<std::size_t>(rng.uniform_int(0, 50)),
                          static_cast<std::size_t>(rng.uniform_int(0, 50)),
                          static_cast<std::size_t>(rng.uniform_int(0, 50))});
        }
        const Prf macro = macro_prf(cs);
        const auto macro_want = oracle::scalar_macro(cs);
        const Prf micro = micro_prf(cs);
        const auto micro_want = oracle::scalar_micro(cs);
        for (double delta :
             {macro.precision - macro_want.p, macro.recall - macro_want.r,
              macro.f1 - macro_want.f1, micro.precision - micro_want.p,
              micro.recall - micro_want.r, micro.f1 - micro_want.f1})
            worst = std::max(worst, std::abs(delta));
        for (const auto& c : cs) {
            if (c.tp + c.fn > 0)
                worst = std::max(worst,
                                 std::abs(hallucination_ratio(c) - oracle::scalar_hr(c)));
        }
    }
    const bool boundaries = categorize(0, 50, 10) == QueryCategory::zero_result &&
                            categorize(1, 50, 10) == QueryCategory::sparse &&
                            categorize(9, 50, 10) == QueryCategory::sparse &&
                            categorize(10, 50, 10) == QueryCategory::narrow &&
                            categorize(49, 50, 10) == QueryCategory::narrow &&
                            categorize(50, 50, 10) == QueryCategory::broad;
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "max |delta| vs scalar oracle = %.2e over 1000 sets; boundary classes %s",
                  worst, boundaries ? "exact" : "WRONG");
    detail = buf;
    return worst < 1e-12 && boundaries;
}

bool criterion_reader_subset(const Benchmark& b, std::string& detail) {
    std::size_t exceptions = 0;
    for (const auto& rec : b.bank) {
        const auto& read = b.read.at(rec.query_id).patient_ids;
        const auto& retrieved = b.retriever.at(rec.query_id).patient_ids;
        if (!std::includes(retrieved.begin(), retrieved.end(), read.begin(), read.end()))
            ++exceptions;
    }
    detail = "subset law exceptions over " + std::to_string(b.bank.size()) +
             " queries: " + std::to_string(exceptions);
    return exceptions == 0;
}

bool criterion_qualitative_ordering(const Benchmark& b, std::string& detail) {
    const auto& sym = category_of(b.report_symbolic, QueryCategory::broad).cohort;
    const auto& ret = category_of(b.report_retriever, QueryCategory::broad).cohort;
    const auto& rea = category_of(b.report_read, QueryCategory::broad).cohort;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "Broad macro-F1: symbolic %.3f, read %.3f, retriever %.3f; "
                  "read P %.3f vs retriever P %.3f; read R %.3f vs retriever R %.3f",
                  sym.f1, rea.f1, ret.f1, rea.precision, ret.precision, rea.recall, ret.recall);
    detail = buf;
    return sym.f1 > rea.f1 && rea.f1 > ret.f1 && rea.precision > ret.precision &&
           rea.recall <= ret.recall;
}

bool criterion_longitudinal_degradation(const Benchmark& b, std::string& detail) {
    const auto& strata = b.report_read.tercile_strata;
    if (strata.size() != 3) {
        detail = "expected 3 terciles, got " + std::to_string(strata.size());
        return false;
    }
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "read macro-F1 by document-count tercile: bottom %.3f, middle %.3f, top %.3f",
                  strata[0].macro.f1, strata[1].macro.f1, strata[2].macro.f1);
    detail = buf;
    return strata[2].macro.f1 <= strata[0].macro.f1;
}

bool criterion_zero_result_hallucination(const Benchmark& b, std::string& detail) {
    std::size_t zero_queries = 0, symbolic_fp = 0, retriever_with_fp = 0;
    for (const auto& rec : b.bank) {
        if (b.gold.gold.at(rec.query_id).size() != 0) continue;
        ++zero_queries;
        symbolic_fp += fp_count(b.symbolic.at(rec.query_id), b.gold.gold.at(rec.query_id));
        if (fp_count(b.retriever.at(rec.query_id), b.gold.gold.at(rec.query_id)) > 0)
            ++retriever_with_fp;
    }
    // the report must render per-query FP counts for this class
    const std::string md = report_to_markdown(b.report_retriever);
    const bool rendered = md.find("Zero-result queries") != std::string::npos;
    detail = std::to_string(zero_queries) + " zero-result queries; symbolic FP total = " +
             std::to_string(symbolic_fp) + "; retriever FP>0 on " +
             std::to_string(retriever_with_fp) + " of them";
    return zero_queries >= 3 && symbolic_fp == 0 &&
           retriever_with_fp * 2 >= zero_queries && rendered;
}

bool criterion_round_trip(const Benchmark&, std::string& detail) {
    GeneratorParams params;
    params.seed = 42;
    params.n_patients = 100;
    params.docs_per_patient = {20, 100, "uniform"};
    params.contradiction_rate = 0.0;
    params.paraphrase_rate = 1.0;
    const Ontology ontology = gen_ontology(params.seed, params.ontology_filler_concepts);
    const SynthOutput synth = gen_patients(params, ontology);
    const KnowledgeBase kb = build_kb_from_corpus(synth.corpus, ontology);

    using Key = std::tuple<std::string, std::string, std::string, std::string>;
    std::size_t exact = 0;
    for (const auto& abs : synth.abstractions) {
        std::set<Key> expected, got;
        for (const auto& e : abs.events) {
            expected.insert({e.concept_id, to_string(e.polarity),
                             e.time.start ? e.time.start->to_string() : "",
                             e.attributes.count("stage") ? e.attributes.at("stage") : ""});
        }
        for (const auto& e : kb.models.at(abs.patient_id).events) {
            if (e.status != EventStatus::active || e.derived) continue;
            got.insert({e.concept_id, to_string(e.polarity),
                        e.time.start ? e.time.start->to_string() : "",
                        e.attributes.count("stage") ? e.attributes.at("stage") : ""});
        }
        if (expected == got) ++exact;
    }
    detail = std::to_string(exact) +
             "/100 patients reproduce their clean abstraction exactly at "
             "contradiction_rate=0, paraphrase_rate=1";
    return exact == 100;
}

bool criterion_figure_scenario(const Benchmark&, std::string& detail) {
    const Ontology ontology = gen_ontology(42);
    Corpus corpus;
    auto add_doc = [&](const std::string& doc_id, const std::string& date,
                       const std::string& text) {
        Document doc;
        doc.patient_id = "paradox";
        doc.doc_id = doc_id;
        doc.authored_at = *Date::parse(date);
        doc.doc_type = "note";
        doc.text = text;
        corpus.patients["paradox"].push_back(doc);
    };
    add_doc("d1", "2016-03-01", "Patient diagnosed with breast cancer, stage II.");
    add_doc("d2", "2018-06-01", "Underwent hysterectomy. Underwent oophorectomy.");
    add_doc("d3", "2021-02-01", "Patient is pregnant.");

    const auto query = parse("BEFORE(breast_cancer, pregnancy)", ontology);

    // default policy: the surgery-derived absence is retracted
    const KnowledgeBase kb = build_kb_from_corpus(corpus, ontology);
    const auto& model = kb.models.at("paradox");
    std::size_t constraint_conflicts = 0;
    bool absence_retracted = false;
    for (const auto& c : model.conflicts) {
        if (c.kind == "constraint") {
            ++constraint_conflicts;
            const auto& loser = model.events[c.loser];
            if (loser.derived && loser.concept_id == "uterus" &&
                loser.status == EventStatus::retracted)
                absence_retracted = true;
        }
    }
    const bool in_cohort = execute(*query, kb, ontology).contains("paradox");

    // confidence-weighted policy with boosted surgery confidence flips it
    ExtractorConfig boosted;
    boosted.confidence_overrides["hysterectomy"] = 0.95;
    boosted.confidence_overrides["oophorectomy"] = 0.95;
    ConsolidateConfig weighted;
    weighted.policy = ResolutionPolicy::confidence_support_recency;
    const KnowledgeBase kb_flipped = build_kb_from_corpus(corpus, ontology, boosted, weighted);
    const bool flipped_out = !execute(*query, kb_flipped, ontology).contains("paradox");

    detail = std::string("default policy: patient ") + (in_cohort ? "retrieved" : "MISSING") +
             ", " + std::to_string(constraint_conflicts) +
             " constraint conflict(s), absence belief " +
             (absence_retracted ? "retracted" : "NOT retracted") +
             "; confidence-weighted policy: patient " +
             (flipped_out ? "excluded" : "STILL RETRIEVED");
    return in_cohort && constraint_conflicts == 1 && absence_retracted && flipped_out;
}

bool criterion_mechanical_exactness(const Benchmark&, std::string& detail) {
    Rng rng(31337);
    // chunker invariants on 1000 randomized instances
    std::size_t chunk_failures = 0;
    for (int round = 0; round < 1000; ++round) {
        const std::size_t tokens = static_cast<std::size_t>(rng.uniform_int(1, 600));
        const std::size_t chunk_size = static_cast<std::size_t>(rng.uniform_int(1, 80));
        const std::size_t overlap = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(chunk_size) - 1));
        Document doc;
        doc.patient_id = "p";
        doc.doc_id = "d";
        doc.authored_at = *Date::parse("2020-01-01");
        doc.doc_type = "note";
        for (std::size_t i = 0; i < tokens; ++i) {
            if (i) doc.text += ' ';
            doc.text += "t" + std::to_string(i);
        }
        const auto chunks = chunk_document(doc, chunk_size, overlap);
        if (chunks.size() != oracle::expected_chunk_count(tokens, chunk_size, overlap)) {
            ++chunk_failures;
            continue;
        }
        const std::size_t stride = chunk_size - overlap;
        std::size_t covered = 0;
        bool ok = true;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            ok = ok && chunks[i].token_end > chunks[i].token_start;
            ok = ok && chunks[i].token_end - chunks[i].token_start <= chunk_size;
            if (i) ok = ok && chunks[i].token_start == chunks[i - 1].token_start + stride;
            covered = chunks[i].token_end;
        }
        if (!ok || covered != tokens) ++chunk_failures;
    }

    // exact search vs brute force on 1000 randomized instances
    std::size_t search_failures = 0;
    for (int round = 0; round < 1000; ++round) {
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 120));
        const std::size_t dim = static_cast<std::size_t>(rng.uniform_int(2, 16));
        BuiltinEmbedder embedder(dim, static_cast<std::uint64_t>(round));
        std::vector<Chunk> chunks;
        for (std::size_t i = 0; i < n; ++i) {
            char id[32];
            std::snprintf(id, sizeof(id), "c%04zu", i);
            chunks.push_back(Chunk{id, "p", "d", 0, 2,
                                   "w" + std::to_string(rng.uniform_int(0, 25)) + " w" +
                                       std::to_string(rng.uniform_int(0, 25))});
        }
        const auto index = build_index(chunks, embedder);
        EmbeddingVector query(dim);
        for (auto& x : query) x = rng.uniform_real(-1.0, 1.0);
        l2_normalize(query);
        const std::size_t k = static_cast<std::size_t>(rng.uniform_int(1, 40));
        const auto got = index.search(query, k);
        const auto want = oracle::brute_force_search(index, query, k);
        if (got.size() != want.size()) {
            ++search_failures;
            continue;
        }
        for (std::size_t i = 0; i < got.size(); ++i) {
            if (got[i].chunk_id != want[i].chunk_id || got[i].score != want[i].score)
                ++search_failures;
        }
    }

    // serialization round-trips byte-identically
    BuiltinEmbedder embedder(24, 5);
    std::vector<Chunk> chunks;
    for (int i = 0; i < 50; ++i)
        chunks.push_back(Chunk{"s" + std::to_string(100 + i), "p", "d", 0, 2,
                               "alpha beta gamma " + std::to_string(i)});
    const auto index = build_index(chunks, embedder);
    const std::string bytes = index.serialize();
    const bool round_trip = VectorIndex::deserialize(bytes).serialize() == bytes;

    detail = "chunker failures " + std::to_string(chunk_failures) + "/1000, search failures " +
             std::to_string(search_failures) + "/1000, serialization round-trip " +
             (round_trip ? "byte-identical" : "BROKEN");
    return chunk_failures == 0 && search_failures == 0 && round_trip;
}

}  // namespace

int main() {
    const auto start = Clock::now();
    Benchmark benchmark = build_benchmark();

    struct Gate {
        int id;
        const char* title;
        std::function<bool(const Benchmark&, std::string&)> run;
    };
    const std::vector<Gate> gates = {
        {1, "gold-oracle equivalence (20 queries x 50 patients, zero tolerance)",
         criterion_gold_oracle},
        {2, "symbolic engine set-theoretic consistency (all generated pairs)",
         criterion_engine_consistency},
        {3, "metric correctness vs independent scalar oracle (1e-12) and category boundaries",
         criterion_metric_correctness},
        {4, "reader subset law over the whole bank", criterion_reader_subset},
        {5, "qualitative ordering on Broad queries", criterion_qualitative_ordering},
        {6, "longitudinal degradation across document-count terciles",
         criterion_longitudinal_degradation},
        {7, "zero-result hallucination pattern", criterion_zero_result_hallucination},
        {8, "round-trip fidelity at contradiction_rate=0, paraphrase_rate=1",
         criterion_round_trip},
        {9, "longitudinal-paradox scenario and policy flip", criterion_figure_scenario},
        {10, "mechanical exactness: chunker, search, serialization",
         criterion_mechanical_exactness},
    };

    int passed = 0;
    for (const auto& gate : gates) {
        std::string detail;
        bool ok = false;
        try {
            ok = gate.run(benchmark, detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("criterion %2d: %s - %s\n              %s\n", gate.id,
                    ok ? "PASS" : "FAIL", gate.title, detail.c_str());
        if (ok) ++passed;
    }

    const double elapsed = seconds_since(start);
    std::printf("\nACCEPTANCE: %d/%zu criteria passed in %.1fs\n", passed, gates.size(),
                elapsed);
    if (elapsed > 900.0) {
        std::printf("ACCEPTANCE: runtime budget exceeded (%.1fs > 900s)\n", elapsed);
        return 1;
    }
    return passed == static_cast<int>(gates.size()) ? 0 : 1;
}
