#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "acr/config.hpp"
#include "acr/corpus.hpp"
#include "acr/error.hpp"
#include "acr/eval.hpp"
#include "acr/io.hpp"
#include "acr/kb.hpp"
#include "acr/reader_prompt.hpp"
#include "acr/retrieval.hpp"
#include "acr/rng.hpp"
#include "acr/squerl.hpp"
#include "acr/synthgen.hpp"
#include "acr/vector_index.hpp"

namespace fs = std::filesystem;
using namespace acr;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::int64_t seed_override = -1;
    std::int64_t alpha_override = -1;
    std::int64_t beta_override = -1;
    int jobs = 0;
    bool error_json = false;
};

RunConfig load_config(const GlobalOpts& g) {
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path);
    if (g.seed_override >= 0) {
        cfg.seed = static_cast<std::uint64_t>(g.seed_override);
        cfg.embedder.seed = cfg.seed;
    }
    if (g.alpha_override > 0) cfg.alpha = static_cast<std::size_t>(g.alpha_override);
    if (g.beta_override > 0) cfg.beta = static_cast<std::size_t>(g.beta_override);
    if (g.jobs > 0) cfg.jobs = g.jobs;
#ifdef _OPENMP
    if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);
#endif
    return cfg;
}

std::unique_ptr<Embedder> make_embedder(const RunConfig& cfg) {
    if (cfg.embedder.kind == "builtin")
        return std::make_unique<BuiltinEmbedder>(cfg.embedder.dimension, cfg.embedder.seed);
    ExternalEmbedderConfig ec;
    ec.base_url = cfg.embedder.base_url;
    ec.path = cfg.embedder.path;
    ec.model = cfg.embedder.model;
    ec.auth_env = cfg.embedder.auth_env;
    ec.max_batch = cfg.embedder.max_batch;
    ec.max_attempts = cfg.embedder.max_attempts;
    return std::make_unique<ExternalEmbedder>(ec);
}

std::unique_ptr<Reader> make_reader(const RunConfig& cfg, const Ontology& ontology) {
    if (cfg.reader.kind == "mock") return std::make_unique<MockReader>(ontology);
    ChatReaderConfig rc;
    rc.base_url = cfg.reader.base_url;
    rc.path = cfg.reader.path;
    rc.model = cfg.reader.model;
    rc.auth_env = cfg.reader.auth_env;
    rc.temperature = cfg.reader.temperature;
    rc.top_p = cfg.reader.top_p;
    rc.max_attempts = cfg.reader.max_attempts;
    return std::make_unique<ExternalChatReader>(rc);
}

ArtifactMeta meta_for(const RunConfig& cfg) {
    return {cfg.hash(), cfg.seed, kToolVersion};
}

void check_meta(const std::string& path_a, const std::string& path_b, bool force) {
    const auto a = read_artifact_meta(path_a);
    const auto b = read_artifact_meta(path_b);
    if (!a || !b) return;  // externally produced artifacts carry no sidecar
    if (a->config_hash != b->config_hash) {
        if (force) {
            std::cerr << "warning: config hash mismatch between " << path_a << " and " << path_b
                      << " (continuing under --force)\n";
            return;
        }
        throw DataError("config hash mismatch between " + path_a + " and " + path_b +
                        "; pass --force to override");
    }
}

int cmd_synth(const GlobalOpts& g, const std::string& out_dir, std::size_t n_patients,
              std::size_t n_queries, std::size_t docs_min, std::size_t docs_max,
              double paraphrase_rate, double contradiction_rate, bool length_coupling,
              double zero_fraction, const std::string& import_nl_path) {
    const RunConfig cfg = load_config(g);
    GeneratorParams params;
    params.seed = cfg.seed;
    params.alpha = cfg.alpha;
    params.beta = cfg.beta;
    params.n_patients = n_patients;
    params.n_queries = n_queries;
    params.docs_per_patient.min = docs_min;
    params.docs_per_patient.max = docs_max;
    params.paraphrase_rate = paraphrase_rate;
    params.contradiction_rate = contradiction_rate;
    params.contradiction_length_coupling = length_coupling;
    params.zero_result_fraction = zero_fraction;

    fs::create_directories(out_dir);
    const Ontology ontology = gen_ontology(params.seed, params.ontology_filler_concepts);
    ontology.save(out_dir + "/ontology.json");
    const SynthOutput synth = gen_patients(params, ontology);
    save_corpus(synth.corpus, out_dir + "/corpus.jsonl");
    save_abstractions(synth.abstractions, out_dir + "/abstractions.jsonl");
    {
        std::string log;
        for (const auto& entry : synth.injection_log) {
            nlohmann::ordered_json j;
            j["patient_id"] = entry.patient_id;
            j["doc_id"] = entry.doc_id;
            j["kind"] = entry.kind;
            j["concept_id"] = entry.concept_id;
            log += j.dump();
            log += '\n';
        }
        write_file_atomic(out_dir + "/injection_log.jsonl", log);
    }
    const auto bank = gen_query_bank(params, ontology, synth.abstractions);
    save_query_bank(bank, out_dir + "/bank.jsonl");
    const GoldMatrix gold = gen_gold(synth.abstractions, bank, ontology);
    save_gold(gold, out_dir + "/gold.jsonl");

    const ArtifactMeta meta = meta_for(cfg);
    for (const char* name : {"/ontology.json", "/corpus.jsonl", "/abstractions.jsonl",
                             "/bank.jsonl", "/gold.jsonl", "/injection_log.jsonl"})
        write_artifact_meta(out_dir + name, meta);

    if (!import_nl_path.empty()) {
        // Appendix-style NL-only bank: {query_id, nl_text} per line.
        std::vector<QueryRecord> imported;
        std::size_t line_no = 0, failed = 0;
        const std::string content = read_file(import_nl_path);
        std::size_t pos = 0;
        while (pos < content.size()) {
            std::size_t nl_at = content.find('\n', pos);
            if (nl_at == std::string::npos) nl_at = content.size();
            const std::string line = content.substr(pos, nl_at - pos);
            pos = nl_at + 1;
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw DataError(import_nl_path + ":" + std::to_string(line_no) +
                                ": malformed JSON record");
            QueryRecord rec;
            rec.query_id = j.at("query_id").get<std::string>();
            rec.nl_text = j.at("nl_text").get<std::string>();
            try {
                rec.squerl_text = translate_nl(rec.nl_text, NlPhrases::standard(), ontology);
            } catch (const DataError& e) {
                ++failed;
                std::cerr << "untranslatable " << rec.query_id << ": " << e.what() << "\n";
                continue;
            }
            imported.push_back(std::move(rec));
        }
        save_query_bank(imported, out_dir + "/bank_imported.jsonl");
        write_artifact_meta(out_dir + "/bank_imported.jsonl", meta);
        std::cout << "imported " << imported.size() << " queries, " << failed
                  << " untranslatable\n";
        if (failed > 0) return 2;
    }
    std::cout << "synth: " << synth.corpus.patient_count() << " patients, "
              << synth.corpus.document_count() << " documents, " << bank.size() << " queries -> "
              << out_dir << "\n";
    return 0;
}

int cmd_index(const GlobalOpts& g, const std::string& corpus_path, const std::string& out_path) {
    const RunConfig cfg = load_config(g);
    const Corpus corpus = load_corpus(corpus_path);
    const auto chunks = chunk_corpus(corpus, cfg.chunk_size, cfg.overlap);
    auto embedder = make_embedder(cfg);
    const VectorIndex index = build_index(chunks, *embedder);
    index.save(out_path);
    write_artifact_meta(out_path, meta_for(cfg));
    std::cout << "index: " << index.size() << " chunks, dim " << index.dimension() << " -> "
              << out_path << "\n";
    return 0;
}

int cmd_build_kb(const GlobalOpts& g, const std::string& corpus_path,
                 const std::string& ontology_path, const std::string& out_dir) {
    const RunConfig cfg = load_config(g);
    const Corpus corpus = load_corpus(corpus_path);
    const Ontology ontology = Ontology::load(ontology_path);
    const KnowledgeBase kb = build_kb_from_corpus(corpus, ontology);
    fs::create_directories(out_dir);
    write_file_atomic(out_dir + "/models.jsonl", models_to_jsonl(kb));
    write_file_atomic(out_dir + "/conflicts.jsonl", conflict_log_jsonl(kb));
    const ArtifactMeta meta = meta_for(cfg);
    write_artifact_meta(out_dir + "/models.jsonl", meta);
    write_artifact_meta(out_dir + "/conflicts.jsonl", meta);
    std::size_t conflicts = 0;
    for (const auto& [pid, model] : kb.models) conflicts += model.conflicts.size();
    std::cout << "build-kb: " << kb.models.size() << " patient models, " << conflicts
              << " conflicts -> " << out_dir << "\n";
    return 0;
}

int cmd_query(const GlobalOpts& g, const std::string& system, const std::string& bank_path,
              const std::string& index_path, const std::string& corpus_path,
              const std::string& ontology_path, const std::string& models_path,
              const std::string& query_id, const std::string& out_path,
              const std::string& manifest_path) {
    const RunConfig cfg = load_config(g);
    std::vector<QueryRecord> bank = load_query_bank(bank_path);
    if (!query_id.empty()) {
        std::vector<QueryRecord> one;
        for (auto& rec : bank) {
            if (rec.query_id == query_id) one.push_back(rec);
        }
        if (one.empty()) throw DataError("query_id '" + query_id + "' not in bank");
        bank = std::move(one);
    }

    std::map<std::string, Cohort> cohorts;
    nlohmann::ordered_json manifest;
    manifest["system"] = system;
    manifest["config_hash"] = cfg.hash();
    manifest["prompt_hash"] =
        hash_hex(fnv1a64(std::string(kReaderSystemPrompt) + kReaderUserTemplate));
    manifest["queries"] = nlohmann::ordered_json::array();

    if (system == "retriever" || system == "read") {
        if (index_path.empty()) throw UsageError("--index is required for " + system);
        const VectorIndex index = VectorIndex::load(index_path);
        auto embedder = make_embedder(cfg);
        if (system == "retriever") {
            for (const auto& rec : bank) {
                const std::string& text = rec.nl_text.empty() ? rec.squerl_text : rec.nl_text;
                cohorts[rec.query_id] = retrieve_cohort(index, *embedder, text, cfg.top_k_chunks);
            }
        } else {
            if (corpus_path.empty() || ontology_path.empty())
                throw UsageError("--corpus and --ontology are required for read");
            const Corpus corpus = load_corpus(corpus_path);
            const ChunkStore store(corpus, cfg.chunk_size, cfg.overlap);
            const Ontology ontology = Ontology::load(ontology_path);
            auto reader = make_reader(cfg, ontology);
            ReadConfig read_cfg;
            read_cfg.context_budget = cfg.context_budget;
            read_cfg.max_calls = cfg.max_reader_calls;
            read_cfg.per_call_budget = cfg.context_budget;
            read_cfg.parallelism = cfg.jobs;
            for (const auto& rec : bank) {
                const std::string& text = rec.nl_text.empty() ? rec.squerl_text : rec.nl_text;
                std::unique_ptr<QueryAst> ast;
                if (cfg.reader.kind == "mock") ast = parse(rec.squerl_text, ontology);
                const ReadRunResult run = retrieve_then_read(
                    index, *embedder, store, *reader, text, ast.get(), cfg.top_k_chunks, read_cfg);
                cohorts[rec.query_id] = run.cohort;
                nlohmann::ordered_json qj;
                qj["query_id"] = rec.query_id;
                qj["verdicts"] = nlohmann::ordered_json::array();
                for (const auto& v : run.verdicts) {
                    nlohmann::ordered_json vj;
                    vj["patient_id"] = v.patient_id;
                    vj["decision"] = v.decision ? "yes" : "no";
                    vj["calls_used"] = v.calls_used;
                    if (v.indeterminate) vj["indeterminate"] = true;
                    if (v.error) {
                        vj["error"] = true;
                        vj["error_message"] = v.error_message;
                    }
                    qj["verdicts"].push_back(vj);
                }
                manifest["queries"].push_back(qj);
            }
        }
    } else if (system == "symbolic") {
        if (ontology_path.empty() || models_path.empty())
            throw UsageError("--ontology and --models are required for symbolic");
        const Ontology ontology = Ontology::load(ontology_path);
        const KnowledgeBase kb = build_kb(parse_models_jsonl(read_file(models_path)), ontology);
        for (const auto& rec : bank) {
            const auto ast = parse(rec.squerl_text, ontology);
            cohorts[rec.query_id] = execute(*ast, kb, ontology);
        }
    } else {
        throw UsageError("unknown --system '" + system + "'");
    }

    save_cohorts(cohorts, out_path);
    write_artifact_meta(out_path, meta_for(cfg));
    if (!manifest_path.empty()) write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    std::cout << "query[" << system << "]: " << cohorts.size() << " cohorts -> " << out_path
              << "\n";
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& bank_path, const std::string& gold_path,
             const std::string& cohorts_path, const std::string& corpus_path,
             const std::string& system, const std::string& out_path, bool force) {
    const RunConfig cfg = load_config(g);
    check_meta(gold_path, cohorts_path, force);
    const auto bank = load_query_bank(bank_path);
    const Corpus corpus = load_corpus(corpus_path);
    std::vector<std::string> population;
    for (const auto& [pid, docs] : corpus.patients) population.push_back(pid);
    const GoldMatrix gold = load_gold(gold_path, population);
    const auto cohorts = load_cohorts(cohorts_path);

    EvalInputs inputs{bank, gold, cohorts, cfg.alpha, cfg.beta, corpus_doc_counts(corpus)};
    EvalReport report = evaluate(inputs);
    report.system = system;
    report.config_hash = cfg.hash();
    report.seed = cfg.seed;
    report.tool_version = kToolVersion;
    write_file_atomic(out_path, report_to_json(report));
    write_artifact_meta(out_path, meta_for(cfg));
    for (const auto& c : report.categories) {
        std::printf("%-7s (%zu queries, %s): P=%.4f R=%.4f F1=%.4f\n",
                    to_string(c.category).c_str(), c.n_queries, c.averaging.c_str(),
                    c.cohort.precision, c.cohort.recall, c.cohort.f1);
    }
    std::cout << "eval -> " << out_path << "\n";
    return 0;
}

int cmd_consistency(const GlobalOpts& g, const std::string& bank_path,
                    const std::string& cohorts_path, const std::string& out_path) {
    load_config(g);
    const auto bank = load_query_bank(bank_path);
    const auto cohorts = load_cohorts(cohorts_path);
    const auto rows = consistency_checks(bank, cohorts);
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    std::size_t total_violations = 0;
    for (const auto& r : rows) {
        j.push_back({{"kind", r.kind},
                     {"query_a", r.query_a},
                     {"query_b", r.query_b},
                     {"size_a", r.size_a},
                     {"size_b", r.size_b},
                     {"violations", r.violations},
                     {"violations_rev", r.violations_rev}});
        total_violations += r.violations + r.violations_rev;
    }
    write_file_atomic(out_path, j.dump(2) + "\n");
    std::cout << "consistency: " << rows.size() << " checks, " << total_violations
              << " violating patients -> " << out_path << "\n";
    return 0;
}

int cmd_report(const std::string& report_path, const std::string& format,
               const std::string& out_path) {
    const EvalReport report = report_from_json(read_file(report_path));
    std::string rendered;
    if (format == "json") rendered = report_to_json(report);
    else if (format == "md") rendered = report_to_markdown(report);
    else if (format == "csv") rendered = report_to_csv(report);
    else throw UsageError("unknown --format '" + format + "'");
    if (out_path.empty()) {
        std::cout << rendered;
    } else {
        write_file_atomic(out_path, rendered);
        std::cout << "report -> " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Automatic cohort retrieval benchmark harness"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "TOML configuration file");
    app.add_option("--seed", g.seed_override, "Override the configured seed");
    app.add_option("--jobs", g.jobs, "Worker parallelism cap (0 = all cores)");
    app.add_option("--alpha", g.alpha_override, "Broad/Narrow threshold override");
    app.add_option("--beta", g.beta_override, "Narrow/Sparse threshold override");
    app.add_flag("--error-json", g.error_json, "Emit errors as JSON on stderr");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the seeded benchmark");
    std::string synth_out = "bench";
    std::size_t n_patients = 1000, n_queries = 200, docs_min = 20, docs_max = 100;
    double paraphrase_rate = 0.3, contradiction_rate = 0.02, zero_fraction = 0.15;
    bool length_coupling = true;
    std::string import_nl;
    synth->add_option("--out,-o", synth_out, "Output directory");
    synth->add_option("--patients", n_patients, "Number of patients");
    synth->add_option("--queries", n_queries, "Number of bank queries");
    synth->add_option("--docs-min", docs_min, "Min documents per patient");
    synth->add_option("--docs-max", docs_max, "Max documents per patient");
    synth->add_option("--paraphrase-rate", paraphrase_rate, "Synonym mention rate");
    synth->add_option("--contradiction-rate", contradiction_rate, "Contradiction rate");
    synth->add_flag("--length-coupling,!--no-length-coupling", length_coupling,
                    "Scale contradictions with record length");
    synth->add_option("--zero-fraction", zero_fraction, "Zero-result query fraction");
    synth->add_option("--import-nl-bank", import_nl, "NL-only bank JSONL to translate");

    // index
    auto* index = app.add_subcommand("index", "Build the dense vector index");
    std::string index_corpus, index_out = "index.bin";
    index->add_option("--corpus", index_corpus, "Corpus JSONL")->required();
    index->add_option("--out,-o", index_out, "Index file");

    // build-kb
    auto* build_kb_cmd = app.add_subcommand("build-kb", "Extract + consolidate + index");
    std::string kb_corpus, kb_ontology, kb_out = "kb";
    build_kb_cmd->add_option("--corpus", kb_corpus, "Corpus JSONL")->required();
    build_kb_cmd->add_option("--ontology", kb_ontology, "Ontology JSON")->required();
    build_kb_cmd->add_option("--out,-o", kb_out, "Output directory");

    // query
    auto* query = app.add_subcommand("query", "Run a system over the bank");
    std::string q_system = "symbolic", q_bank, q_index, q_corpus, q_ontology, q_models, q_id,
                q_out = "cohorts.jsonl", q_manifest;
    query->add_option("--system", q_system, "retriever | read | symbolic");
    query->add_option("--bank", q_bank, "Query bank JSONL")->required();
    query->add_option("--index", q_index, "Vector index file");
    query->add_option("--corpus", q_corpus, "Corpus JSONL (read system)");
    query->add_option("--ontology", q_ontology, "Ontology JSON");
    query->add_option("--models", q_models, "Patient models JSONL (symbolic)");
    query->add_option("--query-id", q_id, "Run a single query");
    query->add_option("--out,-o", q_out, "Cohort interchange output");
    query->add_option("--manifest", q_manifest, "Run manifest output");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score cohorts against gold");
    std::string e_bank, e_gold, e_cohorts, e_corpus, e_system = "system",
                e_out = "report.json";
    bool e_force = false;
    eval_cmd->add_option("--bank", e_bank, "Query bank JSONL")->required();
    eval_cmd->add_option("--gold", e_gold, "Gold JSONL")->required();
    eval_cmd->add_option("--cohorts", e_cohorts, "Cohort interchange JSONL")->required();
    eval_cmd->add_option("--corpus", e_corpus, "Corpus JSONL (population + terciles)")->required();
    eval_cmd->add_option("--system", e_system, "System label for the report");
    eval_cmd->add_option("--out,-o", e_out, "Report JSON output");
    eval_cmd->add_flag("--force", e_force, "Ignore config hash mismatches");

    // consistency
    auto* cons = app.add_subcommand("consistency", "Gold-free set-theoretic checks");
    std::string c_bank, c_cohorts, c_out = "consistency.json";
    cons->add_option("--bank", c_bank, "Query bank JSONL")->required();
    cons->add_option("--cohorts", c_cohorts, "Cohort interchange JSONL")->required();
    cons->add_option("--out,-o", c_out, "Output JSON");

    // report
    auto* rep = app.add_subcommand("report", "Render a report JSON");
    std::string r_report, r_format = "md", r_out;
    rep->add_option("--report", r_report, "Report JSON")->required();
    rep->add_option("--format", r_format, "json | md | csv");
    rep->add_option("--out,-o", r_out, "Output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(g, synth_out, n_patients, n_queries, docs_min, docs_max,
                             paraphrase_rate, contradiction_rate, length_coupling, zero_fraction,
                             import_nl);
        if (index->parsed()) return cmd_index(g, index_corpus, index_out);
        if (build_kb_cmd->parsed()) return cmd_build_kb(g, kb_corpus, kb_ontology, kb_out);
        if (query->parsed())
            return cmd_query(g, q_system, q_bank, q_index, q_corpus, q_ontology, q_models, q_id,
                             q_out, q_manifest);
        if (eval_cmd->parsed())
            return cmd_eval(g, e_bank, e_gold, e_cohorts, e_corpus, e_system, e_out, e_force);
        if (cons->parsed()) return cmd_consistency(g, c_bank, c_cohorts, c_out);
        if (rep->parsed()) return cmd_report(r_report, r_format, r_out);
    } catch (const Error& e) {
        const char* kind = e.kind() == ErrorKind::usage     ? "usage"
                           : e.kind() == ErrorKind::data    ? "data"
                                                            : "external";
        if (g.error_json) {
            nlohmann::ordered_json j = {{"error", {{"kind", kind}, {"message", e.what()}}}};
            std::cerr << j.dump() << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        switch (e.kind()) {
            case ErrorKind::usage: return 1;
            case ErrorKind::data: return 2;
            case ErrorKind::external: return 3;
        }
    } catch (const std::exception& e) {
        if (g.error_json) {
            nlohmann::ordered_json j = {{"error", {{"kind", "data"}, {"message", e.what()}}}};
            std::cerr << j.dump() << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return 2;
    }
    return 1;
}
