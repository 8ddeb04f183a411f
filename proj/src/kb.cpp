#include <algorithm>

#include <json.hpp>

#include "acr/error.hpp"
#include "acr/io.hpp"
#include "acr/kb.hpp"

namespace acr {

namespace {

const std::vector<Posting> kNoPostings;

nlohmann::ordered_json event_to_json(const ConsolidatedEvent& e) {
    nlohmann::ordered_json j;
    j["concept_id"] = e.concept_id;
    j["polarity"] = to_string(e.polarity);
    j["attributes"] = e.attributes;
    j["time_start"] = e.time.start ? nlohmann::ordered_json(e.time.start->to_string())
                                   : nlohmann::ordered_json(nullptr);
    j["time_end"] = e.time.end ? nlohmann::ordered_json(e.time.end->to_string())
                               : nlohmann::ordered_json(nullptr);
    j["confidence"] = e.confidence;
    j["support"] = nlohmann::ordered_json::array();
    for (const auto& p : e.support) {
        j["support"].push_back({{"doc_id", p.doc_id}, {"begin", p.begin}, {"end", p.end}});
    }
    j["status"] = e.status == EventStatus::active ? "active" : "retracted";
    if (!e.retraction_reason.empty()) j["retraction_reason"] = e.retraction_reason;
    if (e.derived) j["derived"] = true;
    return j;
}

ConsolidatedEvent event_from_json(const nlohmann::json& j, bool want_status) {
    ConsolidatedEvent e;
    e.concept_id = j.at("concept_id").get<std::string>();
    e.polarity = polarity_from_string(j.value("polarity", std::string("asserted")));
    if (j.contains("attributes"))
        e.attributes = j["attributes"].get<std::map<std::string, std::string>>();
    auto read_date = [&](const char* key) -> std::optional<Date> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        auto d = Date::parse(j[key].get<std::string>());
        if (!d) throw DataError(std::string("invalid date in '") + key + "'");
        return d;
    };
    e.time.start = read_date("time_start");
    e.time.end = read_date("time_end");
    e.confidence = j.value("confidence", 0.8);
    if (j.contains("support")) {
        for (const auto& p : j["support"]) {
            e.support.push_back({p.at("doc_id").get<std::string>(), p.value("begin", std::size_t{0}),
                                 p.value("end", std::size_t{0})});
        }
    }
    if (want_status && j.contains("status") && j["status"] == "retracted")
        e.status = EventStatus::retracted;
    if (want_status) {
        e.retraction_reason = j.value("retraction_reason", std::string());
        e.derived = j.value("derived", false);
    }
    e.latest_evidence = e.time.end ? e.time.end : e.time.start;
    return e;
}

}  // namespace

std::vector<std::string> KnowledgeBase::patient_ids() const {
    std::vector<std::string> ids;
    ids.reserve(models.size());
    for (const auto& [id, m] : models) ids.push_back(id);
    return ids;
}

const std::vector<Posting>& KnowledgeBase::postings_for(const ConceptId& concept_id) const {
    auto it = postings.find(concept_id);
    return it == postings.end() ? kNoPostings : it->second;
}

KnowledgeBase build_kb(std::vector<PatientModel> models, const Ontology& ontology) {
    KnowledgeBase kb;
    for (auto& model : models) {
        const std::string id = model.patient_id;
        auto [it, inserted] = kb.models.emplace(id, std::move(model));
        if (!inserted) throw DataError("duplicate patient_id '" + id + "'");
    }
    // Models iterate in sorted patient order, so postings come out sorted.
    for (const auto& [pid, model] : kb.models) {
        for (std::size_t i = 0; i < model.events.size(); ++i) {
            const auto& e = model.events[i];
            if (e.status != EventStatus::active || e.derived) continue;
            for (const auto& anc : ontology.ancestors(e.concept_id))
                kb.postings[anc].push_back({pid, i});
        }
    }
    return kb;
}

KnowledgeBase build_kb_from_corpus(const Corpus& corpus, const Ontology& ontology,
                                   const ExtractorConfig& ex, const ConsolidateConfig& cc) {
    const FactExtractor extractor(ontology, ex);
    std::vector<const std::pair<const std::string, std::vector<Document>>*> patients;
    patients.reserve(corpus.patients.size());
    for (const auto& entry : corpus.patients) patients.push_back(&entry);

    std::vector<PatientModel> models(patients.size());
    std::string failure;
    #pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(patients.size()); ++i) {
        try {
            const auto& [pid, docs] = *patients[static_cast<std::size_t>(i)];
            std::vector<Fact> facts;
            for (const auto& doc : docs) {
                auto extracted = extractor.extract(doc);
                facts.insert(facts.end(), std::make_move_iterator(extracted.begin()),
                             std::make_move_iterator(extracted.end()));
            }
            std::stable_sort(facts.begin(), facts.end(), fact_order_less);
            models[static_cast<std::size_t>(i)] = consolidate(pid, facts, ontology, cc);
        } catch (const std::exception& e) {
            #pragma omp critical
            if (failure.empty()) failure = e.what();
        }
    }
    if (!failure.empty()) throw DataError("knowledge acquisition failed: " + failure);
    return build_kb(std::move(models), ontology);
}

KnowledgeBase build_kb_from_abstractions(const std::vector<Abstraction>& abstractions,
                                         const Ontology& ontology) {
    std::vector<PatientModel> models;
    models.reserve(abstractions.size());
    for (const auto& abs : abstractions) {
        PatientModel model;
        model.patient_id = abs.patient_id;
        for (const auto& event : abs.events) {
            ConsolidatedEvent e = event;
            e.status = EventStatus::active;
            e.retraction_reason.clear();
            e.derived = false;
            if (!ontology.has_concept(e.concept_id))
                throw DataError("abstraction for patient '" + abs.patient_id +
                                "': unknown concept_id '" + e.concept_id + "'");
            if (!(e.confidence > 0.0 && e.confidence <= 1.0))
                throw DataError("abstraction for patient '" + abs.patient_id +
                                "': confidence out of (0,1]");
            if (e.support.empty())
                e.support.push_back({"abstraction:" + abs.patient_id, 0, 0});
            if (!e.latest_evidence) e.latest_evidence = e.time.end ? e.time.end : e.time.start;
            model.events.push_back(std::move(e));
        }
        // Derive absence beliefs so constraint semantics match the text path;
        // the supplied events themselves must already be conflict-free.
        std::vector<std::size_t> base_indexes(model.events.size());
        for (std::size_t i = 0; i < model.events.size(); ++i) base_indexes[i] = i;
        for (std::size_t i : base_indexes) {
            const auto& e = model.events[i];
            if (e.polarity != Polarity::asserted) continue;
            for (const auto& anc : ontology.ancestors(e.concept_id)) {
                for (const auto& organ : ontology.concept_info(anc).asserts_absent) {
                    ConsolidatedEvent absence;
                    absence.concept_id = organ;
                    absence.polarity = Polarity::negated;
                    absence.time = {e.time.start, std::nullopt};
                    absence.confidence = e.confidence;
                    absence.support = e.support;
                    absence.derived = true;
                    absence.latest_evidence = e.latest_evidence;
                    model.events.push_back(std::move(absence));
                }
            }
        }
        std::string why;
        if (!model_is_consistent(model, ontology, &why))
            throw DataError("abstraction rejected for patient '" + abs.patient_id + "': " + why);
        models.push_back(std::move(model));
    }
    return build_kb(std::move(models), ontology);
}

std::vector<Abstraction> parse_abstractions_jsonl(const std::string& content,
                                                  const std::string& origin) {
    std::vector<Abstraction> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        if (nl == std::string::npos) nl = content.size();
        const std::string line = content.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError(origin + ":" + std::to_string(line_no) + ": malformed JSON record");
        Abstraction abs;
        abs.patient_id = j.at("patient_id").get<std::string>();
        for (const auto& ej : j.value("events", nlohmann::json::array()))
            abs.events.push_back(event_from_json(ej, /*want_status=*/false));
        out.push_back(std::move(abs));
    }
    return out;
}

std::vector<Abstraction> load_abstractions(const std::string& path) {
    return parse_abstractions_jsonl(read_file(path), path);
}

std::string abstractions_to_jsonl(const std::vector<Abstraction>& abstractions) {
    std::string out;
    for (const auto& abs : abstractions) {
        nlohmann::ordered_json j;
        j["patient_id"] = abs.patient_id;
        j["events"] = nlohmann::ordered_json::array();
        for (const auto& e : abs.events) {
            auto ej = event_to_json(e);
            ej.erase("status");
            ej.erase("retraction_reason");
            ej.erase("derived");
            j["events"].push_back(ej);
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_abstractions(const std::vector<Abstraction>& abstractions, const std::string& path) {
    write_file_atomic(path, abstractions_to_jsonl(abstractions));
}

std::string models_to_jsonl(const KnowledgeBase& kb) {
    std::string out;
    for (const auto& [pid, model] : kb.models) {
        nlohmann::ordered_json j;
        j["patient_id"] = pid;
        j["events"] = nlohmann::ordered_json::array();
        for (const auto& e : model.events) j["events"].push_back(event_to_json(e));
        j["conflicts"] = nlohmann::ordered_json::array();
        for (const auto& c : model.conflicts) {
            j["conflicts"].push_back({{"id", c.id},
                                      {"winner", c.winner},
                                      {"loser", c.loser},
                                      {"kind", c.kind},
                                      {"description", c.description}});
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<PatientModel> parse_models_jsonl(const std::string& content) {
    std::vector<PatientModel> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        if (nl == std::string::npos) nl = content.size();
        const std::string line = content.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError("models:" + std::to_string(line_no) + ": malformed JSON record");
        PatientModel model;
        model.patient_id = j.at("patient_id").get<std::string>();
        for (const auto& ej : j.value("events", nlohmann::json::array()))
            model.events.push_back(event_from_json(ej, /*want_status=*/true));
        for (const auto& cj : j.value("conflicts", nlohmann::json::array())) {
            model.conflicts.push_back({cj.at("id").get<std::string>(),
                                       cj.at("winner").get<std::size_t>(),
                                       cj.at("loser").get<std::size_t>(),
                                       cj.at("kind").get<std::string>(),
                                       cj.value("description", std::string())});
        }
        out.push_back(std::move(model));
    }
    return out;
}

std::string conflict_log_jsonl(const KnowledgeBase& kb) {
    std::string out;
    for (const auto& [pid, model] : kb.models) {
        for (const auto& c : model.conflicts) {
            nlohmann::ordered_json j;
            j["patient_id"] = pid;
            j["conflict_id"] = c.id;
            j["kind"] = c.kind;
            j["description"] = c.description;
            j["retracted_concept"] = model.events[c.loser].concept_id;
            j["kept_concept"] = model.events[c.winner].concept_id;
            out += j.dump();
            out += '\n';
        }
    }
    return out;
}

}  // namespace acr
