#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acr/corpus.hpp"
#include "acr/date.hpp"
#include "acr/ontology.hpp"

namespace acr {

enum class Polarity { asserted, negated };

std::string to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

struct Provenance {
    std::string doc_id;
    std::size_t begin = 0;  // char span into the document text
    std::size_t end = 0;

    friend bool operator==(const Provenance& a, const Provenance& b) = default;
    friend bool operator<(const Provenance& a, const Provenance& b) {
        if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
        if (a.begin != b.begin) return a.begin < b.begin;
        return a.end < b.end;
    }
};

/// Document-level extraction result.
struct Fact {
    ConceptId concept_id;
    Polarity polarity = Polarity::asserted;
    std::map<std::string, std::string> attributes;
    std::optional<Date> event_date;  // defaults to the document date at extraction
    double confidence = 0.8;         // in (0, 1]
    Provenance provenance;
};

struct ExtractorConfig {
    double base_confidence = 0.8;
    std::map<ConceptId, double> confidence_overrides;
    std::size_t negation_window = 4;   // tokens before a mention
    std::size_t attribute_window = 6;  // tokens after a mention
};

/// Rule-based text reasoner: longest-match surface scan, negation cues within
/// the preceding window, adjacent attribute patterns, @date{YYYY-MM-DD} tags.
/// Builds its surface matcher once; extract() is const and thread-safe.
class FactExtractor {
public:
    FactExtractor(const Ontology& ontology, ExtractorConfig config = {});
    std::vector<Fact> extract(const Document& doc) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

std::vector<Fact> extract_facts(const Document& doc, const Ontology& ontology,
                                const ExtractorConfig& config = {});

enum class EventStatus { active, retracted };

struct ConsolidatedEvent {
    ConceptId concept_id;
    Polarity polarity = Polarity::asserted;
    std::map<std::string, std::string> attributes;
    DateInterval time;
    double confidence = 0.0;
    std::vector<Provenance> support;  // non-empty
    EventStatus status = EventStatus::active;
    std::string retraction_reason;  // conflict id when retracted
    bool derived = false;           // absence belief implied by asserts_absent;
                                    // never posted, never matches NEG atoms
    std::optional<Date> latest_evidence;  // most recent supporting date seen
};

struct Conflict {
    std::string id;           // "polarity:<n>" or constraint id + ":<n>"
    std::size_t winner = 0;   // event indexes into PatientModel::events
    std::size_t loser = 0;
    std::string kind;         // "polarity" | "constraint"
    std::string description;
};

struct PatientModel {
    std::string patient_id;
    std::vector<ConsolidatedEvent> events;
    std::vector<Conflict> conflicts;
};

/// Winner selection between two contradictory beliefs. Each level is tried in
/// order; the provenance level is a total, arrival-order-independent tiebreak.
enum class ResolutionPolicy {
    support_confidence_recency,  // default
    confidence_support_recency,  // "confidence-weighted"
};

struct ConsolidateConfig {
    std::int64_t merge_window_days = 365;
    ResolutionPolicy policy = ResolutionPolicy::support_confidence_recency;
};

/// Orders facts by (event_date with unknown last, provenance). consolidate
/// requires its input in this order.
bool fact_order_less(const Fact& a, const Fact& b);

/// Longitudinal reasoning: merges compatible facts (noisy-OR confidence),
/// records and resolves polarity and requires-constraint conflicts, derives
/// absence beliefs from asserts_absent concepts. Pure function of its input.
PatientModel consolidate(const std::string& patient_id, const std::vector<Fact>& facts,
                         const Ontology& ontology, const ConsolidateConfig& config = {});

/// Re-scan check that no active polarity or constraint conflict remains.
bool model_is_consistent(const PatientModel& model, const Ontology& ontology,
                         std::string* why = nullptr);

struct Posting {
    std::string patient_id;
    std::size_t event_index = 0;

    friend bool operator<(const Posting& a, const Posting& b) {
        if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
        return a.event_index < b.event_index;
    }
    friend bool operator==(const Posting& a, const Posting& b) = default;
};

/// Event-rooted inverted knowledge base: every active, non-derived event is
/// posted under its concept_id and all ontology ancestors. Immutable once built.
struct KnowledgeBase {
    std::map<std::string, PatientModel> models;
    std::map<ConceptId, std::vector<Posting>> postings;  // sorted by patient_id

    std::vector<std::string> patient_ids() const;
    const std::vector<Posting>& postings_for(const ConceptId& concept_id) const;
};

KnowledgeBase build_kb(std::vector<PatientModel> models, const Ontology& ontology);

/// Extract + consolidate every patient of a corpus (parallel across patients),
/// then index. jobs = 0 means the OpenMP default.
KnowledgeBase build_kb_from_corpus(const Corpus& corpus, const Ontology& ontology,
                                   const ExtractorConfig& ex = {},
                                   const ConsolidateConfig& cc = {});

/// Ground-truth journeys: already-clean event lists, no text pipeline. Absence
/// beliefs are still derived so constraint semantics match the text path.
/// Abstractions violating PatientModel invariants are rejected with patient_id.
struct Abstraction {
    std::string patient_id;
    std::vector<ConsolidatedEvent> events;  // status or conflicts are not read
};

KnowledgeBase build_kb_from_abstractions(const std::vector<Abstraction>& abstractions,
                                         const Ontology& ontology);

std::vector<Abstraction> parse_abstractions_jsonl(const std::string& content,
                                                  const std::string& origin = "<memory>");
std::vector<Abstraction> load_abstractions(const std::string& path);
std::string abstractions_to_jsonl(const std::vector<Abstraction>& abstractions);
void save_abstractions(const std::vector<Abstraction>& abstractions, const std::string& path);

/// Model persistence (JSONL, one patient per line) and the conflict audit log.
std::string models_to_jsonl(const KnowledgeBase& kb);
std::vector<PatientModel> parse_models_jsonl(const std::string& content);
std::string conflict_log_jsonl(const KnowledgeBase& kb);

}  // namespace acr
