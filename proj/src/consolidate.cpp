#include <algorithm>
#include <cmath>

#include "acr/error.hpp"
#include "acr/kb.hpp"

namespace acr {

namespace {

/// Shared attribute keys must agree; disjoint keys are compatible.
bool attributes_compatible(const std::map<std::string, std::string>& a,
                           const std::map<std::string, std::string>& b) {
    for (const auto& [key, value] : a) {
        auto it = b.find(key);
        if (it != b.end() && it->second != value) return false;
    }
    return true;
}

std::optional<Date> earlier(const std::optional<Date>& a, const std::optional<Date>& b) {
    if (!a) return b;
    if (!b) return a;
    return *a < *b ? a : b;
}

std::optional<Date> later(const std::optional<Date>& a, const std::optional<Date>& b) {
    if (!a) return b;
    if (!b) return a;
    return *a < *b ? b : a;
}

/// Distance in days from a date to the closest point of an interval; nullopt
/// bounds make the interval open on that side.
std::int64_t distance_to_interval(const Date& d, const DateInterval& iv) {
    if (iv.start && d < *iv.start) return iv.start->serial() - d.serial();
    if (iv.end && d > *iv.end) return d.serial() - iv.end->serial();
    return 0;
}

Provenance earliest_provenance(const ConsolidatedEvent& e) {
    return *std::min_element(e.support.begin(), e.support.end());
}

struct Engine {
    const Ontology& ontology;
    const ConsolidateConfig& config;
    PatientModel& model;
    std::size_t conflict_serial = 0;

    bool mergeable(const ConsolidatedEvent& existing, const ConsolidatedEvent& incoming) const {
        if (existing.status != EventStatus::active || existing.derived) return false;
        if (existing.concept_id != incoming.concept_id || existing.polarity != incoming.polarity)
            return false;
        if (!attributes_compatible(existing.attributes, incoming.attributes)) return false;
        if (incoming.time.start && (existing.time.start || existing.time.end)) {
            if (distance_to_interval(*incoming.time.start, existing.time) >
                config.merge_window_days)
                return false;
        }
        return true;
    }

    void merge_into(ConsolidatedEvent& existing, const ConsolidatedEvent& incoming) {
        existing.time.start = earlier(existing.time.start, incoming.time.start);
        existing.time.end = later(existing.time.end, incoming.time.end);
        for (const auto& [key, value] : incoming.attributes) existing.attributes.emplace(key, value);
        existing.support.insert(existing.support.end(), incoming.support.begin(),
                                incoming.support.end());
        existing.confidence = 1.0 - (1.0 - existing.confidence) * (1.0 - incoming.confidence);
        existing.latest_evidence = later(existing.latest_evidence, incoming.latest_evidence);
    }

    /// True when `a` beats `b` under the configured policy. The provenance
    /// level makes the order total and independent of arrival order.
    bool wins(const ConsolidatedEvent& a, const ConsolidatedEvent& b) const {
        auto by_support = [&](int& out) {
            if (a.support.size() != b.support.size())
                out = a.support.size() > b.support.size() ? 1 : -1;
        };
        auto by_confidence = [&](int& out) {
            if (a.confidence != b.confidence) out = a.confidence > b.confidence ? 1 : -1;
        };
        int cmp = 0;
        if (config.policy == ResolutionPolicy::support_confidence_recency) {
            by_support(cmp);
            if (cmp == 0) by_confidence(cmp);
        } else {
            by_confidence(cmp);
            if (cmp == 0) by_support(cmp);
        }
        if (cmp == 0) {
            const auto& ra = a.latest_evidence;
            const auto& rb = b.latest_evidence;
            if (ra.has_value() != rb.has_value()) cmp = ra.has_value() ? 1 : -1;
            else if (ra && rb && *ra != *rb) cmp = *ra > *rb ? 1 : -1;
        }
        if (cmp == 0) cmp = earliest_provenance(a) < earliest_provenance(b) ? 1 : -1;
        return cmp > 0;
    }

    /// Resolves a recorded conflict; returns the index of the retracted event.
    std::size_t resolve(std::size_t idx_a, std::size_t idx_b, const std::string& kind,
                        const std::string& constraint_id, const std::string& description) {
        auto& a = model.events[idx_a];
        auto& b = model.events[idx_b];
        const bool a_wins = wins(a, b);
        const std::size_t winner = a_wins ? idx_a : idx_b;
        const std::size_t loser = a_wins ? idx_b : idx_a;
        const std::string conflict_id = (constraint_id.empty() ? kind : constraint_id) + ":" +
                                        std::to_string(conflict_serial++);
        model.events[loser].status = EventStatus::retracted;
        model.events[loser].retraction_reason = conflict_id;
        retract_derived_children(loser);
        model.conflicts.push_back({conflict_id, winner, loser, kind, description});
        return loser;
    }

    // Derived absences carry the index of their source event in
    // derived_source; retracting the source retracts them too.
    std::vector<std::pair<std::size_t, std::size_t>> derived_links;  // (source, derived)

    void retract_derived_children(std::size_t source_idx) {
        for (const auto& [src, der] : derived_links) {
            if (src == source_idx && model.events[der].status == EventStatus::active) {
                model.events[der].status = EventStatus::retracted;
                model.events[der].retraction_reason =
                    "cascade:" + model.events[source_idx].retraction_reason;
            }
        }
    }

    bool absence_covers(const ConsolidatedEvent& absence, const ConsolidatedEvent& subject) const {
        // scope "from_event_date": the absence holds from its start onward.
        if (!absence.time.start || !subject.time.start) return false;  // fail-open
        return !(*subject.time.start < *absence.time.start);
    }

    /// Constraint checks for a newly active event; may retract it or others.
    /// Returns false when the event lost and was retracted.
    bool check_constraints(std::size_t idx) {
        // Case 1: the new event requires some concept_id present; conflict with
        // any active absence belief of that concept_id covering its date.
        if (model.events[idx].polarity == Polarity::asserted) {
            for (const auto* constraint : ontology.constraints_for(model.events[idx].concept_id)) {
                for (std::size_t j = 0; j < model.events.size(); ++j) {
                    if (j == idx) continue;
                    const auto& other = model.events[j];
                    if (other.status != EventStatus::active ||
                        other.polarity != Polarity::negated ||
                        other.concept_id != constraint->requires_present)
                        continue;
                    if (!absence_covers(other, model.events[idx])) continue;
                    const std::string desc = model.events[idx].concept_id + " requires " +
                                             constraint->requires_present +
                                             " present but an absence belief covers its date";
                    const std::size_t loser =
                        resolve(j, idx, "constraint", constraint->id, desc);
                    if (loser == idx) return false;
                }
            }
        }
        // Case 2: the new event is an absence belief; conflict with active
        // events that require this concept_id present at a covered date.
        if (model.events[idx].polarity == Polarity::negated) {
            for (std::size_t j = 0; j < model.events.size(); ++j) {
                if (j == idx) continue;
                const auto& other = model.events[j];
                if (other.status != EventStatus::active || other.polarity != Polarity::asserted)
                    continue;
                for (const auto* constraint : ontology.constraints_for(other.concept_id)) {
                    if (constraint->requires_present != model.events[idx].concept_id) continue;
                    if (!absence_covers(model.events[idx], other)) continue;
                    const std::string desc = other.concept_id + " requires " +
                                             constraint->requires_present +
                                             " present but an absence belief covers its date";
                    const std::size_t loser =
                        resolve(j, idx, "constraint", constraint->id, desc);
                    if (loser == idx) return false;
                }
            }
        }
        return true;
    }

    /// Absence beliefs implied by asserts_absent (inherited over ISA).
    void derive_absences(std::size_t source_idx) {
        if (model.events[source_idx].polarity != Polarity::asserted) return;
        std::vector<ConceptId> absent;
        for (const auto& anc : ontology.ancestors(model.events[source_idx].concept_id)) {
            for (const auto& organ : ontology.concept_info(anc).asserts_absent) absent.push_back(organ);
        }
        std::sort(absent.begin(), absent.end());
        absent.erase(std::unique(absent.begin(), absent.end()), absent.end());
        for (const auto& organ : absent) {
            // Fold into an existing active derived absence of the same organ;
            // its start may move earlier, so constraints are re-checked.
            bool folded = false;
            for (std::size_t j = 0; j < model.events.size(); ++j) {
                auto& e = model.events[j];
                if (e.derived && e.status == EventStatus::active && e.concept_id == organ) {
                    e.time.start = earlier(e.time.start, model.events[source_idx].time.start);
                    e.support.insert(e.support.end(), model.events[source_idx].support.begin(),
                                     model.events[source_idx].support.end());
                    e.confidence = 1.0 - (1.0 - e.confidence) *
                                             (1.0 - model.events[source_idx].confidence);
                    e.latest_evidence =
                        later(e.latest_evidence, model.events[source_idx].latest_evidence);
                    derived_links.emplace_back(source_idx, j);
                    check_constraints(j);
                    folded = true;
                    break;
                }
            }
            if (folded) continue;
            ConsolidatedEvent absence;
            absence.concept_id = organ;
            absence.polarity = Polarity::negated;
            absence.time = {model.events[source_idx].time.start, std::nullopt};
            absence.confidence = model.events[source_idx].confidence;
            absence.support = model.events[source_idx].support;
            absence.derived = true;
            absence.latest_evidence = model.events[source_idx].latest_evidence;
            model.events.push_back(std::move(absence));
            const std::size_t idx = model.events.size() - 1;
            derived_links.emplace_back(source_idx, idx);
            check_constraints(idx);
        }
    }

    void ingest(const Fact& fact) {
        ConsolidatedEvent incoming;
        incoming.concept_id = fact.concept_id;
        incoming.polarity = fact.polarity;
        incoming.attributes = fact.attributes;
        incoming.time = {fact.event_date, fact.event_date};
        incoming.confidence = fact.confidence;
        incoming.support = {fact.provenance};
        incoming.latest_evidence = fact.event_date;

        // (a) MERGE
        for (auto& existing : model.events) {
            if (mergeable(existing, incoming)) {
                merge_into(existing, incoming);
                return;
            }
        }

        model.events.push_back(std::move(incoming));
        const std::size_t idx = model.events.size() - 1;

        // (b) POLARITY CONFLICT against every compatible active opposite.
        for (std::size_t j = 0; j + 1 < model.events.size(); ++j) {
            const auto& other = model.events[j];
            if (other.status != EventStatus::active || other.derived) continue;
            if (other.concept_id != model.events[idx].concept_id) continue;
            if (other.polarity == model.events[idx].polarity) continue;
            if (!attributes_compatible(other.attributes, model.events[idx].attributes)) continue;
            const std::string desc =
                "contradictory polarity for " + model.events[idx].concept_id;
            const std::size_t loser = resolve(j, idx, "polarity", "", desc);
            if (loser == idx) return;
        }

        // (c) CONSTRAINT CONFLICT, then implied absences.
        if (!check_constraints(idx)) return;
        derive_absences(idx);
    }
};

}  // namespace

bool fact_order_less(const Fact& a, const Fact& b) {
    // (event_date with unknown last, provenance doc then span)
    if (a.event_date.has_value() != b.event_date.has_value()) return a.event_date.has_value();
    if (a.event_date && b.event_date && *a.event_date != *b.event_date)
        return *a.event_date < *b.event_date;
    return a.provenance < b.provenance;
}

PatientModel consolidate(const std::string& patient_id, const std::vector<Fact>& facts,
                         const Ontology& ontology, const ConsolidateConfig& config) {
    for (std::size_t i = 1; i < facts.size(); ++i) {
        if (fact_order_less(facts[i], facts[i - 1]))
            throw DataError("consolidate: facts for patient '" + patient_id +
                            "' are not in (event_date, provenance) order at position " +
                            std::to_string(i));
    }
    for (const auto& fact : facts) {
        if (!ontology.has_concept(fact.concept_id))
            throw DataError("consolidate: unknown concept_id '" + fact.concept_id + "'");
        if (!(fact.confidence > 0.0 && fact.confidence <= 1.0))
            throw DataError("consolidate: confidence out of (0,1] for '" + fact.concept_id + "'");
    }
    PatientModel model;
    model.patient_id = patient_id;
    Engine engine{ontology, config, model, 0, {}};
    for (const auto& fact : facts) engine.ingest(fact);
    return model;
}

bool model_is_consistent(const PatientModel& model, const Ontology& ontology, std::string* why) {
    const auto& events = model.events;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].status != EventStatus::active) continue;
        for (std::size_t j = i + 1; j < events.size(); ++j) {
            if (events[j].status != EventStatus::active) continue;
            if (events[i].derived || events[j].derived) continue;
            if (events[i].concept_id == events[j].concept_id &&
                events[i].polarity != events[j].polarity &&
                attributes_compatible(events[i].attributes, events[j].attributes)) {
                if (why)
                    *why = "active polarity conflict on " + events[i].concept_id + " for patient " +
                           model.patient_id;
                return false;
            }
        }
    }
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (e.status != EventStatus::active || e.polarity != Polarity::asserted) continue;
        for (const auto* constraint : ontology.constraints_for(e.concept_id)) {
            for (const auto& a : events) {
                if (a.status != EventStatus::active || a.polarity != Polarity::negated) continue;
                if (a.concept_id != constraint->requires_present) continue;
                if (!a.time.start || !e.time.start) continue;
                if (!(*e.time.start < *a.time.start)) {
                    if (why)
                        *why = "active constraint violation " + constraint->id + " for patient " +
                               model.patient_id;
                    return false;
                }
            }
        }
    }
    return true;
}

}  // namespace acr
