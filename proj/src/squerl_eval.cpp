#include <algorithm>
#include <set>

#include "acr/error.hpp"
#include "acr/squerl.hpp"

namespace acr {

namespace {

bool filters_pass(const ConsolidatedEvent& event, const std::vector<AtomFilter>& filters,
                  const Ontology& ontology) {
    for (const auto& f : filters) {
        auto it = event.attributes.find(f.attribute);
        if (it == event.attributes.end()) return false;  // undocumented: fail closed
        switch (f.comparator) {
            case Comparator::eq:
                if (it->second != f.value) return false;
                break;
            case Comparator::ne:
                if (it->second == f.value) return false;
                break;
            case Comparator::ge:
            case Comparator::le: {
                const auto have = ontology.ordinal_rank(f.attribute, it->second);
                const auto want = ontology.ordinal_rank(f.attribute, f.value);
                if (!have || !want) return false;
                if (f.comparator == Comparator::ge ? *have < *want : *have > *want) return false;
                break;
            }
        }
    }
    return true;
}

bool event_matches_atom(const ConsolidatedEvent& event, const QueryAst& atom,
                        const Ontology& ontology) {
    if (event.status != EventStatus::active || event.derived) return false;
    if (event.polarity != atom.polarity) return false;
    if (!ontology.ancestors(event.concept_id).count(atom.concept_id)) return false;
    return filters_pass(event, atom.filters, ontology);
}

using IdSet = std::vector<std::string>;  // sorted, unique

IdSet set_and(const IdSet& a, const IdSet& b) {
    IdSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

IdSet set_or(const IdSet& a, const IdSet& b) {
    IdSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

IdSet set_except(const IdSet& a, const IdSet& b) {
    IdSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

struct Evaluator {
    const KnowledgeBase& kb;
    const Ontology& ontology;
    const IdSet& universe;
    std::map<std::string, double> witness;  // patient -> summed atom-match confidence

    IdSet eval_atom(const QueryAst& atom) {
        // Postings are ontology-closed, so postings_for(concept_id) is exactly
        // the candidate (patient, event) list for the closure.
        IdSet out;
        for (const auto& posting : kb.postings_for(atom.concept_id)) {
            const auto& model = kb.models.at(posting.patient_id);
            const auto& event = model.events[posting.event_index];
            if (event.polarity != atom.polarity) continue;
            if (!filters_pass(event, atom.filters, ontology)) continue;
            witness[posting.patient_id] += event.confidence;
            if (out.empty() || out.back() != posting.patient_id)
                out.push_back(posting.patient_id);
        }
        return out;  // postings are sorted by patient_id
    }

    IdSet eval_before(const QueryAst& node) {
        const IdSet a = eval_atom(*node.left);
        const IdSet b = eval_atom(*node.right);
        IdSet out;
        for (const auto& pid : set_and(a, b)) {
            const auto& model = kb.models.at(pid);
            bool found = false;
            for (const auto& ea : model.events) {
                if (found) break;
                if (!event_matches_atom(ea, *node.left, ontology) || !ea.time.end) continue;
                for (const auto& eb : model.events) {
                    if (!event_matches_atom(eb, *node.right, ontology) || !eb.time.start) continue;
                    if (*ea.time.end < *eb.time.start) {
                        found = true;
                        break;
                    }
                }
            }
            if (found) out.push_back(pid);
        }
        return out;
    }

    IdSet eval(const QueryAst& ast) {
        switch (ast.kind) {
            case QueryAst::Kind::atom: return eval_atom(ast);
            case QueryAst::Kind::and_: return set_and(eval(*ast.left), eval(*ast.right));
            case QueryAst::Kind::or_: return set_or(eval(*ast.left), eval(*ast.right));
            case QueryAst::Kind::except: return set_except(eval(*ast.left), eval(*ast.right));
            case QueryAst::Kind::not_: return set_except(universe, eval(*ast.left));
            case QueryAst::Kind::before: return eval_before(ast);
        }
        return {};
    }
};

}  // namespace

bool Cohort::contains(const std::string& id) const {
    return std::binary_search(patient_ids.begin(), patient_ids.end(), id);
}

Cohort execute(const QueryAst& ast, const KnowledgeBase& kb, const Ontology& ontology) {
    const IdSet universe = kb.patient_ids();
    Evaluator evaluator{kb, ontology, universe, {}};
    IdSet members = evaluator.eval(ast);

    Cohort cohort;
    cohort.patient_ids = std::move(members);
    std::vector<Cohort::Ranked> ranking;
    ranking.reserve(cohort.patient_ids.size());
    for (const auto& pid : cohort.patient_ids) {
        const auto it = evaluator.witness.find(pid);
        ranking.push_back({pid, it == evaluator.witness.end() ? 0.0 : it->second});
    }
    std::stable_sort(ranking.begin(), ranking.end(),
                     [](const Cohort::Ranked& a, const Cohort::Ranked& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.patient_id < b.patient_id;
                     });
    cohort.ranking = std::move(ranking);
    return cohort;
}

bool patient_satisfies(const QueryAst& ast, const PatientModel& model, const Ontology& ontology) {
    switch (ast.kind) {
        case QueryAst::Kind::atom:
            for (const auto& e : model.events) {
                if (event_matches_atom(e, ast, ontology)) return true;
            }
            return false;
        case QueryAst::Kind::and_:
            return patient_satisfies(*ast.left, model, ontology) &&
                   patient_satisfies(*ast.right, model, ontology);
        case QueryAst::Kind::or_:
            return patient_satisfies(*ast.left, model, ontology) ||
                   patient_satisfies(*ast.right, model, ontology);
        case QueryAst::Kind::except:
            return patient_satisfies(*ast.left, model, ontology) &&
                   !patient_satisfies(*ast.right, model, ontology);
        case QueryAst::Kind::not_:
            return !patient_satisfies(*ast.left, model, ontology);
        case QueryAst::Kind::before:
            for (const auto& ea : model.events) {
                if (!event_matches_atom(ea, *ast.left, ontology) || !ea.time.end) continue;
                for (const auto& eb : model.events) {
                    if (!event_matches_atom(eb, *ast.right, ontology) || !eb.time.start) continue;
                    if (*ea.time.end < *eb.time.start) return true;
                }
            }
            return false;
    }
    return false;
}

}  // namespace acr
