#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace acr {

using ConceptId = std::string;

struct Concept {
    ConceptId id;
    std::vector<std::string> surface_forms;  // first form is the preferred rendering
    std::vector<ConceptId> parents;          // ISA edges; the graph is a DAG
    std::vector<std::string> attributes_schema;
    std::vector<ConceptId> asserts_absent;   // e.g. hysterectomy -> uterus
};

/// `subject_concept` events are inconsistent with a documented absence of
/// `requires_present` holding at the subject's date (scope "from_event_date").
struct RequiresConstraint {
    std::string id;
    ConceptId subject_concept;
    ConceptId requires_present;
    std::string scope = "from_event_date";
};

class Ontology {
public:
    static Ontology from_json(const std::string& json_text);
    static Ontology load(const std::string& path);
    std::string to_json() const;
    void save(const std::string& path) const;

    void add_concept(Concept c);
    void add_constraint(RequiresConstraint c);
    void add_ordinal_scale(const std::string& attribute, std::vector<std::string> values);

    /// Validates DAG-ness, parent references, constraint references. Builds
    /// the surface-form and closure tables. Must be called after mutation and
    /// before queries; from_json does this automatically.
    void finalize();

    bool has_concept(const ConceptId& id) const { return concepts_.count(id) > 0; }
    const Concept& concept_info(const ConceptId& id) const;
    const std::map<ConceptId, Concept>& concepts() const { return concepts_; }
    const std::vector<RequiresConstraint>& constraints() const { return constraints_; }
    const std::map<std::string, std::vector<std::string>>& ordinal_scales() const {
        return ordinals_;
    }

    /// Canonical concept_id for a surface form or id, case-insensitive. Nullopt
    /// when unknown.
    std::optional<ConceptId> resolve(const std::string& name) const;

    /// Nearest surface forms for error messages (shared-token heuristic).
    std::vector<std::string> nearest_surface_forms(const std::string& name,
                                                   std::size_t max_results = 3) const;

    /// Reflexive-transitive ISA closure: the concept plus all descendants.
    const std::set<ConceptId>& closure(const ConceptId& id) const;

    /// The concept plus all ancestors (used for posting expansion).
    const std::set<ConceptId>& ancestors(const ConceptId& id) const;

    /// Longest root distance; roots have depth 0.
    std::size_t depth(const ConceptId& id) const;

    /// Position of a value on an attribute's ordinal scale, if that attribute
    /// is ordinal and the value is on the scale.
    std::optional<std::size_t> ordinal_rank(const std::string& attribute,
                                            const std::string& value) const;
    bool is_ordinal_attribute(const std::string& attribute) const {
        return ordinals_.count(attribute) > 0;
    }

    /// Constraints whose subject is `id` or an ancestor of `id`.
    std::vector<const RequiresConstraint*> constraints_for(const ConceptId& id) const;

private:
    std::map<ConceptId, Concept> concepts_;
    std::vector<RequiresConstraint> constraints_;
    std::map<std::string, std::vector<std::string>> ordinals_;

    // built by finalize()
    std::map<std::string, ConceptId> surface_to_concept_;  // lowercased
    std::map<ConceptId, std::set<ConceptId>> closures_;
    std::map<ConceptId, std::set<ConceptId>> ancestors_;
    std::map<ConceptId, std::size_t> depths_;
};

/// Lowercases ASCII letters; used for all surface-form matching.
std::string fold_case(const std::string& s);

}  // namespace acr
