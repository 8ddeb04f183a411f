#include "acr/ontology.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include <json.hpp>

#include "acr/error.hpp"
#include "acr/io.hpp"

namespace acr {

std::string fold_case(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

Ontology Ontology::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw DataError("ontology: malformed JSON");
    Ontology ont;
    for (const auto& cj : j.value("concepts", nlohmann::json::array())) {
        Concept c;
        c.id = cj.at("id").get<std::string>();
        c.surface_forms = cj.value("surface_forms", std::vector<std::string>{});
        c.parents = cj.value("parents", std::vector<std::string>{});
        c.attributes_schema = cj.value("attributes_schema", std::vector<std::string>{});
        c.asserts_absent = cj.value("asserts_absent", std::vector<std::string>{});
        ont.add_concept(std::move(c));
    }
    for (const auto& kj : j.value("constraints", nlohmann::json::array())) {
        RequiresConstraint k;
        k.id = kj.at("id").get<std::string>();
        k.subject_concept = kj.at("subject_concept").get<std::string>();
        k.requires_present = kj.at("requires_present").get<std::string>();
        k.scope = kj.value("scope", std::string("from_event_date"));
        ont.add_constraint(std::move(k));
    }
    if (j.contains("ordinals")) {
        for (const auto& [attr, values] : j["ordinals"].items())
            ont.add_ordinal_scale(attr, values.get<std::vector<std::string>>());
    }
    ont.finalize();
    return ont;
}

Ontology Ontology::load(const std::string& path) { return from_json(read_file(path)); }

std::string Ontology::to_json() const {
    nlohmann::ordered_json j;
    j["concepts"] = nlohmann::ordered_json::array();
    for (const auto& [id, c] : concepts_) {
        nlohmann::ordered_json cj;
        cj["id"] = c.id;
        cj["surface_forms"] = c.surface_forms;
        cj["parents"] = c.parents;
        cj["attributes_schema"] = c.attributes_schema;
        cj["asserts_absent"] = c.asserts_absent;
        j["concepts"].push_back(cj);
    }
    j["constraints"] = nlohmann::ordered_json::array();
    for (const auto& k : constraints_) {
        nlohmann::ordered_json kj;
        kj["id"] = k.id;
        kj["subject_concept"] = k.subject_concept;
        kj["requires_present"] = k.requires_present;
        kj["scope"] = k.scope;
        j["constraints"].push_back(kj);
    }
    j["ordinals"] = nlohmann::ordered_json::object();
    for (const auto& [attr, values] : ordinals_) j["ordinals"][attr] = values;
    return j.dump(2) + "\n";
}

void Ontology::save(const std::string& path) const { write_file_atomic(path, to_json()); }

void Ontology::add_concept(Concept c) {
    if (concepts_.count(c.id)) throw DataError("ontology: duplicate concept_id id '" + c.id + "'");
    concepts_.emplace(c.id, std::move(c));
}

void Ontology::add_constraint(RequiresConstraint c) { constraints_.push_back(std::move(c)); }

void Ontology::add_ordinal_scale(const std::string& attribute, std::vector<std::string> values) {
    ordinals_[attribute] = std::move(values);
}

void Ontology::finalize() {
    surface_to_concept_.clear();
    closures_.clear();
    ancestors_.clear();
    depths_.clear();

    for (const auto& [id, c] : concepts_) {
        for (const auto& parent : c.parents) {
            if (!concepts_.count(parent))
                throw DataError("ontology: concept_id '" + id + "' has unknown parent '" + parent +
                                "'");
        }
        for (const auto& absent : c.asserts_absent) {
            if (!concepts_.count(absent))
                throw DataError("ontology: concept_id '" + id + "' asserts absence of unknown '" +
                                absent + "'");
        }
        auto claim = [&](const std::string& name) {
            const std::string key = fold_case(name);
            auto [it, inserted] = surface_to_concept_.emplace(key, id);
            if (!inserted && it->second != id)
                throw DataError("ontology: surface form '" + name + "' is ambiguous between '" +
                                it->second + "' and '" + id + "'");
        };
        claim(id);
        for (const auto& form : c.surface_forms) claim(form);
    }
    for (const auto& k : constraints_) {
        if (!concepts_.count(k.subject_concept) || !concepts_.count(k.requires_present))
            throw DataError("ontology: constraint '" + k.id + "' references unknown concepts");
        if (k.scope != "from_event_date")
            throw DataError("ontology: constraint '" + k.id + "' has unsupported scope '" +
                            k.scope + "'");
    }

    // Cycle check + depth via DFS over parent edges.
    enum class Mark { unvisited, active, done };
    std::map<ConceptId, Mark> marks;
    std::function<std::size_t(const ConceptId&)> visit = [&](const ConceptId& id) -> std::size_t {
        auto& mark = marks[id];
        if (mark == Mark::active) throw DataError("ontology: ISA cycle through '" + id + "'");
        if (mark == Mark::done) return depths_[id];
        mark = Mark::active;
        std::size_t depth = 0;
        for (const auto& parent : concepts_.at(id).parents)
            depth = std::max(depth, visit(parent) + 1);
        mark = Mark::done;
        depths_[id] = depth;
        return depth;
    };
    for (const auto& [id, c] : concepts_) visit(id);

    for (const auto& [id, c] : concepts_) ancestors_[id].insert(id);
    // Propagate ancestors in topological order (by depth).
    std::vector<ConceptId> by_depth;
    for (const auto& [id, c] : concepts_) by_depth.push_back(id);
    std::sort(by_depth.begin(), by_depth.end(), [&](const ConceptId& a, const ConceptId& b) {
        if (depths_[a] != depths_[b]) return depths_[a] < depths_[b];
        return a < b;
    });
    for (const auto& id : by_depth) {
        for (const auto& parent : concepts_.at(id).parents) {
            const auto& pa = ancestors_.at(parent);
            ancestors_[id].insert(pa.begin(), pa.end());
        }
    }
    // Descendant closure = inverse of ancestors.
    for (const auto& [id, c] : concepts_) closures_[id].insert(id);
    for (const auto& [id, anc] : ancestors_) {
        for (const auto& a : anc) closures_[a].insert(id);
    }
}

const Concept& Ontology::concept_info(const ConceptId& id) const {
    auto it = concepts_.find(id);
    if (it == concepts_.end()) throw DataError("unknown concept_id '" + id + "'");
    return it->second;
}

std::optional<ConceptId> Ontology::resolve(const std::string& name) const {
    auto it = surface_to_concept_.find(fold_case(name));
    if (it == surface_to_concept_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> Ontology::nearest_surface_forms(const std::string& name,
                                                         std::size_t max_results) const {
    // Rank known surface forms by shared lowercase token count, then length gap.
    const std::string folded = fold_case(name);
    std::vector<std::pair<int, std::string>> scored;
    for (const auto& [form, id] : surface_to_concept_) {
        int shared = 0;
        std::size_t pos = 0;
        while (pos < folded.size()) {
            std::size_t sp = folded.find(' ', pos);
            if (sp == std::string::npos) sp = folded.size();
            if (sp > pos && form.find(folded.substr(pos, sp - pos)) != std::string::npos) ++shared;
            pos = sp + 1;
        }
        scored.emplace_back(-shared, form);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (const auto& [neg, form] : scored) {
        if (neg == 0 || out.size() >= max_results) break;
        out.push_back(form);
    }
    return out;
}

const std::set<ConceptId>& Ontology::closure(const ConceptId& id) const {
    auto it = closures_.find(id);
    if (it == closures_.end()) throw DataError("unknown concept_id '" + id + "'");
    return it->second;
}

const std::set<ConceptId>& Ontology::ancestors(const ConceptId& id) const {
    auto it = ancestors_.find(id);
    if (it == ancestors_.end()) throw DataError("unknown concept_id '" + id + "'");
    return it->second;
}

std::size_t Ontology::depth(const ConceptId& id) const {
    auto it = depths_.find(id);
    if (it == depths_.end()) throw DataError("unknown concept_id '" + id + "'");
    return it->second;
}

std::optional<std::size_t> Ontology::ordinal_rank(const std::string& attribute,
                                                  const std::string& value) const {
    auto it = ordinals_.find(attribute);
    if (it == ordinals_.end()) return std::nullopt;
    const auto& scale = it->second;
    auto pos = std::find(scale.begin(), scale.end(), value);
    if (pos == scale.end()) return std::nullopt;
    return static_cast<std::size_t>(pos - scale.begin());
}

std::vector<const RequiresConstraint*> Ontology::constraints_for(const ConceptId& id) const {
    std::vector<const RequiresConstraint*> out;
    const auto& anc = ancestors(id);
    for (const auto& k : constraints_) {
        if (anc.count(k.subject_concept)) out.push_back(&k);
    }
    return out;
}

}  // namespace acr
