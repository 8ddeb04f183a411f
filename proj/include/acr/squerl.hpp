#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acr/kb.hpp"
#include "acr/ontology.hpp"

namespace acr {

enum class Comparator { eq, ne, ge, le };

std::string to_string(Comparator c);

struct AtomFilter {
    std::string attribute;
    Comparator comparator = Comparator::eq;
    std::string value;

    friend bool operator==(const AtomFilter&, const AtomFilter&) = default;
};

/// Query AST. Atom concepts are canonical (resolved at parse time); Before
/// operands are restricted to atoms by the grammar.
struct QueryAst {
    enum class Kind { atom, and_, or_, except, not_, before };

    Kind kind = Kind::atom;
    // atom payload
    ConceptId concept_id;
    Polarity polarity = Polarity::asserted;
    std::vector<AtomFilter> filters;
    // operator payload
    std::unique_ptr<QueryAst> left;
    std::unique_ptr<QueryAst> right;

    std::unique_ptr<QueryAst> clone() const;
};

bool ast_equal(const QueryAst& a, const QueryAst& b);

/// Canonical rendering; reparses to an equal AST.
std::string pretty_print(const QueryAst& ast);

/// Recursive-descent parser for the grammar in docs/squerl.md. Names are
/// resolved against ontology surface forms and ids, case-insensitive, longest
/// match. Throws ParseError with a byte offset; unresolvable names list the
/// nearest known surface forms.
std::unique_ptr<QueryAst> parse(const std::string& squerl_text, const Ontology& ontology);

/// Patient-id set with an optional total ranking over exactly the member set.
struct Cohort {
    std::vector<std::string> patient_ids;  // sorted ascending, unique

    struct Ranked {
        std::string patient_id;
        double score = 0.0;
    };
    std::optional<std::vector<Ranked>> ranking;  // descending score, ties by id

    bool contains(const std::string& id) const;
    std::size_t size() const { return patient_ids.size(); }
};

/// Set-semantics evaluation over the knowledge base. Atoms match active,
/// non-derived events whose concept_id is in the ISA closure, with the requested
/// polarity and all filters satisfied. The ranking orders patients by the sum
/// of witnessing-event confidences (descending, ties by patient_id).
Cohort execute(const QueryAst& ast, const KnowledgeBase& kb, const Ontology& ontology);

/// True when one patient's events satisfy the query; execute() distributes
/// this predicate over the whole knowledge base.
bool patient_satisfies(const QueryAst& ast, const PatientModel& model, const Ontology& ontology);

struct QueryRelation {
    std::string kind;  // paraphrase_of | child_of | intersection_of
    std::string other_query_id;
};

struct QueryRecord {
    std::string query_id;
    std::string nl_text;
    std::string squerl_text;  // authoritative
    std::string expert_class;  // Base | Low | Medium | Hard
    std::vector<QueryRelation> relations;
};

std::vector<QueryRecord> parse_query_bank_jsonl(const std::string& content,
                                                const std::string& origin = "<memory>");
std::vector<QueryRecord> load_query_bank(const std::string& path);
std::string query_bank_to_jsonl(const std::vector<QueryRecord>& bank);
void save_query_bank(const std::vector<QueryRecord>& bank, const std::string& path);

/// Validates a bank: squerl_text parses, relations reference existing ids.
void validate_query_bank(const std::vector<QueryRecord>& bank, const Ontology& ontology);

/// The fixed phrase table shared by the NL renderer (synthgen) and the NL
/// translator, so translation is the exact inverse of generation.
struct NlPhrases {
    std::vector<std::string> prefixes;         // "find me patients", ...
    std::vector<std::string> with_connectors;  // "with", "treated with", ...
    std::string and_word = "and";
    std::string or_word = "or";
    std::string except_word = "except";
    std::string before_word = "before";
    std::string neg_marker = "documented absence of";
    std::string not_marker = "no record of";
    std::string ge_marker = "at least";
    std::string le_marker = "at most";
    std::string ne_marker = "other than";

    static const NlPhrases& standard();
};

/// Deterministic template inverse for bank NL text. Unknown phrasing throws
/// DataError (never guesses). Returns canonical squerl_text.
std::string translate_nl(const std::string& nl_text, const NlPhrases& phrases,
                         const Ontology& ontology);

}  // namespace acr
