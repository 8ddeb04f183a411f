#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acr/corpus.hpp"
#include "acr/eval.hpp"
#include "acr/kb.hpp"
#include "acr/ontology.hpp"
#include "acr/squerl.hpp"

namespace acr {

struct DistSpec {
    std::size_t min = 1;
    std::size_t max = 1;
    std::string shape = "uniform";  // uniform | skewed (quadratic toward min)
};

struct GeneratorParams {
    std::uint64_t seed = 42;
    std::size_t n_patients = 1000;
    DistSpec docs_per_patient{20, 100, "uniform"};  // mean ~60 at defaults
    DistSpec events_per_patient{3, 9, "uniform"};
    double paraphrase_rate = 0.3;
    double contradiction_rate = 0.02;  // per document when coupled, else per patient
    bool contradiction_length_coupling = true;
    std::size_t n_queries = 200;
    double zero_result_fraction = 0.15;
    std::size_t ontology_filler_concepts = 16;
    // category thresholds used for bank coverage steering; scale with n_patients
    std::size_t alpha = 50;
    std::size_t beta = 10;

    void validate() const;
};

struct InjectionLogEntry {
    std::string patient_id;
    std::string doc_id;
    std::string kind;  // "polarity" | "constraint"
    ConceptId concept_id;
};

struct SynthOutput {
    Corpus corpus;
    std::vector<Abstraction> abstractions;  // clean ground-truth journeys
    std::vector<InjectionLogEntry> injection_log;
};

/// Deterministic oncology-shaped ontology: condition/biomarker/therapy
/// hierarchies with brand/generic synonym pairs, the five-level therapy chain
/// down to osimertinib, a stage ordinal scale, organ-removal assertions and
/// the pregnancy/uterus constraint, plus seeded filler concepts.
Ontology gen_ontology(std::uint64_t seed, std::size_t filler_concepts = 16);

/// Concepts the journey sampler and contradiction injector never touch;
/// queries over them are provably zero-result.
const std::vector<ConceptId>& reserved_zero_result_concepts();

/// Longitudinal journeys rendered into scattered documents. Per-patient RNG
/// streams are split from the master seed, so adding patients never perturbs
/// existing ones. Byte-deterministic for fixed (seed, params).
SynthOutput gen_patients(const GeneratorParams& params, const Ontology& ontology);

/// Query bank with paraphrase/intersection/subtype relations, a subtype chain
/// of length >= 4, expert-class labels from the deterministic rubric, and
/// zero-result queries built only from reserved concepts. Throws DataError if
/// category coverage (>= 3 queries each in Broad/Narrow/Sparse/ZeroResult)
/// cannot be met.
std::vector<QueryRecord> gen_query_bank(const GeneratorParams& params, const Ontology& ontology,
                                        const std::vector<Abstraction>& abstractions);

/// Gold matrix by deterministic reasoning over the clean abstractions.
GoldMatrix gen_gold(const std::vector<Abstraction>& abstractions,
                    const std::vector<QueryRecord>& bank, const Ontology& ontology);

/// Rubric: 3*(operators) + (filters) + (negated atoms) + max(0, deepest atom
/// concept depth - 3); 0 = Base, <=2 Low, <=6 Medium, else Hard.
std::string expert_class_for(const QueryAst& ast, const Ontology& ontology);

}  // namespace acr
