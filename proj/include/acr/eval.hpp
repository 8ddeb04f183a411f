#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acr/corpus.hpp"
#include "acr/squerl.hpp"

namespace acr {

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    friend bool operator==(const Confusion&, const Confusion&) = default;
};

enum class QueryCategory { broad, narrow, sparse, zero_result };

std::string to_string(QueryCategory c);

/// n >= alpha -> Broad; beta <= n < alpha -> Narrow; 1 <= n < beta -> Sparse;
/// n = 0 -> ZeroResult. Requires 1 <= beta < alpha.
QueryCategory categorize(std::size_t gold_size, std::size_t alpha, std::size_t beta);

/// Set-theoretic counts. pred and gold must be subsets of the population.
Confusion confusion(const Cohort& pred, const Cohort& gold,
                    const std::vector<std::string>& population);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Per-query scores with the division-by-zero convention: a zero denominator
/// yields a score of 0.
Prf prf(const Confusion& c);

/// Unweighted mean of per-query P, R and F1. Throws DataError on empty input.
Prf macro_prf(const std::vector<Confusion>& confusions);

/// P/R/F1 of the summed counts. Throws DataError on empty input.
Prf micro_prf(const std::vector<Confusion>& confusions);

/// HR = FP / (TP + FN); a ratio, not a percentage. Throws DataError when
/// TP + FN = 0 (zero-result queries must use fp_count instead).
double hallucination_ratio(const Confusion& c);

std::size_t fp_count(const Cohort& pred, const Cohort& gold);

/// Truncates the ranked prediction to k = |gold| (all of it when smaller),
/// then computes the confusion. Throws DataError when the ranking is missing.
Confusion oracle_topk(const Cohort& ranked_pred, const Cohort& gold,
                      const std::vector<std::string>& population);

struct ParaphraseDiff {
    std::size_t a_minus_b = 0;
    std::size_t b_minus_a = 0;
    double pct_of_a = 0.0;  // |A \ B| relative to |A|; 0 when A is empty
    double pct_of_b = 0.0;
};

ParaphraseDiff paraphrase_check(const Cohort& a, const Cohort& b);

/// |C_B \ C_A|: patients of the complex cohort outside the base cohort.
std::size_t intersection_check(const Cohort& base, const Cohort& complex_cohort);

/// |C_C \ C_P|: patients of the child cohort outside the parent cohort.
std::size_t subtype_check(const Cohort& parent, const Cohort& child);

/// Gold labels for a query bank over a patient population.
struct GoldMatrix {
    std::map<std::string, Cohort> gold;  // query_id -> cohort
    std::vector<std::string> population;  // sorted

    void validate(const std::vector<QueryRecord>& bank) const;
};

GoldMatrix parse_gold_jsonl(const std::string& content, std::vector<std::string> population,
                            const std::string& origin = "<memory>");
GoldMatrix load_gold(const std::string& path, std::vector<std::string> population);
std::string gold_to_jsonl(const GoldMatrix& gold);
void save_gold(const GoldMatrix& gold, const std::string& path);

/// Cohort interchange file: {query_id, patient_ids[], ranking?[]} per line.
std::map<std::string, Cohort> parse_cohorts_jsonl(const std::string& content,
                                                  const std::string& origin = "<memory>");
std::map<std::string, Cohort> load_cohorts(const std::string& path);
std::string cohorts_to_jsonl(const std::map<std::string, Cohort>& cohorts);
void save_cohorts(const std::map<std::string, Cohort>& cohorts, const std::string& path);

/// Deterministic document-count terciles: patients sorted by (N_d, patient_id)
/// and cut into three nearly-equal groups; tercile(i) = 3*i / n.
std::map<std::string, int> doc_count_terciles(const std::map<std::string, std::size_t>& doc_counts);

std::map<std::string, std::size_t> corpus_doc_counts(const Corpus& corpus);

// ---------------------------------------------------------------------------
// Report assembly

struct PerQueryEval {
    std::string query_id;
    QueryCategory category = QueryCategory::zero_result;
    std::size_t gold_size = 0;
    std::size_t pred_size = 0;
    Confusion cohort_confusion;
    Prf cohort_prf;
    std::optional<Confusion> oracle_confusion;  // present when ranking given
    std::optional<Prf> oracle_prf;
    std::optional<double> hr;  // absent for zero-result queries
    std::size_t false_positives = 0;
    double fpr = 0.0;  // fp / (fp + tn), 0 when undefined; derivable, not headline
};

struct CategoryEval {
    QueryCategory category = QueryCategory::broad;
    std::string averaging;  // "macro" | "micro"
    std::size_t n_queries = 0;
    Prf cohort;
    std::optional<Prf> oracle;
};

struct ExpertStratum {
    std::string expert_class;
    std::size_t n_queries = 0;
    Prf macro;
};

struct TercileStratum {
    int tercile = 0;  // 0 = bottom, 1 = middle, 2 = top
    std::size_t n_patients = 0;
    std::size_t nd_min = 0;
    std::size_t nd_max = 0;
    std::size_t n_queries = 0;
    Prf macro;
};

struct ConsistencyRow {
    std::string kind;  // paraphrase | intersection | subtype
    std::string query_a;  // base / parent / paraphrase A
    std::string query_b;
    std::size_t size_a = 0;
    std::size_t size_b = 0;
    std::size_t violations = 0;     // |B \ A| (paraphrase rows also carry reverse)
    std::size_t violations_rev = 0; // |A \ B| for paraphrase rows
};

struct EvalReport {
    std::string system;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version;
    std::size_t population_size = 0;
    std::size_t alpha = 50;
    std::size_t beta = 10;
    std::vector<CategoryEval> categories;
    std::vector<PerQueryEval> per_query;
    std::vector<ExpertStratum> expert_strata;
    std::vector<TercileStratum> tercile_strata;
    std::vector<ConsistencyRow> consistency;
};

struct EvalInputs {
    const std::vector<QueryRecord>& bank;
    const GoldMatrix& gold;
    const std::map<std::string, Cohort>& cohorts;  // system predictions
    std::size_t alpha = 50;
    std::size_t beta = 10;
    /// Per-patient document counts for tercile strata; empty disables them.
    std::map<std::string, std::size_t> doc_counts;
};

/// Scores a system's cohorts against gold across the whole bank. Per-query
/// metrics are computed in parallel and reduced deterministically.
EvalReport evaluate(const EvalInputs& inputs);

/// Gold-free set-theoretic consistency checks from bank relations.
std::vector<ConsistencyRow> consistency_checks(const std::vector<QueryRecord>& bank,
                                               const std::map<std::string, Cohort>& cohorts);

/// Integer percent, half away from zero; display only.
int display_percent(double fraction);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);
std::string report_to_markdown(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);

}  // namespace acr
