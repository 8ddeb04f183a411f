#include "acr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <json.hpp>

#include "acr/error.hpp"
#include "acr/io.hpp"

namespace acr {

std::string to_string(QueryCategory c) {
    switch (c) {
        case QueryCategory::broad: return "Broad";
        case QueryCategory::narrow: return "Narrow";
        case QueryCategory::sparse: return "Sparse";
        case QueryCategory::zero_result: return "ZeroResult";
    }
    return "?";
}

QueryCategory categorize(std::size_t gold_size, std::size_t alpha, std::size_t beta) {
    if (beta < 1 || beta >= alpha)
        throw DataError("categorize requires 1 <= beta < alpha, got alpha=" +
                        std::to_string(alpha) + " beta=" + std::to_string(beta));
    if (gold_size >= alpha) return QueryCategory::broad;
    if (gold_size >= beta) return QueryCategory::narrow;
    if (gold_size >= 1) return QueryCategory::sparse;
    return QueryCategory::zero_result;
}

namespace {

bool subset_of(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::size_t intersection_size(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
    std::size_t count = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (b[j] < a[i]) ++j;
        else { ++count; ++i; ++j; }
    }
    return count;
}

}  // namespace

Confusion confusion(const Cohort& pred, const Cohort& gold,
                    const std::vector<std::string>& population) {
    if (!subset_of(pred.patient_ids, population))
        throw DataError("confusion: prediction contains ids outside the population");
    if (!subset_of(gold.patient_ids, population))
        throw DataError("confusion: gold contains ids outside the population");
    Confusion c;
    const std::size_t both = intersection_size(pred.patient_ids, gold.patient_ids);
    c.tp = both;
    c.fp = pred.size() - both;
    c.fn = gold.size() - both;
    c.tn = population.size() - c.tp - c.fp - c.fn;
    return c;
}

Prf prf(const Confusion& c) {
    Prf out;
    out.precision = (c.tp + c.fp) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    out.recall = (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

Prf macro_prf(const std::vector<Confusion>& confusions) {
    if (confusions.empty()) throw DataError("macro_prf on an empty query set");
    Prf sum;
    for (const auto& c : confusions) {
        const Prf q = prf(c);
        sum.precision += q.precision;
        sum.recall += q.recall;
        sum.f1 += q.f1;
    }
    const double n = static_cast<double>(confusions.size());
    return {sum.precision / n, sum.recall / n, sum.f1 / n};
}

Prf micro_prf(const std::vector<Confusion>& confusions) {
    if (confusions.empty()) throw DataError("micro_prf on an empty query set");
    Confusion total;
    for (const auto& c : confusions) {
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
        total.tn += c.tn;
    }
    return prf(total);
}

double hallucination_ratio(const Confusion& c) {
    if (c.tp + c.fn == 0)
        throw DataError(
            "hallucination ratio is undefined when the gold cohort is empty; use fp_count");
    return static_cast<double>(c.fp) / static_cast<double>(c.tp + c.fn);
}

std::size_t fp_count(const Cohort& pred, const Cohort& gold) {
    std::vector<std::string> diff;
    std::set_difference(pred.patient_ids.begin(), pred.patient_ids.end(),
                        gold.patient_ids.begin(), gold.patient_ids.end(),
                        std::back_inserter(diff));
    return diff.size();
}

Confusion oracle_topk(const Cohort& ranked_pred, const Cohort& gold,
                      const std::vector<std::string>& population) {
    if (!ranked_pred.ranking)
        throw DataError("oracle_topk requires a ranked prediction");
    const std::size_t k = std::min(gold.size(), ranked_pred.ranking->size());
    Cohort truncated;
    truncated.patient_ids.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        truncated.patient_ids.push_back((*ranked_pred.ranking)[i].patient_id);
    std::sort(truncated.patient_ids.begin(), truncated.patient_ids.end());
    return confusion(truncated, gold, population);
}

ParaphraseDiff paraphrase_check(const Cohort& a, const Cohort& b) {
    ParaphraseDiff d;
    d.a_minus_b = fp_count(a, b);
    d.b_minus_a = fp_count(b, a);
    d.pct_of_a = a.size() ? 100.0 * static_cast<double>(d.a_minus_b) / static_cast<double>(a.size())
                          : 0.0;
    d.pct_of_b = b.size() ? 100.0 * static_cast<double>(d.b_minus_a) / static_cast<double>(b.size())
                          : 0.0;
    return d;
}

std::size_t intersection_check(const Cohort& base, const Cohort& complex_cohort) {
    return fp_count(complex_cohort, base);
}

std::size_t subtype_check(const Cohort& parent, const Cohort& child) {
    return fp_count(child, parent);
}

int display_percent(double fraction) {
    return static_cast<int>(fraction >= 0 ? std::floor(fraction + 0.5) : std::ceil(fraction - 0.5));
}

void GoldMatrix::validate(const std::vector<QueryRecord>& bank) const {
    for (const auto& rec : bank) {
        auto it = gold.find(rec.query_id);
        if (it == gold.end())
            throw DataError("gold matrix is missing query '" + rec.query_id + "'");
        if (!subset_of(it->second.patient_ids, population))
            throw DataError("gold cohort for '" + rec.query_id + "' leaves the population");
    }
}

namespace {

Cohort cohort_from_json(const nlohmann::json& j) {
    Cohort c;
    c.patient_ids = j.at("patient_ids").get<std::vector<std::string>>();
    std::sort(c.patient_ids.begin(), c.patient_ids.end());
    c.patient_ids.erase(std::unique(c.patient_ids.begin(), c.patient_ids.end()),
                        c.patient_ids.end());
    if (j.contains("ranking") && !j["ranking"].is_null()) {
        std::vector<Cohort::Ranked> ranking;
        for (const auto& rj : j["ranking"])
            ranking.push_back({rj.at("patient_id").get<std::string>(),
                               rj.value("score", 0.0)});
        // a ranking must cover exactly the member set
        std::vector<std::string> ids;
        for (const auto& r : ranking) ids.push_back(r.patient_id);
        std::sort(ids.begin(), ids.end());
        if (ids != c.patient_ids)
            throw DataError("cohort ranking does not cover exactly the member set");
        c.ranking = std::move(ranking);
    }
    return c;
}

nlohmann::ordered_json cohort_to_json(const std::string& query_id, const Cohort& c) {
    nlohmann::ordered_json j;
    j["query_id"] = query_id;
    j["patient_ids"] = c.patient_ids;
    if (c.ranking) {
        j["ranking"] = nlohmann::ordered_json::array();
        for (const auto& r : *c.ranking)
            j["ranking"].push_back({{"patient_id", r.patient_id}, {"score", r.score}});
    }
    return j;
}

void for_each_jsonl(const std::string& content, const std::string& origin,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
    std::size_t pos = 0, line_no = 0;
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
        fn(j, line_no);
    }
}

}  // namespace

GoldMatrix parse_gold_jsonl(const std::string& content, std::vector<std::string> population,
                            const std::string& origin) {
    GoldMatrix out;
    std::sort(population.begin(), population.end());
    out.population = std::move(population);
    for_each_jsonl(content, origin, [&](const nlohmann::json& j, std::size_t) {
        out.gold[j.at("query_id").get<std::string>()] = cohort_from_json(j);
    });
    return out;
}

GoldMatrix load_gold(const std::string& path, std::vector<std::string> population) {
    return parse_gold_jsonl(read_file(path), std::move(population), path);
}

std::string gold_to_jsonl(const GoldMatrix& gold) {
    std::string out;
    for (const auto& [query_id, cohort] : gold.gold) {
        nlohmann::ordered_json j;
        j["query_id"] = query_id;
        j["patient_ids"] = cohort.patient_ids;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_gold(const GoldMatrix& gold, const std::string& path) {
    write_file_atomic(path, gold_to_jsonl(gold));
}

std::map<std::string, Cohort> parse_cohorts_jsonl(const std::string& content,
                                                  const std::string& origin) {
    std::map<std::string, Cohort> out;
    for_each_jsonl(content, origin, [&](const nlohmann::json& j, std::size_t) {
        out[j.at("query_id").get<std::string>()] = cohort_from_json(j);
    });
    return out;
}

std::map<std::string, Cohort> load_cohorts(const std::string& path) {
    return parse_cohorts_jsonl(read_file(path), path);
}

std::string cohorts_to_jsonl(const std::map<std::string, Cohort>& cohorts) {
    std::string out;
    for (const auto& [query_id, cohort] : cohorts) {
        out += cohort_to_json(query_id, cohort).dump();
        out += '\n';
    }
    return out;
}

void save_cohorts(const std::map<std::string, Cohort>& cohorts, const std::string& path) {
    write_file_atomic(path, cohorts_to_jsonl(cohorts));
}

std::map<std::string, std::size_t> corpus_doc_counts(const Corpus& corpus) {
    std::map<std::string, std::size_t> out;
    for (const auto& [pid, docs] : corpus.patients) out[pid] = docs.size();
    return out;
}

std::map<std::string, int> doc_count_terciles(
    const std::map<std::string, std::size_t>& doc_counts) {
    std::vector<std::pair<std::size_t, std::string>> order;
    order.reserve(doc_counts.size());
    for (const auto& [pid, nd] : doc_counts) order.emplace_back(nd, pid);
    std::sort(order.begin(), order.end());
    std::map<std::string, int> out;
    const std::size_t n = order.size();
    for (std::size_t i = 0; i < n; ++i)
        out[order[i].second] = static_cast<int>(3 * i / std::max<std::size_t>(n, 1));
    return out;
}

}  // namespace acr
