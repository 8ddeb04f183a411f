#include <algorithm>
#include <cstdint>
#include <sstream>

#include <json.hpp>

#include "acr/error.hpp"
#include "acr/eval.hpp"

namespace acr {

namespace {

const Cohort kEmptyCohort;

const Cohort& cohort_or_empty(const std::map<std::string, Cohort>& cohorts,
                              const std::string& query_id) {
    auto it = cohorts.find(query_id);
    return it == cohorts.end() ? kEmptyCohort : it->second;
}

Cohort restrict_cohort(const Cohort& c, const std::vector<std::string>& keep) {
    Cohort out;
    std::set_intersection(c.patient_ids.begin(), c.patient_ids.end(), keep.begin(), keep.end(),
                          std::back_inserter(out.patient_ids));
    return out;
}

}  // namespace

EvalReport evaluate(const EvalInputs& inputs) {
    inputs.gold.validate(inputs.bank);
    EvalReport report;
    report.alpha = inputs.alpha;
    report.beta = inputs.beta;
    report.population_size = inputs.gold.population.size();

    const std::size_t n = inputs.bank.size();
    report.per_query.resize(n);
    // Queries are independent; slots are preassigned so the reduce order is
    // fixed regardless of thread count.
    std::string failure;
    #pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t qi = 0; qi < static_cast<std::ptrdiff_t>(n); ++qi) {
        try {
            const auto& rec = inputs.bank[static_cast<std::size_t>(qi)];
            const Cohort& gold = inputs.gold.gold.at(rec.query_id);
            const Cohort& pred = cohort_or_empty(inputs.cohorts, rec.query_id);
            PerQueryEval q;
            q.query_id = rec.query_id;
            q.gold_size = gold.size();
            q.pred_size = pred.size();
            q.category = categorize(gold.size(), inputs.alpha, inputs.beta);
            q.cohort_confusion = confusion(pred, gold, inputs.gold.population);
            q.cohort_prf = prf(q.cohort_confusion);
            if (pred.ranking) {
                q.oracle_confusion = oracle_topk(pred, gold, inputs.gold.population);
                q.oracle_prf = prf(*q.oracle_confusion);
            }
            if (q.cohort_confusion.tp + q.cohort_confusion.fn > 0)
                q.hr = hallucination_ratio(q.cohort_confusion);
            q.false_positives = q.cohort_confusion.fp;
            const auto denom = q.cohort_confusion.fp + q.cohort_confusion.tn;
            q.fpr = denom ? static_cast<double>(q.cohort_confusion.fp) / static_cast<double>(denom)
                          : 0.0;
            report.per_query[static_cast<std::size_t>(qi)] = std::move(q);
        } catch (const std::exception& e) {
            #pragma omp critical
            if (failure.empty())
                failure = "query '" + inputs.bank[static_cast<std::size_t>(qi)].query_id +
                          "': " + e.what();
        }
    }
    if (!failure.empty()) throw DataError("evaluation failed: " + failure);

    // Category aggregates: macro for Broad and Narrow, micro for Sparse.
    for (QueryCategory cat :
         {QueryCategory::broad, QueryCategory::narrow, QueryCategory::sparse}) {
        CategoryEval ce;
        ce.category = cat;
        ce.averaging = cat == QueryCategory::sparse ? "micro" : "macro";
        std::vector<Confusion> cohort_confusions;
        std::vector<Confusion> oracle_confusions;
        bool oracle_complete = true;
        for (const auto& q : report.per_query) {
            if (q.category != cat) continue;
            cohort_confusions.push_back(q.cohort_confusion);
            if (q.oracle_confusion) oracle_confusions.push_back(*q.oracle_confusion);
            else oracle_complete = false;
        }
        ce.n_queries = cohort_confusions.size();
        if (ce.n_queries > 0) {
            ce.cohort = ce.averaging == "macro" ? macro_prf(cohort_confusions)
                                                : micro_prf(cohort_confusions);
            if (oracle_complete && !oracle_confusions.empty())
                ce.oracle = ce.averaging == "macro" ? macro_prf(oracle_confusions)
                                                    : micro_prf(oracle_confusions);
        }
        report.categories.push_back(std::move(ce));
    }

    // Expert strata: macro-averaged per labeled class, empty classes reported.
    for (const char* cls : {"Base", "Low", "Medium", "Hard"}) {
        ExpertStratum stratum;
        stratum.expert_class = cls;
        std::vector<Confusion> confusions;
        for (std::size_t i = 0; i < inputs.bank.size(); ++i) {
            if (inputs.bank[i].expert_class == cls)
                confusions.push_back(report.per_query[i].cohort_confusion);
        }
        stratum.n_queries = confusions.size();
        if (!confusions.empty()) stratum.macro = macro_prf(confusions);
        report.expert_strata.push_back(std::move(stratum));
    }

    // Document-count terciles: gold and predictions restricted per tercile,
    // macro-averaged over non-zero-result queries of the stratum.
    if (!inputs.doc_counts.empty()) {
        const auto terciles = doc_count_terciles(inputs.doc_counts);
        for (int t = 0; t < 3; ++t) {
            TercileStratum stratum;
            stratum.tercile = t;
            std::vector<std::string> members;
            stratum.nd_min = SIZE_MAX;
            for (const auto& [pid, tier] : terciles) {
                if (tier != t) continue;
                members.push_back(pid);
                const std::size_t nd = inputs.doc_counts.at(pid);
                stratum.nd_min = std::min(stratum.nd_min, nd);
                stratum.nd_max = std::max(stratum.nd_max, nd);
            }
            if (members.empty()) stratum.nd_min = 0;
            std::sort(members.begin(), members.end());
            stratum.n_patients = members.size();
            std::vector<Confusion> confusions;
            for (const auto& rec : inputs.bank) {
                const Cohort gold_t = restrict_cohort(inputs.gold.gold.at(rec.query_id), members);
                if (gold_t.size() == 0) continue;  // zero-result within the stratum
                const Cohort pred_t =
                    restrict_cohort(cohort_or_empty(inputs.cohorts, rec.query_id), members);
                confusions.push_back(confusion(pred_t, gold_t, members));
            }
            stratum.n_queries = confusions.size();
            if (!confusions.empty()) stratum.macro = macro_prf(confusions);
            report.tercile_strata.push_back(std::move(stratum));
        }
    }

    report.consistency = consistency_checks(inputs.bank, inputs.cohorts);
    return report;
}

std::vector<ConsistencyRow> consistency_checks(const std::vector<QueryRecord>& bank,
                                               const std::map<std::string, Cohort>& cohorts) {
    std::vector<ConsistencyRow> rows;
    for (const auto& rec : bank) {
        for (const auto& rel : rec.relations) {
            const Cohort& mine = cohort_or_empty(cohorts, rec.query_id);
            const Cohort& other = cohort_or_empty(cohorts, rel.other_query_id);
            ConsistencyRow row;
            row.query_b = rec.query_id;
            row.query_a = rel.other_query_id;
            row.size_a = other.size();
            row.size_b = mine.size();
            if (rel.kind == "paraphrase_of") {
                // report each unordered pair once, from the lexicographically
                // larger member, so A/B columns are stable
                if (rec.query_id < rel.other_query_id) continue;
                const ParaphraseDiff d = paraphrase_check(other, mine);
                row.kind = "paraphrase";
                row.violations = d.b_minus_a;
                row.violations_rev = d.a_minus_b;
            } else if (rel.kind == "intersection_of") {
                row.kind = "intersection";
                row.violations = intersection_check(other, mine);
            } else if (rel.kind == "child_of") {
                row.kind = "subtype";
                row.violations = subtype_check(other, mine);
            } else {
                continue;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

namespace {

nlohmann::ordered_json prf_json(const Prf& p) {
    return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

Prf prf_from_json(const nlohmann::json& j) {
    return {j.at("precision").get<double>(), j.at("recall").get<double>(),
            j.at("f1").get<double>()};
}

nlohmann::ordered_json confusion_json(const Confusion& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

Confusion confusion_from_json(const nlohmann::json& j) {
    return {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
            j.at("fn").get<std::size_t>(), j.at("tn").get<std::size_t>()};
}

QueryCategory category_from_string(const std::string& s) {
    if (s == "Broad") return QueryCategory::broad;
    if (s == "Narrow") return QueryCategory::narrow;
    if (s == "Sparse") return QueryCategory::sparse;
    if (s == "ZeroResult") return QueryCategory::zero_result;
    throw DataError("unknown query category '" + s + "'");
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["metadata"] = {{"system", report.system},
                     {"config_hash", report.config_hash},
                     {"seed", report.seed},
                     {"tool_version", report.tool_version},
                     {"population_size", report.population_size},
                     {"alpha", report.alpha},
                     {"beta", report.beta}};
    j["categories"] = nlohmann::ordered_json::array();
    for (const auto& c : report.categories) {
        nlohmann::ordered_json cj;
        cj["category"] = to_string(c.category);
        cj["averaging"] = c.averaging;
        cj["n_queries"] = c.n_queries;
        cj["cohort_retrieval"] = prf_json(c.cohort);
        if (c.oracle) cj["oracle_topk"] = prf_json(*c.oracle);
        j["categories"].push_back(cj);
    }
    j["per_query"] = nlohmann::ordered_json::array();
    for (const auto& q : report.per_query) {
        nlohmann::ordered_json qj;
        qj["query_id"] = q.query_id;
        qj["category"] = to_string(q.category);
        qj["gold_size"] = q.gold_size;
        qj["pred_size"] = q.pred_size;
        qj["confusion"] = confusion_json(q.cohort_confusion);
        qj["prf"] = prf_json(q.cohort_prf);
        if (q.oracle_confusion) qj["oracle_confusion"] = confusion_json(*q.oracle_confusion);
        if (q.oracle_prf) qj["oracle_prf"] = prf_json(*q.oracle_prf);
        if (q.hr) qj["hallucination_ratio"] = *q.hr;
        qj["false_positives"] = q.false_positives;
        qj["fpr"] = q.fpr;
        j["per_query"].push_back(qj);
    }
    j["expert_strata"] = nlohmann::ordered_json::array();
    for (const auto& s : report.expert_strata) {
        j["expert_strata"].push_back({{"expert_class", s.expert_class},
                                      {"n_queries", s.n_queries},
                                      {"macro", prf_json(s.macro)}});
    }
    j["tercile_strata"] = nlohmann::ordered_json::array();
    for (const auto& s : report.tercile_strata) {
        j["tercile_strata"].push_back({{"tercile", s.tercile},
                                       {"n_patients", s.n_patients},
                                       {"nd_min", s.nd_min},
                                       {"nd_max", s.nd_max},
                                       {"n_queries", s.n_queries},
                                       {"macro", prf_json(s.macro)}});
    }
    j["consistency"] = nlohmann::ordered_json::array();
    for (const auto& r : report.consistency) {
        j["consistency"].push_back({{"kind", r.kind},
                                    {"query_a", r.query_a},
                                    {"query_b", r.query_b},
                                    {"size_a", r.size_a},
                                    {"size_b", r.size_b},
                                    {"violations", r.violations},
                                    {"violations_rev", r.violations_rev}});
    }
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw DataError("report: malformed JSON");
    EvalReport report;
    const auto& meta = j.at("metadata");
    report.system = meta.value("system", std::string());
    report.config_hash = meta.value("config_hash", std::string());
    report.seed = meta.value("seed", std::uint64_t{0});
    report.tool_version = meta.value("tool_version", std::string());
    report.population_size = meta.value("population_size", std::size_t{0});
    report.alpha = meta.value("alpha", std::size_t{50});
    report.beta = meta.value("beta", std::size_t{10});
    for (const auto& cj : j.value("categories", nlohmann::json::array())) {
        CategoryEval c;
        c.category = category_from_string(cj.at("category").get<std::string>());
        c.averaging = cj.at("averaging").get<std::string>();
        c.n_queries = cj.at("n_queries").get<std::size_t>();
        c.cohort = prf_from_json(cj.at("cohort_retrieval"));
        if (cj.contains("oracle_topk")) c.oracle = prf_from_json(cj.at("oracle_topk"));
        report.categories.push_back(std::move(c));
    }
    for (const auto& qj : j.value("per_query", nlohmann::json::array())) {
        PerQueryEval q;
        q.query_id = qj.at("query_id").get<std::string>();
        q.category = category_from_string(qj.at("category").get<std::string>());
        q.gold_size = qj.at("gold_size").get<std::size_t>();
        q.pred_size = qj.at("pred_size").get<std::size_t>();
        q.cohort_confusion = confusion_from_json(qj.at("confusion"));
        q.cohort_prf = prf_from_json(qj.at("prf"));
        if (qj.contains("oracle_confusion"))
            q.oracle_confusion = confusion_from_json(qj.at("oracle_confusion"));
        if (qj.contains("oracle_prf")) q.oracle_prf = prf_from_json(qj.at("oracle_prf"));
        if (qj.contains("hallucination_ratio")) q.hr = qj.at("hallucination_ratio").get<double>();
        q.false_positives = qj.value("false_positives", std::size_t{0});
        q.fpr = qj.value("fpr", 0.0);
        report.per_query.push_back(std::move(q));
    }
    for (const auto& sj : j.value("expert_strata", nlohmann::json::array())) {
        report.expert_strata.push_back({sj.at("expert_class").get<std::string>(),
                                        sj.at("n_queries").get<std::size_t>(),
                                        prf_from_json(sj.at("macro"))});
    }
    for (const auto& sj : j.value("tercile_strata", nlohmann::json::array())) {
        TercileStratum s;
        s.tercile = sj.at("tercile").get<int>();
        s.n_patients = sj.at("n_patients").get<std::size_t>();
        s.nd_min = sj.at("nd_min").get<std::size_t>();
        s.nd_max = sj.at("nd_max").get<std::size_t>();
        s.n_queries = sj.at("n_queries").get<std::size_t>();
        s.macro = prf_from_json(sj.at("macro"));
        report.tercile_strata.push_back(std::move(s));
    }
    for (const auto& rj : j.value("consistency", nlohmann::json::array())) {
        report.consistency.push_back({rj.at("kind").get<std::string>(),
                                      rj.at("query_a").get<std::string>(),
                                      rj.at("query_b").get<std::string>(),
                                      rj.at("size_a").get<std::size_t>(),
                                      rj.at("size_b").get<std::size_t>(),
                                      rj.at("violations").get<std::size_t>(),
                                      rj.value("violations_rev", std::size_t{0})});
    }
    return report;
}

namespace {

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
    return buf;
}

}  // namespace

std::string report_to_markdown(const EvalReport& report) {
    std::ostringstream md;
    md << "# Evaluation report: " << report.system << "\n\n";
    md << "Population: " << report.population_size << " patients; alpha=" << report.alpha
       << ", beta=" << report.beta << "; config " << report.config_hash << "\n\n";

    md << "## Retrieval quality by cohort-size category\n\n";
    md << "| Category | Queries | Averaging | Precision | Recall | F1 |";
    md << " Oracle P | Oracle R | Oracle F1 |\n";
    md << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& c : report.categories) {
        md << "| " << to_string(c.category) << " | " << c.n_queries << " | " << c.averaging
           << " | " << pct(c.cohort.precision) << " | " << pct(c.cohort.recall) << " | "
           << pct(c.cohort.f1) << " | ";
        if (c.oracle)
            md << pct(c.oracle->precision) << " | " << pct(c.oracle->recall) << " | "
               << pct(c.oracle->f1) << " |\n";
        else
            md << "- | - | - |\n";
    }

    md << "\n## Zero-result queries (false-positive counts)\n\n";
    md << "| Query | False positives |\n|---|---|\n";
    for (const auto& q : report.per_query) {
        if (q.category == QueryCategory::zero_result)
            md << "| " << q.query_id << " | " << q.false_positives << " |\n";
    }

    md << "\n## Expert-complexity strata (macro)\n\n";
    md << "| Class | Queries | Precision | Recall | F1 |\n|---|---|---|---|---|\n";
    for (const auto& s : report.expert_strata) {
        md << "| " << s.expert_class << " | " << s.n_queries << " | " << pct(s.macro.precision)
           << " | " << pct(s.macro.recall) << " | " << pct(s.macro.f1) << " |\n";
    }

    if (!report.tercile_strata.empty()) {
        md << "\n## Document-count terciles (macro)\n\n";
        md << "| Tercile | N_d range | Patients | Queries | Precision | Recall | F1 |\n";
        md << "|---|---|---|---|---|---|---|\n";
        const char* names[3] = {"bottom", "middle", "top"};
        for (const auto& s : report.tercile_strata) {
            md << "| " << names[s.tercile % 3] << " | [" << s.nd_min << ", " << s.nd_max
               << "] | " << s.n_patients << " | " << s.n_queries << " | "
               << pct(s.macro.precision) << " | " << pct(s.macro.recall) << " | "
               << pct(s.macro.f1) << " |\n";
        }
    }

    if (!report.consistency.empty()) {
        md << "\n## Set-theoretic consistency\n\n";
        md << "| Kind | Query A | Query B | |A| | |B| | Violations |\n";
        md << "|---|---|---|---|---|---|\n";
        for (const auto& r : report.consistency) {
            md << "| " << r.kind << " | " << r.query_a << " | " << r.query_b << " | " << r.size_a
               << " | " << r.size_b << " | " << r.violations;
            if (r.kind == "paraphrase") {
                const double pa = r.size_a ? static_cast<double>(r.violations_rev) /
                                                 static_cast<double>(r.size_a)
                                           : 0.0;
                const double pb = r.size_b ? static_cast<double>(r.violations) /
                                                 static_cast<double>(r.size_b)
                                           : 0.0;
                md << " (" << display_percent(pb * 100.0) << "% of B; reverse "
                   << r.violations_rev << ", " << display_percent(pa * 100.0) << "% of A)";
            }
            md << " |\n";
        }
    }
    return md.str();
}

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream csv;
    csv << "query_id,category,gold_size,pred_size,tp,fp,fn,tn,precision,recall,f1,"
           "hallucination_ratio,false_positives,fpr,oracle_tp,oracle_fp,oracle_fn\n";
    for (const auto& q : report.per_query) {
        csv << q.query_id << ',' << to_string(q.category) << ',' << q.gold_size << ','
            << q.pred_size << ',' << q.cohort_confusion.tp << ',' << q.cohort_confusion.fp << ','
            << q.cohort_confusion.fn << ',' << q.cohort_confusion.tn << ',' << q.cohort_prf.precision
            << ',' << q.cohort_prf.recall << ',' << q.cohort_prf.f1 << ',';
        if (q.hr) csv << *q.hr;
        csv << ',' << q.false_positives << ',' << q.fpr << ',';
        if (q.oracle_confusion)
            csv << q.oracle_confusion->tp << ',' << q.oracle_confusion->fp << ','
                << q.oracle_confusion->fn;
        else
            csv << ",,";
        csv << '\n';
    }
    return csv.str();
}

}  // namespace acr
