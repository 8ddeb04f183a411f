#include <doctest.h>

#include <cmath>

#include "acr/error.hpp"
#include "acr/eval.hpp"
#include "acr/rng.hpp"
#include "support/oracles.hpp"

using namespace acr;

namespace {

Cohort cohort_of(std::vector<std::string> ids) {
    Cohort c;
    std::sort(ids.begin(), ids.end());
    c.patient_ids = std::move(ids);
    return c;
}

std::vector<std::string> population_of(int n) {
    std::vector<std::string> pop;
    for (int i = 0; i < n; ++i) pop.push_back("p" + std::to_string(i));
    std::sort(pop.begin(), pop.end());
    return pop;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("categorize boundaries") {
    CHECK(categorize(0, 50, 10) == QueryCategory::zero_result);
    CHECK(categorize(1, 50, 10) == QueryCategory::sparse);
    CHECK(categorize(9, 50, 10) == QueryCategory::sparse);
    CHECK(categorize(10, 50, 10) == QueryCategory::narrow);
    CHECK(categorize(49, 50, 10) == QueryCategory::narrow);
    CHECK(categorize(50, 50, 10) == QueryCategory::broad);
    CHECK_THROWS_AS(categorize(5, 10, 10), DataError);
    CHECK_THROWS_AS(categorize(5, 10, 0), DataError);
}

TEST_CASE("categorize is a monotone step function of n") {
    int last = 3;  // zero_result < sparse < narrow < broad, encoded descending
    auto order = [](QueryCategory c) {
        switch (c) {
            case QueryCategory::zero_result: return 0;
            case QueryCategory::sparse: return 1;
            case QueryCategory::narrow: return 2;
            case QueryCategory::broad: return 3;
        }
        return -1;
    };
    last = 0;
    for (std::size_t n = 0; n <= 120; ++n) {
        const int now = order(categorize(n, 50, 10));
        CHECK(now >= last);
        last = now;
    }
}

TEST_CASE("confusion counts are set-theoretic") {
    const auto pop = population_of(10);
    const Confusion c = confusion(cohort_of({"p1", "p3", "p4"}), cohort_of({"p1", "p2"}), pop);
    CHECK(c == Confusion{1, 2, 1, 6});

    const Confusion perfect =
        confusion(cohort_of({"p1", "p2"}), cohort_of({"p1", "p2"}), pop);
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);

    const Confusion empty = confusion(cohort_of({}), cohort_of({}), pop);
    CHECK(empty == Confusion{0, 0, 0, 10});

    CHECK_THROWS_AS(confusion(cohort_of({"zz"}), cohort_of({}), pop), DataError);
}

TEST_CASE("single-query P=R=F1=2/3 in both modes") {
    const auto pop = population_of(6);
    const Confusion c =
        confusion(cohort_of({"p1", "p2", "p3"}), cohort_of({"p2", "p3", "p4"}), pop);
    for (const Prf& m : {macro_prf({c}), micro_prf({c})}) {
        CHECK(m.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(m.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("worked macro/micro example") {
    // confusions (tp=1,fp=0,fn=1) and (tp=0,fp=1,fn=1); micro sums counts:
    // P = 1/2, R = 1/(1+2) = 1/3, F1 = 2*(1/2)(1/3)/(5/6) = 2/5
    const std::vector<Confusion> cs = {{1, 0, 1, 0}, {0, 1, 1, 0}};
    const Prf macro = macro_prf(cs);
    CHECK(macro.precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(macro.recall == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(macro.f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    const Prf micro = micro_prf(cs);
    CHECK(micro.precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(micro.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(micro.f1 == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(micro.f1 == doctest::Approx(oracle::scalar_micro(cs).f1).epsilon(1e-12));
}

TEST_CASE("all-perfect queries score 1 everywhere") {
    const std::vector<Confusion> cs = {{3, 0, 0, 7}, {5, 0, 0, 5}};
    for (const Prf& m : {macro_prf(cs), micro_prf(cs)}) {
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
    CHECK_THROWS_AS(macro_prf({}), DataError);
    CHECK_THROWS_AS(micro_prf({}), DataError);
}

TEST_CASE("metrics match the independent scalar oracle to 1e-12 on 1000 random sets") {
    Rng rng(2024);
    for (int round = 0; round < 1000; ++round) {
        std::vector<Confusion> cs;
        const int n = static_cast<int>(rng.uniform_int(1, 12));
        for (int i = 0; i < n; ++i) {
            cs.push_back({static_cast<std::size_t>(rng.uniform_int(0, 40)),
                          static_cast<std::size_t>(rng.uniform_int(0, 40)),
                          static_cast<std::size_t>(rng.uniform_int(0, 40)),
                          static_cast<std::size_t>(rng.uniform_int(0, 40))});
        }
        const Prf macro = macro_prf(cs);
        const auto macro_want = oracle::scalar_macro(cs);
        CHECK(std::abs(macro.precision - macro_want.p) < 1e-12);
        CHECK(std::abs(macro.recall - macro_want.r) < 1e-12);
        CHECK(std::abs(macro.f1 - macro_want.f1) < 1e-12);

        const Prf micro = micro_prf(cs);
        const auto micro_want = oracle::scalar_micro(cs);
        CHECK(std::abs(micro.precision - micro_want.p) < 1e-12);
        CHECK(std::abs(micro.recall - micro_want.r) < 1e-12);
        CHECK(std::abs(micro.f1 - micro_want.f1) < 1e-12);

        // micro-F1 equals the PRF identity on summed counts
        std::size_t tp = 0, fp = 0, fn = 0;
        for (const auto& c : cs) {
            tp += c.tp;
            fp += c.fp;
            fn += c.fn;
        }
        const double identity =
            (2 * tp + fp + fn) == 0 ? 0.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
        CHECK(std::abs(micro.f1 - identity) < 1e-12);

        for (const auto& c : cs) {
            if (c.tp + c.fn > 0)
                CHECK(std::abs(hallucination_ratio(c) - oracle::scalar_hr(c)) < 1e-12);
        }
    }
}

TEST_CASE("hallucination ratio definition and zero-result refusal") {
    CHECK(hallucination_ratio({0, 2, 2, 0}) == doctest::Approx(1.0));
    CHECK(hallucination_ratio({3, 0, 1, 0}) == 0.0);
    // a ratio, not a percentage: can exceed 1
    CHECK(hallucination_ratio({1, 10, 0, 0}) == doctest::Approx(10.0));
    CHECK_THROWS_WITH_AS(hallucination_ratio({0, 5, 0, 0}), doctest::Contains("fp_count"),
                         DataError);
}

TEST_CASE("fp_count on raw cohorts") {
    CHECK(fp_count(cohort_of({"a", "b"}), cohort_of({})) == 2);
    CHECK(fp_count(cohort_of({}), cohort_of({"a"})) == 0);
    CHECK(fp_count(cohort_of({"a", "b"}), cohort_of({"a", "b"})) == 0);
}

TEST_CASE("oracle top-k truncates to the gold size") {
    const auto pop = population_of(8);
    Cohort pred = cohort_of({"p1", "p2", "p3"});
    pred.ranking = {{{"p1", 0.9}, {"p2", 0.8}, {"p3", 0.7}}};
    const Confusion c = oracle_topk(pred, cohort_of({"p2", "p3"}), pop);
    CHECK(c == Confusion{1, 1, 1, 5});

    const Confusion empty_gold = oracle_topk(pred, cohort_of({}), pop);
    CHECK(empty_gold.fp == 0);

    Cohort unranked = cohort_of({"p1"});
    CHECK_THROWS_AS(oracle_topk(unranked, cohort_of({"p1"}), pop), DataError);
}

TEST_CASE("truncation never increases false positives") {
    Rng rng(99);
    const auto pop = population_of(30);
    for (int round = 0; round < 300; ++round) {
        Cohort pred;
        std::vector<Cohort::Ranked> ranking;
        for (const auto& pid : pop) {
            if (rng.bernoulli(0.4)) ranking.push_back({pid, rng.uniform_real()});
        }
        std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.patient_id < b.patient_id;
        });
        for (const auto& r : ranking) pred.patient_ids.push_back(r.patient_id);
        std::sort(pred.patient_ids.begin(), pred.patient_ids.end());
        pred.ranking = ranking;

        Cohort gold;
        for (const auto& pid : pop) {
            if (rng.bernoulli(0.3)) gold.patient_ids.push_back(pid);
        }
        const Confusion full = confusion(pred, gold, pop);
        const Confusion trunc = oracle_topk(pred, gold, pop);
        CHECK(trunc.fp <= full.fp);
    }
}

TEST_CASE("paraphrase check reports both directions with percentages") {
    // the 12-vs-13 drug-name example: |A\B| = 2 (17% of A), |B\A| = 3 (23% of B)
    std::vector<std::string> a_ids, b_ids;
    for (int i = 0; i < 10; ++i) {
        a_ids.push_back("s" + std::to_string(i));  // shared
        b_ids.push_back("s" + std::to_string(i));
    }
    a_ids.push_back("a1");
    a_ids.push_back("a2");
    b_ids.push_back("b1");
    b_ids.push_back("b2");
    b_ids.push_back("b3");
    const ParaphraseDiff d = paraphrase_check(cohort_of(a_ids), cohort_of(b_ids));
    CHECK(d.a_minus_b == 2);
    CHECK(d.b_minus_a == 3);
    CHECK(display_percent(d.pct_of_a) == 17);
    CHECK(display_percent(d.pct_of_b) == 23);

    const ParaphraseDiff same = paraphrase_check(cohort_of(a_ids), cohort_of(a_ids));
    CHECK(same.a_minus_b == 0);
    CHECK(same.pct_of_a == 0.0);

    const ParaphraseDiff disjoint =
        paraphrase_check(cohort_of({"x1", "x2"}), cohort_of({"y1", "y2"}));
    CHECK(disjoint.pct_of_a == 100.0);
    CHECK(disjoint.pct_of_b == 100.0);
}

TEST_CASE("intersection and subtype checks count escapees") {
    const auto base = cohort_of({"p1", "p2", "p3", "p4"});
    const auto complex_cohort = cohort_of({"p2", "p3", "p9"});
    CHECK(intersection_check(base, complex_cohort) == 1);
    CHECK(subtype_check(base, complex_cohort) == 1);
    CHECK(intersection_check(base, cohort_of({"p1"})) == 0);
}

TEST_CASE("terciles split deterministically and match a sort-based oracle") {
    std::map<std::string, std::size_t> counts;
    Rng rng(7);
    for (int i = 0; i < 31; ++i)
        counts["p" + std::to_string(i)] = static_cast<std::size_t>(rng.uniform_int(1, 120));
    const auto terciles = doc_count_terciles(counts);

    // independent oracle: stable sort by (count, id), then integer thirds
    std::vector<std::pair<std::size_t, std::string>> order;
    for (const auto& [pid, nd] : counts) order.emplace_back(nd, pid);
    std::stable_sort(order.begin(), order.end());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const int want = static_cast<int>(3 * i / order.size());
        CHECK(terciles.at(order[i].second) == want);
    }

    // uniform doc counts fall back to patient_id order
    std::map<std::string, std::size_t> uniform;
    for (int i = 0; i < 9; ++i) uniform["p" + std::to_string(i)] = 10;
    const auto t = doc_count_terciles(uniform);
    CHECK(t.at("p0") == 0);
    CHECK(t.at("p4") == 1);
    CHECK(t.at("p8") == 2);
}

TEST_CASE("evaluate assembles per-category and strata tables") {
    // two broad-ish queries and one zero-result, alpha/beta scaled down
    std::vector<QueryRecord> bank = {
        {"q1", "", "x", "Base", {}},
        {"q2", "", "x", "Hard", {}},
        {"q3", "", "x", "Base", {}},
    };
    GoldMatrix gold;
    gold.population = population_of(20);
    gold.gold["q1"] = cohort_of({"p0", "p1", "p2", "p3", "p4", "p5"});
    gold.gold["q2"] = cohort_of({"p0"});
    gold.gold["q3"] = cohort_of({});

    std::map<std::string, Cohort> cohorts;
    cohorts["q1"] = cohort_of({"p0", "p1", "p2", "p3"});
    cohorts["q2"] = cohort_of({"p0", "p9"});
    cohorts["q3"] = cohort_of({"p7"});

    std::map<std::string, std::size_t> doc_counts;
    for (int i = 0; i < 20; ++i) doc_counts["p" + std::to_string(i)] = 1 + i;

    EvalInputs inputs{bank, gold, cohorts, 5, 2, doc_counts};
    const EvalReport report = evaluate(inputs);

    REQUIRE(report.per_query.size() == 3);
    CHECK(report.per_query[0].category == QueryCategory::broad);
    CHECK(report.per_query[1].category == QueryCategory::sparse);
    CHECK(report.per_query[2].category == QueryCategory::zero_result);
    CHECK(report.per_query[2].false_positives == 1);
    CHECK(!report.per_query[2].hr.has_value());

    // expert strata cover all four classes, empty ones included
    REQUIRE(report.expert_strata.size() == 4);
    CHECK(report.expert_strata[0].expert_class == "Base");
    CHECK(report.expert_strata[0].n_queries == 2);
    CHECK(report.expert_strata[1].n_queries == 0);  // Low is empty, still reported

    REQUIRE(report.tercile_strata.size() == 3);
    CHECK(report.tercile_strata[0].n_patients == 7);

    // round-trip through JSON
    const std::string json = report_to_json(report);
    const EvalReport back = report_from_json(json);
    CHECK(report_to_json(back) == json);
    CHECK(!report_to_markdown(report).empty());
    CHECK(!report_to_csv(report).empty());
}

TEST_CASE("gold and cohort files round-trip") {
    GoldMatrix gold;
    gold.population = population_of(5);
    gold.gold["q1"] = cohort_of({"p1", "p2"});
    gold.gold["q2"] = cohort_of({});
    const std::string jsonl = gold_to_jsonl(gold);
    const GoldMatrix back = parse_gold_jsonl(jsonl, gold.population);
    CHECK(back.gold.at("q1").patient_ids == gold.gold.at("q1").patient_ids);

    std::map<std::string, Cohort> cohorts;
    Cohort ranked = cohort_of({"p1", "p2"});
    ranked.ranking = {{{"p2", 0.9}, {"p1", 0.2}}};
    cohorts["q1"] = ranked;
    const auto parsed = parse_cohorts_jsonl(cohorts_to_jsonl(cohorts));
    REQUIRE(parsed.at("q1").ranking.has_value());
    CHECK(parsed.at("q1").ranking->front().patient_id == "p2");

    // a ranking that does not cover the member set is rejected
    const std::string bad =
        R"({"query_id":"q","patient_ids":["p1","p2"],"ranking":[{"patient_id":"p1","score":1.0}]})"
        "\n";
    CHECK_THROWS_AS(parse_cohorts_jsonl(bad), DataError);
}

}  // TEST_SUITE
