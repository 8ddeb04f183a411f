#include "acr/synthgen.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "acr/error.hpp"
#include "acr/rng.hpp"

namespace acr {

void GeneratorParams::validate() const {
    auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!rate_ok(paraphrase_rate) || !rate_ok(contradiction_rate) ||
        !rate_ok(zero_result_fraction))
        throw DataError("generator rates must be within [0, 1]");
    if (docs_per_patient.min < 1 || docs_per_patient.min > docs_per_patient.max ||
        events_per_patient.min < 1 || events_per_patient.min > events_per_patient.max)
        throw DataError("generator distribution specs are malformed");
    if (n_patients < 1) throw DataError("n_patients must be >= 1");
    if (beta < 1 || beta >= alpha) throw DataError("generator requires 1 <= beta < alpha");
}

namespace {

std::size_t sample_dist(Rng& rng, const DistSpec& spec) {
    if (spec.shape == "skewed") {
        const double u = rng.uniform_real();
        const double span = static_cast<double>(spec.max - spec.min + 1);
        return spec.min + static_cast<std::size_t>(span * u * u * 0.999999);
    }
    return static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.min), static_cast<std::int64_t>(spec.max)));
}

// ---------------------------------------------------------------------------
// Ontology backbone

struct ConceptRow {
    const char* id;
    std::vector<const char*> surfaces;
    std::vector<const char*> parents;
    std::vector<const char*> attrs;
    std::vector<const char*> absents;
};

const std::vector<ConceptRow>& backbone() {
    static const std::vector<ConceptRow> rows = {
        {"condition", {"clinical condition"}, {}, {}, {}},
        {"cancer", {"cancer", "malignancy"}, {"condition"}, {"stage"}, {}},
        {"solid_tumor", {"solid tumor"}, {"cancer"}, {"stage"}, {}},
        {"liquid_tumor", {"liquid tumor"}, {"cancer"}, {}, {}},
        {"breast_cancer",
         {"breast cancer", "malignant breast neoplasm"},
         {"solid_tumor"},
         {"stage"},
         {}},
        {"lung_cancer", {"lung cancer"}, {"solid_tumor"}, {"stage"}, {}},
        {"nsclc", {"NSCLC", "non-small cell lung cancer"}, {"lung_cancer"}, {"stage"}, {}},
        {"prostate_cancer", {"prostate cancer"}, {"solid_tumor"}, {"stage"}, {}},
        {"colorectal_cancer", {"colorectal cancer", "CRC"}, {"solid_tumor"}, {"stage"}, {}},
        {"ovarian_cancer", {"ovarian cancer"}, {"solid_tumor"}, {"stage"}, {}},
        {"melanoma", {"melanoma"}, {"solid_tumor"}, {"stage"}, {}},
        {"leukemia", {"leukemia"}, {"liquid_tumor"}, {}, {}},
        {"cll", {"CLL", "chronic lymphocytic leukemia"}, {"leukemia"}, {}, {}},
        {"lymphoma", {"lymphoma"}, {"liquid_tumor"}, {}, {}},
        {"pregnancy", {"pregnant", "pregnancy"}, {"condition"}, {}, {}},

        {"biomarker", {"biomarker finding"}, {}, {}, {}},
        {"mutation", {"genomic alteration"}, {"biomarker"}, {}, {}},
        {"pik3ca_mutation", {"PIK3CA mutation", "mutation in PIK3CA"}, {"mutation"}, {}, {}},
        {"brca1_mutation", {"BRCA1 mutation"}, {"mutation"}, {}, {}},
        {"brca2_mutation", {"BRCA2 mutation"}, {"mutation"}, {}, {}},
        {"egfr_mutation", {"EGFR mutation"}, {"mutation"}, {}, {}},
        {"egfr_t790m", {"EGFR T790M", "T790M mutation"}, {"egfr_mutation"}, {}, {}},
        {"kras_g12c", {"KRAS G12C"}, {"mutation"}, {}, {}},
        {"alk_fusion", {"ALK fusion"}, {"biomarker"}, {}, {}},
        {"er_positive", {"ER-positive", "estrogen receptor positive"}, {"biomarker"}, {}, {}},
        {"her2_negative", {"HER2-negative"}, {"biomarker"}, {}, {}},
        {"msi_high", {"MSI-high", "microsatellite instability high"}, {"biomarker"}, {}, {}},

        {"therapy", {"therapeutic intervention"}, {}, {}, {}},
        {"systemic_therapy", {"systemic therapy"}, {"therapy"}, {}, {}},
        {"chemotherapy", {"chemotherapy"}, {"systemic_therapy"}, {}, {}},
        {"folfiri", {"FOLFIRI"}, {"chemotherapy"}, {}, {}},
        {"capecitabine", {"capecitabine", "Xeloda"}, {"chemotherapy"}, {}, {}},
        {"hormone_therapy", {"hormone therapy", "endocrine therapy"}, {"systemic_therapy"}, {}, {}},
        {"tamoxifen", {"tamoxifen", "Nolvadex"}, {"hormone_therapy"}, {}, {}},
        {"targeted_therapy", {"targeted therapy"}, {"systemic_therapy"}, {}, {}},
        {"tki", {"TKI", "tyrosine kinase inhibitor"}, {"targeted_therapy"}, {}, {}},
        {"egfr_tki", {"EGFR TKI", "EGFR inhibitor"}, {"tki"}, {}, {}},
        {"osimertinib", {"osimertinib", "Tagrisso"}, {"egfr_tki"}, {}, {}},
        {"erlotinib", {"erlotinib", "Tarceva"}, {"egfr_tki"}, {}, {}},
        {"alk_tki", {"ALK inhibitor"}, {"tki"}, {}, {}},
        {"crizotinib", {"crizotinib", "Xalkori"}, {"alk_tki"}, {}, {}},
        {"parp_inhibitor", {"PARP inhibitor"}, {"targeted_therapy"}, {}, {}},
        {"olaparib", {"olaparib", "Lynparza"}, {"parp_inhibitor"}, {}, {}},
        {"immunotherapy", {"immunotherapy"}, {"systemic_therapy"}, {}, {}},
        {"pembrolizumab", {"pembrolizumab", "Keytruda"}, {"immunotherapy"}, {}, {}},

        {"procedure", {"clinical procedure"}, {}, {}, {}},
        {"surgery", {"surgical procedure"}, {"procedure"}, {}, {}},
        {"mastectomy", {"mastectomy"}, {"surgery"}, {}, {}},
        {"lumpectomy", {"lumpectomy", "segmental mastectomy"}, {"surgery"}, {}, {}},
        {"hysterectomy", {"hysterectomy"}, {"surgery"}, {}, {"uterus"}},
        {"oophorectomy", {"oophorectomy"}, {"surgery"}, {}, {"ovary"}},
        {"prostatectomy", {"prostatectomy"}, {"surgery"}, {}, {}},

        {"organ", {"body organ"}, {}, {}, {}},
        {"uterus", {"uterus"}, {"organ"}, {}, {}},
        {"ovary", {"ovary"}, {"organ"}, {}, {}},

        {"outcome", {"clinical outcome"}, {}, {}, {}},
        {"death", {"died", "deceased", "death"}, {"outcome"}, {}, {}},

        // reserved: never sampled into journeys, never injected
        {"pleuropulmonary_blastoma", {"pleuropulmonary blastoma"}, {"solid_tumor"}, {}, {}},
        {"ewing_sarcoma", {"Ewing sarcoma"}, {"solid_tumor"}, {}, {}},
        {"wilms_tumor", {"Wilms tumor"}, {"solid_tumor"}, {}, {}},
        {"desmoid_tumor", {"desmoid tumor"}, {"solid_tumor"}, {}, {}},
        {"ntrk_fusion", {"NTRK fusion"}, {"biomarker"}, {}, {}},
        {"ros1_fusion", {"ROS1 fusion"}, {"biomarker"}, {}, {}},
        {"braf_v600e", {"BRAF V600E"}, {"mutation"}, {}, {}},
        {"met_exon14", {"MET exon 14 skipping"}, {"mutation"}, {}, {}},
    };
    return rows;
}

const std::vector<const char*> kFillerAdjectives = {
    "amberline", "coralline", "duskfield", "everbright", "farrowgate", "glimmerstone",
    "harrowell", "ironvale", "juniper-cross", "kestrelway",
};
const std::vector<const char*> kFillerNouns = {
    "dysplasia", "syndrome", "lesion-complex", "atrophy", "sclerosis", "fibrosis",
};

}  // namespace

const std::vector<ConceptId>& reserved_zero_result_concepts() {
    static const std::vector<ConceptId> reserved = {
        "pleuropulmonary_blastoma", "ewing_sarcoma", "wilms_tumor", "desmoid_tumor",
        "ntrk_fusion", "ros1_fusion", "braf_v600e", "met_exon14",
    };
    return reserved;
}

Ontology gen_ontology(std::uint64_t seed, std::size_t filler_concepts) {
    Ontology ont;
    for (const auto& row : backbone()) {
        Concept c;
        c.id = row.id;
        for (const char* s : row.surfaces) c.surface_forms.push_back(s);
        for (const char* p : row.parents) c.parents.push_back(p);
        for (const char* a : row.attrs) c.attributes_schema.push_back(a);
        for (const char* x : row.absents) c.asserts_absent.push_back(x);
        ont.add_concept(std::move(c));
    }
    Rng rng(seed);
    Rng filler_rng = rng.split(fnv1a64("ontology-filler"));
    const std::vector<ConceptId> filler_parents = {"condition", "biomarker", "solid_tumor",
                                                   "mutation"};
    if (filler_concepts > kFillerAdjectives.size() * kFillerNouns.size())
        throw DataError("filler concept count exceeds the name-pair space");
    // walk the adjective/noun grid at a seeded offset: names stay unique
    const std::size_t grid = kFillerAdjectives.size() * kFillerNouns.size();
    const std::size_t offset = static_cast<std::size_t>(filler_rng.next_u64() % grid);
    for (std::size_t i = 0; i < filler_concepts; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "synth_cond_%02zu", i);
        const std::size_t cell = (offset + i * 7) % grid;  // 7 coprime with 60
        const std::string adj = kFillerAdjectives[cell % kFillerAdjectives.size()];
        const std::string noun = kFillerNouns[cell / kFillerAdjectives.size()];
        Concept c;
        c.id = id;
        c.surface_forms.push_back(adj + " " + noun);
        if (filler_rng.bernoulli(0.4))
            c.surface_forms.push_back(adj + " " + noun + " type " + std::to_string(i));
        c.parents.push_back(filler_rng.pick(filler_parents));
        if (filler_rng.bernoulli(0.25)) {
            // occasional second parent keeps the closure tests honest on DAGs
            ConceptId second = filler_rng.pick(filler_parents);
            if (second != c.parents[0]) c.parents.push_back(second);
        }
        ont.add_concept(std::move(c));
    }
    ont.add_constraint({"pregnancy_requires_uterus", "pregnancy", "uterus", "from_event_date"});
    ont.add_ordinal_scale("stage", {"I", "II", "III", "IV"});
    ont.finalize();
    return ont;
}

namespace {

// ---------------------------------------------------------------------------
// Journey sampling

struct JourneyEvent {
    ConceptId concept_id;
    Polarity polarity = Polarity::asserted;
    std::map<std::string, std::string> attributes;
    Date date;
};

struct WeightedPool {
    std::vector<std::pair<ConceptId, int>> items;

    const ConceptId& draw(Rng& rng) const {
        int total = 0;
        for (const auto& [id, w] : items) total += w;
        int at = static_cast<int>(rng.uniform_int(0, total - 1));
        for (const auto& [id, w] : items) {
            at -= w;
            if (at < 0) return id;
        }
        return items.back().first;
    }
};

struct Pools {
    WeightedPool conditions;
    WeightedPool biomarkers;
    WeightedPool therapies;
    WeightedPool surgeries;
};

Pools make_pools(const Ontology& ontology, std::size_t filler_concepts) {
    Pools pools;
    pools.conditions.items = {
        {"breast_cancer", 30}, {"lung_cancer", 6},      {"nsclc", 10},
        {"prostate_cancer", 10}, {"colorectal_cancer", 8}, {"ovarian_cancer", 6},
        {"melanoma", 5},       {"leukemia", 4},         {"cll", 3},
        {"lymphoma", 4},
    };
    for (std::size_t i = 0; i < filler_concepts; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "synth_cond_%02zu", i);
        if (ontology.has_concept(id)) pools.conditions.items.push_back({id, 1});
    }
    pools.biomarkers.items = {
        {"pik3ca_mutation", 6}, {"brca1_mutation", 5}, {"brca2_mutation", 4},
        {"egfr_mutation", 5},   {"egfr_t790m", 3},     {"kras_g12c", 4},
        {"alk_fusion", 3},      {"er_positive", 8},    {"her2_negative", 7},
        {"msi_high", 3},
    };
    pools.therapies.items = {
        {"osimertinib", 6}, {"erlotinib", 4},     {"crizotinib", 3}, {"tamoxifen", 8},
        {"capecitabine", 6}, {"folfiri", 5},      {"olaparib", 4},   {"pembrolizumab", 6},
    };
    pools.surgeries.items = {
        {"mastectomy", 6}, {"lumpectomy", 6}, {"prostatectomy", 4}, {"hysterectomy", 3},
        {"oophorectomy", 3},
    };
    return pools;
}

Date base_date() { return Date{2015, 1, 1}; }

std::vector<JourneyEvent> sample_journey(Rng& rng, const Ontology& ontology, const Pools& pools,
                                         const DistSpec& events_spec) {
    std::vector<JourneyEvent> events;
    std::set<ConceptId> used;  // one event per concept_id per patient
    const Date diagnosis_date = add_days(base_date(), rng.uniform_int(0, 2500));

    auto add = [&](const ConceptId& concept_id, Polarity pol, Date date,
                   std::map<std::string, std::string> attrs = {}) {
        if (used.count(concept_id)) return false;
        used.insert(concept_id);
        events.push_back({concept_id, pol, std::move(attrs), date});
        return true;
    };

    auto stage_attrs = [&](const ConceptId& concept_id) {
        std::map<std::string, std::string> attrs;
        const auto& schema = ontology.concept_info(concept_id).attributes_schema;
        if (std::find(schema.begin(), schema.end(), "stage") != schema.end() &&
            rng.bernoulli(0.8)) {
            const auto& scale = ontology.ordinal_scales().at("stage");
            attrs["stage"] = scale[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(scale.size()) - 1))];
        }
        return attrs;
    };

    const ConceptId primary = pools.conditions.draw(rng);
    add(primary, Polarity::asserted, diagnosis_date, stage_attrs(primary));

    const std::size_t target = sample_dist(rng, events_spec);
    const bool wants_death = rng.bernoulli(0.12);

    auto hysterectomy_date = [&]() -> std::optional<Date> {
        for (const auto& e : events) {
            if (e.concept_id == "hysterectomy" || e.concept_id == "oophorectomy") return e.date;
        }
        return std::nullopt;
    };
    auto pregnancy_date = [&]() -> std::optional<Date> {
        for (const auto& e : events) {
            if (e.concept_id == "pregnancy") return e.date;
        }
        return std::nullopt;
    };

    int guard = 0;
    while (events.size() + (wants_death ? 1 : 0) < target && ++guard < 64) {
        const double roll = rng.uniform_real();
        if (roll < 0.30) {
            add(pools.biomarkers.draw(rng), Polarity::asserted,
                add_days(diagnosis_date, rng.uniform_int(-30, 120)));
        } else if (roll < 0.42) {
            // documented absence of a biomarker (explicitly negated finding)
            add(pools.biomarkers.draw(rng), Polarity::negated,
                add_days(diagnosis_date, rng.uniform_int(-30, 120)));
        } else if (roll < 0.72) {
            add(pools.therapies.draw(rng), Polarity::asserted,
                add_days(diagnosis_date, rng.uniform_int(20, 600)));
        } else if (roll < 0.84) {
            const ConceptId surgery = pools.surgeries.draw(rng);
            Date date = add_days(diagnosis_date, rng.uniform_int(30, 500));
            const bool removes_organ = surgery == "hysterectomy" || surgery == "oophorectomy";
            if (removes_organ) {
                if (auto preg = pregnancy_date()) {
                    // the clean journey stays consistent: surgery after pregnancy
                    date = add_days(*preg, rng.uniform_int(60, 400));
                }
            }
            add(surgery, Polarity::asserted, date);
        } else if (roll < 0.90) {
            const ConceptId secondary = pools.conditions.draw(rng);
            add(secondary, Polarity::asserted,
                add_days(diagnosis_date, rng.uniform_int(100, 900)), stage_attrs(secondary));
        } else {
            Date date = add_days(diagnosis_date, rng.uniform_int(30, 700));
            if (auto hyst = hysterectomy_date()) {
                // pregnancy must predate any organ-removing surgery
                const Date latest = add_days(*hyst, -30);
                if (latest < diagnosis_date) continue;
                date = add_days(diagnosis_date,
                                rng.uniform_int(0, latest.serial() - diagnosis_date.serial()));
            }
            add("pregnancy", Polarity::asserted, date);
        }
    }
    if (wants_death) {
        Date last = diagnosis_date;
        for (const auto& e : events) last = std::max(last, e.date, std::less<Date>{});
        add("death", Polarity::asserted, add_days(last, rng.uniform_int(30, 200)));
    }
    std::sort(events.begin(), events.end(), [](const JourneyEvent& a, const JourneyEvent& b) {
        if (a.date != b.date) return a.date < b.date;
        return a.concept_id < b.concept_id;
    });
    return events;
}

// ---------------------------------------------------------------------------
// Document rendering

const std::vector<const char*> kFillerSentences = {
    "Routine follow-up visit.",
    "Vitals reviewed and stable.",
    "Medication list reconciled.",
    "Patient reports feeling well.",
    "Laboratory panel within normal limits.",
    "Imaging reviewed with the patient.",
    "Plan discussed; return visit in three months.",
    "Counseling provided regarding adherence.",
};

const std::vector<const char*> kDocTypes = {"oncology_note", "progress_note", "pathology_report",
                                            "surgery_report"};

enum class EventKind { condition, biomarker, therapy, surgery, pregnancy, death, organ_other };

EventKind kind_of(const Ontology& ontology, const ConceptId& concept_id) {
    const auto& anc = ontology.ancestors(concept_id);
    if (concept_id == "pregnancy") return EventKind::pregnancy;
    if (concept_id == "death") return EventKind::death;
    if (anc.count("condition")) return EventKind::condition;
    if (anc.count("biomarker")) return EventKind::biomarker;
    if (anc.count("therapy")) return EventKind::therapy;
    if (anc.count("surgery") || anc.count("procedure")) return EventKind::surgery;
    return EventKind::organ_other;
}

struct Sentence {
    std::string text;
    int event_index = -1;        // journey event this mention renders, -1 = none
    std::size_t surface_offset = 0;
    std::size_t surface_len = 0;
};

std::string pick_surface(Rng& rng, const Ontology& ontology, const ConceptId& concept_id,
                         double paraphrase_rate) {
    const auto& forms = ontology.concept_info(concept_id).surface_forms;
    if (forms.empty()) return concept_id;
    // drawn unconditionally so the stream consumes the same count per mention
    // at every paraphrase rate
    const bool synonym = rng.bernoulli(paraphrase_rate);
    const auto idx = static_cast<std::size_t>(rng.uniform_int(1, 1'000'000));
    if (forms.size() > 1 && synonym) return forms[1 + idx % (forms.size() - 1)];
    return forms[0];
}

/// Renders one mention sentence. The @date tag is attached only when the
/// event date differs from the authoring date.
Sentence render_mention(Rng& rng, const Ontology& ontology, const JourneyEvent& event,
                        bool first_mention, Date doc_date, double paraphrase_rate) {
    const std::string surface = pick_surface(rng, ontology, event.concept_id, paraphrase_rate);
    const std::string tag =
        event.date == doc_date ? "" : " @date{" + event.date.to_string() + "}";
    Sentence s;
    const EventKind kind = kind_of(ontology, event.concept_id);
    std::string prefix, suffix;
    if (event.polarity == Polarity::negated) {
        prefix = rng.bernoulli(0.5) ? "Testing negative for " : "No evidence of ";
        suffix = tag + ".";
    } else {
        switch (kind) {
            case EventKind::condition:
                if (first_mention) {
                    prefix = "Patient diagnosed with ";
                    suffix = tag;
                    auto it = event.attributes.find("stage");
                    if (it != event.attributes.end()) suffix += ", stage " + it->second;
                    suffix += ".";
                } else {
                    prefix = "Follow-up of ";
                    suffix = tag + ".";
                }
                break;
            case EventKind::biomarker:
                prefix = first_mention ? "Molecular testing identified " : "Known ";
                suffix = tag + ".";
                break;
            case EventKind::therapy:
                prefix = first_mention ? "Started " : "Continues ";
                suffix = tag + ".";
                break;
            case EventKind::surgery:
                prefix = first_mention ? "Underwent " : "Status post ";
                suffix = tag + ".";
                break;
            case EventKind::pregnancy:
                prefix = first_mention ? "Patient is " : "Prenatal visit; ";
                suffix = tag + ".";
                break;
            case EventKind::death:
            case EventKind::organ_other:
                prefix = "Patient ";
                suffix = tag + ".";
                break;
        }
    }
    s.text = prefix + surface + suffix;
    s.surface_offset = prefix.size();
    s.surface_len = surface.size();
    return s;
}

std::string zero_pad(std::size_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, v);
    return buf;
}

}  // namespace

SynthOutput gen_patients(const GeneratorParams& params, const Ontology& ontology) {
    params.validate();
    SynthOutput out;
    const Pools pools = make_pools(ontology, params.ontology_filler_concepts);
    const Rng master(params.seed);

    for (std::size_t pi = 0; pi < params.n_patients; ++pi) {
        Rng rng = master.split(0x9e00 + pi);
        const std::string patient_id = "p" + zero_pad(pi + 1, 5);

        const auto journey = sample_journey(rng, ontology, pools, params.events_per_patient);

        // Document skeleton: dates span the journey, last one covers it.
        const std::size_t n_docs = sample_dist(rng, params.docs_per_patient);
        Date min_date = journey.front().date, max_date = journey.front().date;
        for (const auto& e : journey) {
            min_date = std::min(min_date, e.date, std::less<Date>{});
            max_date = std::max(max_date, e.date, std::less<Date>{});
        }
        const Date span_start = add_days(min_date, -45);
        const std::int64_t span_days = (add_days(max_date, 60).serial() - span_start.serial());
        std::vector<Date> doc_dates;
        for (std::size_t d = 0; d < n_docs; ++d)
            doc_dates.push_back(add_days(span_start, rng.uniform_int(0, span_days)));
        std::sort(doc_dates.begin(), doc_dates.end());
        doc_dates.back() = std::max(doc_dates.back(), max_date, std::less<Date>{});

        std::vector<std::vector<Sentence>> doc_sentences(n_docs);

        // Scatter 1..3 mentions of each event across eligible documents.
        for (std::size_t ei = 0; ei < journey.size(); ++ei) {
            const auto& event = journey[ei];
            std::vector<std::size_t> eligible;
            for (std::size_t d = 0; d < n_docs; ++d) {
                if (!(doc_dates[d] < event.date)) eligible.push_back(d);
            }
            if (eligible.empty()) eligible.push_back(n_docs - 1);
            const double roll = rng.uniform_real();
            std::size_t mentions = roll < 0.5 ? 1 : roll < 0.85 ? 2 : 3;
            mentions = std::min(mentions, eligible.size());
            rng.shuffle(eligible);
            std::vector<std::size_t> targets(eligible.begin(),
                                             eligible.begin() + static_cast<std::ptrdiff_t>(mentions));
            std::sort(targets.begin(), targets.end());
            for (std::size_t m = 0; m < targets.size(); ++m) {
                Sentence s = render_mention(rng, ontology, event, m == 0, doc_dates[targets[m]],
                                            params.paraphrase_rate);
                s.event_index = static_cast<int>(ei);
                doc_sentences[targets[m]].push_back(std::move(s));
            }
        }

        // Contradiction injection (never touches reserved concepts).
        auto inject = [&](std::size_t doc_idx) {
            const bool has_organ_surgery =
                std::any_of(journey.begin(), journey.end(), [](const JourneyEvent& e) {
                    return e.concept_id == "hysterectomy" || e.concept_id == "oophorectomy";
                });
            Sentence s;
            InjectionLogEntry log;
            log.patient_id = patient_id;
            if (has_organ_surgery && rng.bernoulli(0.35)) {
                Date surgery_date = journey.front().date;
                for (const auto& e : journey) {
                    if (e.concept_id == "hysterectomy" || e.concept_id == "oophorectomy")
                        surgery_date = e.date;
                }
                const Date date = add_days(surgery_date, rng.uniform_int(30, 300));
                s.text = "Patient is pregnant @date{" + date.to_string() + "}.";
                s.surface_offset = std::string("Patient is ").size();
                s.surface_len = std::string("pregnant").size();
                log.kind = "constraint";
                log.concept_id = "pregnancy";
            } else {
                const auto& target = journey[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(journey.size()) - 1))];
                const Date date = add_days(target.date, rng.uniform_int(10, 240));
                const std::string surface = ontology.concept_info(target.concept_id).surface_forms[0];
                if (target.polarity == Polarity::asserted) {
                    s.text = "Patient denies " + surface + " @date{" + date.to_string() + "}.";
                    s.surface_offset = std::string("Patient denies ").size();
                } else {
                    s.text = "Molecular testing identified " + surface + " @date{" +
                             date.to_string() + "}.";
                    s.surface_offset = std::string("Molecular testing identified ").size();
                }
                s.surface_len = surface.size();
                log.kind = "polarity";
                log.concept_id = target.concept_id;
            }
            log.doc_id = patient_id + "-d" + zero_pad(doc_idx + 1, 4);
            doc_sentences[doc_idx].push_back(std::move(s));
            out.injection_log.push_back(std::move(log));
        };
        if (params.contradiction_length_coupling) {
            for (std::size_t d = 0; d < n_docs; ++d) {
                if (rng.bernoulli(params.contradiction_rate)) inject(d);
            }
        } else if (rng.bernoulli(params.contradiction_rate)) {
            inject(static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(n_docs) - 1)));
        }

        // Assemble documents; every document gets at least one filler line.
        Abstraction abstraction;
        abstraction.patient_id = patient_id;
        std::vector<std::vector<Provenance>> event_support(journey.size());

        std::vector<Document> docs;
        for (std::size_t d = 0; d < n_docs; ++d) {
            Document doc;
            doc.patient_id = patient_id;
            doc.doc_id = patient_id + "-d" + zero_pad(d + 1, 4);
            doc.authored_at = doc_dates[d];
            doc.doc_type = kDocTypes[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(kDocTypes.size()) - 1))];
            const std::size_t fillers =
                doc_sentences[d].empty() ? 2 + static_cast<std::size_t>(rng.uniform_int(0, 2))
                                         : 1 + static_cast<std::size_t>(rng.uniform_int(0, 1));
            for (std::size_t f = 0; f < fillers; ++f) {
                Sentence s;
                s.text = kFillerSentences[static_cast<std::size_t>(rng.uniform_int(
                    0, static_cast<std::int64_t>(kFillerSentences.size()) - 1))];
                doc_sentences[d].push_back(std::move(s));
            }
            std::string text;
            for (const auto& s : doc_sentences[d]) {
                if (!text.empty()) text += ' ';
                const std::size_t offset = text.size();
                text += s.text;
                if (s.event_index >= 0) {
                    event_support[static_cast<std::size_t>(s.event_index)].push_back(
                        {doc.doc_id, offset + s.surface_offset,
                         offset + s.surface_offset + s.surface_len});
                }
            }
            doc.text = text;
            docs.push_back(std::move(doc));
        }

        for (std::size_t ei = 0; ei < journey.size(); ++ei) {
            const auto& e = journey[ei];
            ConsolidatedEvent ce;
            ce.concept_id = e.concept_id;
            ce.polarity = e.polarity;
            ce.attributes = e.attributes;
            ce.time = {e.date, e.date};
            ce.confidence = 0.8;
            ce.support = event_support[ei];
            ce.latest_evidence = e.date;
            abstraction.events.push_back(std::move(ce));
        }
        out.abstractions.push_back(std::move(abstraction));
        out.corpus.patients.emplace(patient_id, std::move(docs));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Query bank

namespace {

struct BankBuilder {
    Rng rng;
    const Ontology& ontology;
    const KnowledgeBase& kb;
    std::vector<QueryRecord> bank;
    std::set<std::string> canonical_seen;
    std::map<std::string, std::size_t> gold_sizes;  // query_id -> |gold|

    const std::vector<std::string> prefix_display = {"Find me patients", "Show me patients",
                                                     "Find patients", "Patients"};

    std::string next_id() { return "q" + zero_pad(bank.size() + 1, 3); }

    std::size_t gold_size_of(const std::string& squerl_text) {
        const auto ast = parse(squerl_text, ontology);
        return execute(*ast, kb, ontology).size();
    }

    std::string connector_for(const ConceptId& concept_id) {
        const auto& anc = ontology.ancestors(concept_id);
        if (anc.count("therapy"))
            return rng.bernoulli(0.5) ? "treated with" : "receiving";
        if (anc.count("condition") && rng.bernoulli(0.3)) return "diagnosed with";
        return "with";
    }

    std::string prefix() { return prefix_display[static_cast<std::size_t>(rng.uniform_int(0, 3))]; }

    std::string surface_of(const ConceptId& concept_id, bool prefer_synonym = false) {
        const auto& forms = ontology.concept_info(concept_id).surface_forms;
        if (forms.empty()) return concept_id;
        if (prefer_synonym && forms.size() > 1) return forms[1];
        return forms[0];
    }

    /// Adds a record; returns empty string when rejected as a duplicate.
    std::string add(const std::string& squerl_text, const std::string& nl_text,
                    std::vector<QueryRelation> relations, bool allow_duplicate_ast = false) {
        const auto ast = parse(squerl_text, ontology);
        const std::string canonical = pretty_print(*ast);
        if (!allow_duplicate_ast && !canonical_seen.insert(canonical).second) return "";
        if (allow_duplicate_ast) canonical_seen.insert(canonical);
        QueryRecord rec;
        rec.query_id = next_id();
        rec.nl_text = nl_text;
        rec.squerl_text = squerl_text;
        rec.expert_class = expert_class_for(*ast, ontology);
        rec.relations = std::move(relations);
        gold_sizes[rec.query_id] = execute(*ast, kb, ontology).size();
        bank.push_back(std::move(rec));
        return bank.back().query_id;
    }

    std::string filter_clause_nl(const AtomFilter& f) {
        switch (f.comparator) {
            case Comparator::eq: return ", " + f.attribute + " " + f.value;
            case Comparator::ge: return ", " + f.attribute + " at least " + f.value;
            case Comparator::le: return ", " + f.attribute + " at most " + f.value;
            case Comparator::ne: return ", " + f.attribute + " other than " + f.value;
        }
        return "";
    }
};

}  // namespace

std::string expert_class_for(const QueryAst& ast, const Ontology& ontology) {
    std::size_t ops = 0, filters = 0, neg_atoms = 0, max_depth = 0;
    std::function<void(const QueryAst&)> walk = [&](const QueryAst& node) {
        switch (node.kind) {
            case QueryAst::Kind::atom:
                filters += node.filters.size();
                if (node.polarity == Polarity::negated) ++neg_atoms;
                max_depth = std::max(max_depth, ontology.depth(node.concept_id));
                return;
            case QueryAst::Kind::not_:
                ++ops;
                walk(*node.left);
                return;
            default:
                ++ops;
                walk(*node.left);
                walk(*node.right);
                return;
        }
    };
    walk(ast);
    const std::size_t depth_term = max_depth > 3 ? max_depth - 3 : 0;
    const std::size_t score = 3 * ops + filters + neg_atoms + depth_term;
    if (score == 0) return "Base";
    if (score <= 2) return "Low";
    if (score <= 6) return "Medium";
    return "Hard";
}

std::vector<QueryRecord> gen_query_bank(const GeneratorParams& params, const Ontology& ontology,
                                        const std::vector<Abstraction>& abstractions) {
    params.validate();
    if (params.n_queries < 30)
        throw DataError("n_queries must be >= 30 to fit the structural query sets");
    const KnowledgeBase kb = build_kb_from_abstractions(abstractions, ontology);
    BankBuilder b{Rng(params.seed).split(fnv1a64("query-bank")), ontology, kb, {}, {}, {}};

    // Subtype chain mirroring the therapy hierarchy, length 5.
    const std::vector<ConceptId> chain = {"systemic_therapy", "targeted_therapy", "tki",
                                          "egfr_tki", "osimertinib"};
    std::string parent_id;
    std::string chain_tail_id;
    for (const auto& concept_id : chain) {
        std::vector<QueryRelation> rels;
        if (!parent_id.empty()) rels.push_back({"child_of", parent_id});
        const std::string nl =
            b.prefix() + " " + b.connector_for(concept_id) + " " + b.surface_of(concept_id);
        parent_id = b.add(concept_id, nl, std::move(rels));
        chain_tail_id = parent_id;
    }

    // Ontology-descent pairs on conditions.
    {
        const std::string cancer_id =
            b.add("cancer", b.prefix() + " with cancer", {});
        const std::string solid_id =
            b.add("solid_tumor", b.prefix() + " with solid tumor",
                  {{"child_of", cancer_id}});
        b.add("breast_cancer", b.prefix() + " with breast cancer", {{"child_of", solid_id}});
    }

    // Paraphrase twins over brand/generic and other synonym pairs; the
    // structural sets scale down for small banks.
    const std::size_t pair_budget =
        std::max<std::size_t>(3, std::min<std::size_t>(8, params.n_queries / 16));
    std::vector<ConceptId> synonym_bearing = {"osimertinib", "tamoxifen",  "capecitabine",
                                              "olaparib",    "pembrolizumab", "breast_cancer",
                                              "lumpectomy",  "nsclc"};
    if (synonym_bearing.size() > pair_budget) synonym_bearing.resize(pair_budget);
    for (const auto& concept_id : synonym_bearing) {
        if (ontology.concept_info(concept_id).surface_forms.size() < 2) continue;
        const std::string canonical_nl =
            b.prefix() + " " + b.connector_for(concept_id) + " " + b.surface_of(concept_id);
        std::string first =
            concept_id == "osimertinib" ? chain_tail_id : b.add(concept_id, canonical_nl, {});
        if (first.empty()) continue;
        const std::string synonym = b.surface_of(concept_id, /*prefer_synonym=*/true);
        const std::string twin_nl =
            b.prefix() + " " + b.connector_for(concept_id) + " " + synonym;
        b.add("\"" + synonym + "\"", twin_nl, {{"paraphrase_of", first}},
              /*allow_duplicate_ast=*/true);
    }

    // Intersection pairs: base atom vs And(base, extra).
    std::vector<std::pair<ConceptId, ConceptId>> and_pairs = {
        {"breast_cancer", "pik3ca_mutation"}, {"breast_cancer", "tamoxifen"},
        {"lung_cancer", "egfr_mutation"},     {"nsclc", "osimertinib"},
        {"prostate_cancer", "brca2_mutation"}, {"colorectal_cancer", "folfiri"}};
    if (and_pairs.size() > pair_budget) and_pairs.resize(pair_budget);
    for (const auto& [base, extra] : and_pairs) {
        std::string base_id = b.add(base, b.prefix() + " with " + b.surface_of(base), {});
        if (base_id.empty()) {
            // base already exists; find it by canonical form
            for (const auto& rec : b.bank) {
                if (rec.squerl_text == base || pretty_print(*parse(rec.squerl_text, ontology)) ==
                                                   pretty_print(*parse(base, ontology))) {
                    base_id = rec.query_id;
                    break;
                }
            }
        }
        if (base_id.empty()) continue;
        const std::string squerl = base + " AND " + extra;
        const std::string nl = b.prefix() + " with " + b.surface_of(base) + " and " +
                               b.surface_of(extra);
        b.add(squerl, nl, {{"intersection_of", base_id}});
    }

    // Temporal queries.
    b.add("BEFORE(breast_cancer, pregnancy)",
          b.prefix() + " with breast cancer before pregnancy", {});
    b.add("BEFORE(nsclc, osimertinib)", b.prefix() + " with NSCLC before osimertinib", {});
    b.add("BEFORE(breast_cancer, mastectomy)",
          b.prefix() + " with breast cancer before mastectomy", {});

    // Zero-result queries from reserved concepts only.
    const std::size_t zero_target = std::max<std::size_t>(
        3, static_cast<std::size_t>(static_cast<double>(params.n_queries) *
                                    params.zero_result_fraction));
    const auto& reserved = reserved_zero_result_concepts();
    const std::vector<ConceptId> zero_partners = {"breast_cancer", "lung_cancer", "tamoxifen",
                                                  "pembrolizumab"};
    std::size_t zero_made = 0;
    for (std::size_t i = 0; zero_made < zero_target; ++i) {
        if (b.bank.size() >= params.n_queries)
            throw DataError("n_queries is too small for the structural query sets plus " +
                            std::to_string(zero_target) + " zero-result queries");
        if (i > zero_target + reserved.size() + 16) break;
        const ConceptId& rare = reserved[i % reserved.size()];
        std::string added;
        if (i < reserved.size()) {
            added = b.add(rare, b.prefix() + " with " + b.surface_of(rare), {});
        } else {
            const ConceptId& partner = b.rng.pick(zero_partners);
            added = b.add(partner + " AND " + rare,
                          b.prefix() + " with " + b.surface_of(partner) + " and " +
                              b.surface_of(rare),
                          {});
        }
        if (!added.empty()) ++zero_made;
    }

    // Random shapes with category steering.
    std::vector<ConceptId> atom_pool;
    for (const auto& [id, c] : ontology.concepts()) {
        const auto& anc = ontology.ancestors(id);
        if (id == "organ" || anc.count("organ") || id == "outcome") continue;
        if (std::find(reserved.begin(), reserved.end(), id) != reserved.end()) continue;
        atom_pool.push_back(id);
    }
    const std::vector<ConceptId> broad_pool = {"cancer", "solid_tumor", "systemic_therapy",
                                               "condition", "biomarker", "targeted_therapy"};

    auto category_count = [&](QueryCategory want) {
        std::size_t n = 0;
        for (const auto& rec : b.bank) {
            if (categorize(b.gold_sizes[rec.query_id], params.alpha, params.beta) == want) ++n;
        }
        return n;
    };

    int attempts = 0;
    const int max_attempts = static_cast<int>(params.n_queries) * 40;
    while (b.bank.size() < params.n_queries && ++attempts < max_attempts) {
        const bool need_broad = category_count(QueryCategory::broad) < 3;
        const bool need_sparse = category_count(QueryCategory::sparse) < 3;
        const double roll = b.rng.uniform_real();
        std::string squerl, nl;
        if (need_broad) {
            const ConceptId& c = b.rng.pick(broad_pool);
            squerl = c;
            nl = b.prefix() + " " + b.connector_for(c) + " " + b.surface_of(c);
        } else if (need_sparse || roll < 0.35) {
            // conjunctions narrow the cohort
            const ConceptId& a = b.rng.pick(atom_pool);
            const ConceptId& c = b.rng.pick(atom_pool);
            if (a == c) continue;
            squerl = a + " AND " + c;
            nl = b.prefix() + " with " + b.surface_of(a) + " and " + b.surface_of(c);
        } else if (roll < 0.55) {
            const ConceptId& a = b.rng.pick(atom_pool);
            squerl = a;
            nl = b.prefix() + " " + b.connector_for(a) + " " + b.surface_of(a);
        } else if (roll < 0.65) {
            const ConceptId& a = b.rng.pick(atom_pool);
            const auto& schema = ontology.concept_info(a).attributes_schema;
            if (std::find(schema.begin(), schema.end(), "stage") == schema.end()) continue;
            const auto& scale = ontology.ordinal_scales().at("stage");
            const std::string value = scale[static_cast<std::size_t>(
                b.rng.uniform_int(0, static_cast<std::int64_t>(scale.size()) - 1))];
            const bool ge = b.rng.bernoulli(0.6);
            AtomFilter f{"stage", ge ? Comparator::ge : Comparator::eq, value};
            squerl = a + "[stage " + (ge ? ">=" : "=") + " " + value + "]";
            nl = b.prefix() + " with " + b.surface_of(a) + b.filter_clause_nl(f);
        } else if (roll < 0.75) {
            const ConceptId& a = b.rng.pick(atom_pool);
            const ConceptId& c = b.rng.pick(atom_pool);
            if (a == c) continue;
            squerl = a + " OR " + c;
            nl = b.prefix() + " with " + b.surface_of(a) + " or " + b.surface_of(c);
        } else if (roll < 0.85) {
            const ConceptId& a = b.rng.pick(atom_pool);
            const ConceptId& c = b.rng.pick(atom_pool);
            if (a == c) continue;
            squerl = a + " EXCEPT " + c;
            nl = b.prefix() + " with " + b.surface_of(a) + " except " + b.surface_of(c);
        } else if (roll < 0.93) {
            const ConceptId& a = b.rng.pick(atom_pool);
            const ConceptId& c = b.rng.pick(atom_pool);
            if (a == c) continue;
            squerl = a + " AND NOT " + c;
            nl = b.prefix() + " with " + b.surface_of(a) + " and no record of " +
                 b.surface_of(c);
        } else {
            // documented absence of a biomarker
            const std::vector<ConceptId> markers = {"brca1_mutation", "egfr_mutation",
                                                    "pik3ca_mutation", "her2_negative"};
            const ConceptId& m = b.rng.pick(markers);
            squerl = "NEG " + m;
            nl = b.prefix() + " with documented absence of " + b.surface_of(m);
        }
        if (squerl.empty()) continue;
        // accidental empties are rejected so ZeroResult == by-construction set
        if (b.gold_size_of(squerl) == 0) continue;
        b.add(squerl, nl, {});
    }

    if (b.bank.size() < params.n_queries)
        throw DataError("query bank generation exhausted its attempt budget at " +
                        std::to_string(b.bank.size()) + " of " +
                        std::to_string(params.n_queries) + " queries");
    for (QueryCategory cat : {QueryCategory::broad, QueryCategory::narrow, QueryCategory::sparse,
                              QueryCategory::zero_result}) {
        if (category_count(cat) < 3)
            throw DataError("query bank lacks coverage for category " + to_string(cat) +
                            "; regenerate with different cohort targets");
    }
    validate_query_bank(b.bank, ontology);
    return b.bank;
}

GoldMatrix gen_gold(const std::vector<Abstraction>& abstractions,
                    const std::vector<QueryRecord>& bank, const Ontology& ontology) {
    const KnowledgeBase kb = build_kb_from_abstractions(abstractions, ontology);
    GoldMatrix gold;
    gold.population = kb.patient_ids();
    for (const auto& rec : bank) {
        try {
            const auto ast = parse(rec.squerl_text, ontology);
            Cohort cohort = execute(*ast, kb, ontology);
            cohort.ranking.reset();  // gold is a label set, not a ranking
            gold.gold[rec.query_id] = std::move(cohort);
        } catch (const std::exception& e) {
            throw DataError("gold generation failed for query '" + rec.query_id + "': " +
                            e.what());
        }
    }
    return gold;
}

}  // namespace acr
