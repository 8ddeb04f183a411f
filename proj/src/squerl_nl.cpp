#include <algorithm>
#include <cctype>
#include <set>

#include <json.hpp>

#include "acr/error.hpp"
#include "acr/io.hpp"
#include "acr/squerl.hpp"

namespace acr {

const NlPhrases& NlPhrases::standard() {
    static const NlPhrases phrases = [] {
        NlPhrases p;
        p.prefixes = {"find me patients", "show me patients", "find patients", "patients"};
        p.with_connectors = {"diagnosed with", "treated with", "who received", "receiving",
                             "with"};
        return p;
    }();
    return phrases;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool strip_leading(std::string& text, const std::string& phrase) {
    if (text.size() < phrase.size()) return false;
    if (text.compare(0, phrase.size(), phrase) != 0) return false;
    if (text.size() > phrase.size() && text[phrase.size()] != ' ') return false;
    text = trim(text.substr(phrase.size()));
    return true;
}

std::vector<std::string> split_on_word(const std::string& text, const std::string& word,
                                       std::vector<std::string>* separators = nullptr,
                                       const std::vector<std::string>& words = {}) {
    // Splits on any of `words` (or the single `word`), as whole words.
    std::vector<std::string> needles = words.empty() ? std::vector<std::string>{word} : words;
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t best = std::string::npos;
        std::string best_needle;
        for (const auto& n : needles) {
            const std::string padded = " " + n + " ";
            const std::size_t at = text.find(padded, pos);
            if (at != std::string::npos && (best == std::string::npos || at < best)) {
                best = at;
                best_needle = n;
            }
        }
        if (best == std::string::npos) break;
        parts.push_back(trim(text.substr(pos, best - pos)));
        if (separators) separators->push_back(best_needle);
        pos = best + best_needle.size() + 2;
    }
    parts.push_back(trim(text.substr(pos)));
    return parts;
}

struct NlTranslator {
    const NlPhrases& phrases;
    const Ontology& ontology;
    const std::string& original;

    [[noreturn]] void fail(const std::string& why) const {
        throw DataError("untranslatable query text (" + why + "): '" + original + "'");
    }

    std::string concept_for(const std::string& name) const {
        const std::string trimmed = trim(name);
        if (auto id = ontology.resolve(trimmed)) return *id;
        fail("unknown concept_id '" + trimmed + "'");
    }

    /// "name[, attr clause]*" -> atom squerl text.
    std::string atom_phrase(const std::string& text) const {
        std::vector<std::string> clauses;
        std::size_t pos = 0;
        while (true) {
            const std::size_t at = text.find(", ", pos);
            if (at == std::string::npos) {
                clauses.push_back(trim(text.substr(pos)));
                break;
            }
            clauses.push_back(trim(text.substr(pos, at - pos)));
            pos = at + 2;
        }
        std::string out = concept_for(clauses[0]);
        if (clauses.size() == 1) return out;
        out += '[';
        for (std::size_t i = 1; i < clauses.size(); ++i) {
            if (i > 1) out += ", ";
            out += filter_clause(clauses[i]);
        }
        out += ']';
        return out;
    }

    std::string filter_clause(const std::string& clause) const {
        const std::size_t sp = clause.find(' ');
        if (sp == std::string::npos) fail("malformed filter clause '" + clause + "'");
        const std::string attr = clause.substr(0, sp);
        std::string rest = trim(clause.substr(sp + 1));
        std::string op = "=";
        if (strip_leading(rest, phrases.ge_marker)) op = ">=";
        else if (strip_leading(rest, phrases.le_marker)) op = "<=";
        else if (strip_leading(rest, phrases.ne_marker)) op = "!=";
        if (rest.empty()) fail("missing filter value in '" + clause + "'");
        // ordinal values are matched case-insensitively against the scale
        if (ontology.is_ordinal_attribute(attr)) {
            for (const auto& value : ontology.ordinal_scales().at(attr)) {
                if (fold_case(value) == rest) return attr + " " + op + " " + value;
            }
            fail("value '" + rest + "' is not on the '" + attr + "' scale");
        }
        return attr + " " + op + " " + rest;
    }

    /// A segment between top-level connectives: optional unary marker, then an
    /// atom phrase, or an "X before Y" pair.
    std::string segment(std::string text) const {
        if (strip_leading(text, phrases.not_marker)) return "NOT " + segment(text);
        if (strip_leading(text, phrases.neg_marker)) return "NEG " + concept_for(text);
        const auto before_parts = split_on_word(text, phrases.before_word);
        if (before_parts.size() == 2)
            return "BEFORE(" + atom_phrase(before_parts[0]) + ", " + atom_phrase(before_parts[1]) +
                   ")";
        if (before_parts.size() > 2) fail("chained 'before'");
        return atom_phrase(text);
    }

    std::string and_level(const std::string& text) const {
        std::vector<std::string> seps;
        const auto parts =
            split_on_word(text, "", &seps, {phrases.and_word, phrases.except_word});
        std::string out = segment(parts[0]);
        for (std::size_t i = 1; i < parts.size(); ++i) {
            out += seps[i - 1] == phrases.and_word ? " AND " : " EXCEPT ";
            out += segment(parts[i]);
        }
        return out;
    }

    std::string or_level(const std::string& text) const {
        const auto parts = split_on_word(text, phrases.or_word);
        std::string out = and_level(parts[0]);
        for (std::size_t i = 1; i < parts.size(); ++i) out += " OR " + and_level(parts[i]);
        return out;
    }

    std::string run() const {
        std::string text = fold_case(trim(original));
        while (!text.empty() && (text.back() == '.' || text.back() == '?')) {
            text.pop_back();
            text = trim(text);
        }
        bool prefixed = false;
        for (const auto& prefix : phrases.prefixes) {
            if (strip_leading(text, prefix)) {
                prefixed = true;
                break;
            }
        }
        if (!prefixed) fail("no known request prefix");
        for (const auto& connector : phrases.with_connectors) {
            if (strip_leading(text, connector)) break;
        }
        if (text.empty()) fail("no criteria after the request prefix");
        return or_level(text);
    }
};

}  // namespace

std::string translate_nl(const std::string& nl_text, const NlPhrases& phrases,
                         const Ontology& ontology) {
    NlTranslator translator{phrases, ontology, nl_text};
    const std::string squerl = translator.run();
    parse(squerl, ontology);  // must reparse cleanly
    return squerl;
}

std::vector<QueryRecord> parse_query_bank_jsonl(const std::string& content,
                                                const std::string& origin) {
    std::vector<QueryRecord> bank;
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
        QueryRecord rec;
        rec.query_id = j.at("query_id").get<std::string>();
        rec.nl_text = j.value("nl_text", std::string());
        rec.squerl_text = j.at("squerl_text").get<std::string>();
        rec.expert_class = j.value("expert_class", std::string("Base"));
        for (const auto& rj : j.value("relations", nlohmann::json::array()))
            rec.relations.push_back(
                {rj.at("kind").get<std::string>(), rj.at("other").get<std::string>()});
        bank.push_back(std::move(rec));
    }
    return bank;
}

std::vector<QueryRecord> load_query_bank(const std::string& path) {
    return parse_query_bank_jsonl(read_file(path), path);
}

std::string query_bank_to_jsonl(const std::vector<QueryRecord>& bank) {
    std::string out;
    for (const auto& rec : bank) {
        nlohmann::ordered_json j;
        j["query_id"] = rec.query_id;
        j["nl_text"] = rec.nl_text;
        j["squerl_text"] = rec.squerl_text;
        j["expert_class"] = rec.expert_class;
        j["relations"] = nlohmann::ordered_json::array();
        for (const auto& r : rec.relations)
            j["relations"].push_back({{"kind", r.kind}, {"other", r.other_query_id}});
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_query_bank(const std::vector<QueryRecord>& bank, const std::string& path) {
    write_file_atomic(path, query_bank_to_jsonl(bank));
}

void validate_query_bank(const std::vector<QueryRecord>& bank, const Ontology& ontology) {
    std::set<std::string> ids;
    for (const auto& rec : bank) {
        if (!ids.insert(rec.query_id).second)
            throw DataError("query bank: duplicate query_id '" + rec.query_id + "'");
    }
    static const std::set<std::string> kKinds = {"paraphrase_of", "child_of", "intersection_of"};
    static const std::set<std::string> kClasses = {"Base", "Low", "Medium", "Hard"};
    for (const auto& rec : bank) {
        try {
            parse(rec.squerl_text, ontology);
        } catch (const ParseError& e) {
            throw DataError("query '" + rec.query_id + "' does not parse: " + e.what());
        }
        if (!kClasses.count(rec.expert_class))
            throw DataError("query '" + rec.query_id + "' has unknown expert class '" +
                            rec.expert_class + "'");
        for (const auto& r : rec.relations) {
            if (!kKinds.count(r.kind))
                throw DataError("query '" + rec.query_id + "' has unknown relation kind '" +
                                r.kind + "'");
            if (!ids.count(r.other_query_id))
                throw DataError("query '" + rec.query_id + "' relation references unknown id '" +
                                r.other_query_id + "'");
        }
    }
}

}  // namespace acr
