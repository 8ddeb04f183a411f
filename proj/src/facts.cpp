#include <algorithm>
#include <cctype>

#include "acr/error.hpp"
#include "acr/kb.hpp"

namespace acr {

std::string to_string(Polarity p) { return p == Polarity::asserted ? "asserted" : "negated"; }

Polarity polarity_from_string(const std::string& s) {
    if (s == "asserted") return Polarity::asserted;
    if (s == "negated") return Polarity::negated;
    throw DataError("unknown polarity '" + s + "'");
}

namespace {

bool is_strippable(char c) {
    switch (c) {
        case '.':
        case ',':
        case ';':
        case ':':
        case '!':
        case '?':
        case '(':
        case ')':
        case '[':
        case ']':
        case '"':
        case '\'':
            return true;
        default:
            return false;
    }
}

/// Token views over a document: stripped original-case core, normalized form,
/// and the char span of the core within the document text.
struct DocToken {
    std::string original;
    std::string core;
    std::string norm;
    std::size_t begin = 0;
    std::size_t end = 0;
    bool sentence_end = false;
};

std::vector<DocToken> doc_tokens(const std::string& text) {
    std::vector<DocToken> out;
    for (const auto& span : token_spans(text)) {
        DocToken t;
        t.original = text.substr(span.begin, span.end - span.begin);
        std::size_t b = 0, e = t.original.size();
        while (b < e && is_strippable(t.original[b])) ++b;
        while (e > b && is_strippable(t.original[e - 1])) --e;
        t.core = t.original.substr(b, e - b);
        t.norm = fold_case(t.core);
        t.begin = span.begin + b;
        t.end = span.begin + e;
        const char last = t.original.empty() ? ' ' : t.original.back();
        t.sentence_end = (last == '.' || last == ';' || last == '!' || last == '?');
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> words;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t sp = s.find(' ', pos);
        if (sp == std::string::npos) sp = s.size();
        if (sp > pos) words.push_back(s.substr(pos, sp - pos));
        pos = sp + 1;
    }
    return words;
}

bool negated_before(const std::vector<DocToken>& tokens, std::size_t match_begin,
                    std::size_t window) {
    // Walk backwards; a sentence boundary ends the scope of any cue.
    const std::size_t lo = match_begin >= window ? match_begin - window : 0;
    for (std::size_t i = match_begin; i-- > lo;) {
        if (tokens[i].sentence_end) return false;
        const std::string& w = tokens[i].norm;
        if (w == "no" || w == "denies" || w == "without") return true;
        if (w == "negative" && i + 1 < match_begin && tokens[i + 1].norm == "for") return true;
    }
    return false;
}

std::optional<Date> parse_date_tag(const std::string& original) {
    const std::string prefix = "@date{";
    const std::size_t at = original.find(prefix);
    if (at == std::string::npos) return std::nullopt;
    const std::size_t close = original.find('}', at + prefix.size());
    if (close == std::string::npos) return std::nullopt;
    return Date::parse(original.substr(at + prefix.size(), close - at - prefix.size()));
}

}  // namespace

struct FactExtractor::Impl {
    struct SurfaceEntry {
        std::vector<std::string> words;  // normalized
        ConceptId concept_id;
    };

    const Ontology& ontology;
    ExtractorConfig config;
    // first normalized word -> entries sorted longest-first for maximal matches
    std::map<std::string, std::vector<SurfaceEntry>> matcher;

    Impl(const Ontology& ont, ExtractorConfig cfg) : ontology(ont), config(std::move(cfg)) {
        for (const auto& [id, c] : ontology.concepts()) {
            std::vector<std::string> names = c.surface_forms;
            names.push_back(id);
            for (const auto& name : names) {
                auto words = split_words(fold_case(name));
                if (words.empty()) continue;
                matcher[words[0]].push_back({words, id});
            }
        }
        for (auto& [first, entries] : matcher) {
            std::sort(entries.begin(), entries.end(),
                      [](const SurfaceEntry& a, const SurfaceEntry& b) {
                          if (a.words.size() != b.words.size())
                              return a.words.size() > b.words.size();
                          return a.concept_id < b.concept_id;
                      });
        }
    }
};

FactExtractor::FactExtractor(const Ontology& ontology, ExtractorConfig config)
    : impl_(std::make_shared<const Impl>(ontology, std::move(config))) {}

std::vector<Fact> FactExtractor::extract(const Document& doc) const {
    const Ontology& ontology = impl_->ontology;
    const ExtractorConfig& config = impl_->config;
    const auto tokens = doc_tokens(doc.text);
    std::vector<Fact> facts;

    std::size_t i = 0;
    while (i < tokens.size()) {
        auto it = impl_->matcher.find(tokens[i].norm);
        const Impl::SurfaceEntry* matched = nullptr;
        if (it != impl_->matcher.end()) {
            for (const auto& entry : it->second) {
                if (i + entry.words.size() > tokens.size()) continue;
                bool ok = true;
                for (std::size_t w = 1; w < entry.words.size(); ++w) {
                    // surface forms never span sentence boundaries
                    if (tokens[i + w].norm != entry.words[w] || tokens[i + w - 1].sentence_end) {
                        ok = false;
                        break;
                    }
                }
                if (ok) {
                    matched = &entry;
                    break;  // entries are longest-first
                }
            }
        }
        if (!matched) {
            ++i;
            continue;
        }

        const std::size_t match_end = i + matched->words.size();
        Fact fact;
        fact.concept_id = matched->concept_id;
        fact.polarity = negated_before(tokens, i, config.negation_window) ? Polarity::negated
                                                                          : Polarity::asserted;
        fact.provenance = {doc.doc_id, tokens[i].begin, tokens[match_end - 1].end};
        auto conf_it = config.confidence_overrides.find(fact.concept_id);
        fact.confidence =
            conf_it != config.confidence_overrides.end() ? conf_it->second : config.base_confidence;
        fact.event_date = doc.authored_at;

        std::size_t scan = match_end;
        if (scan < tokens.size()) {
            if (auto tagged = parse_date_tag(tokens[scan].original)) {
                fact.event_date = *tagged;
                ++scan;
            }
        }

        const auto& schema = ontology.concept_info(fact.concept_id).attributes_schema;
        const std::size_t limit = std::min(tokens.size(), scan + config.attribute_window);
        bool boundary = match_end > 0 && tokens[match_end - 1].sentence_end;
        for (std::size_t w = scan; w < limit && !boundary && !schema.empty(); ++w) {
            for (const auto& attr : schema) {
                if (tokens[w].norm != fold_case(attr) || w + 1 >= tokens.size()) continue;
                const std::string& raw = tokens[w + 1].norm;
                if (ontology.is_ordinal_attribute(attr)) {
                    for (const auto& value : ontology.ordinal_scales().at(attr)) {
                        if (fold_case(value) == raw) {
                            fact.attributes[attr] = value;
                            break;
                        }
                    }
                } else if (!tokens[w + 1].core.empty()) {
                    fact.attributes[attr] = tokens[w + 1].core;
                }
            }
            if (tokens[w].sentence_end) boundary = true;
        }

        facts.push_back(std::move(fact));
        i = match_end;
    }
    return facts;
}

std::vector<Fact> extract_facts(const Document& doc, const Ontology& ontology,
                                const ExtractorConfig& config) {
    return FactExtractor(ontology, config).extract(doc);
}

}  // namespace acr
