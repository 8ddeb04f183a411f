#include <algorithm>
#include <cctype>

#include "acr/error.hpp"
#include "acr/squerl.hpp"

namespace acr {

std::string to_string(Comparator c) {
    switch (c) {
        case Comparator::eq: return "=";
        case Comparator::ne: return "!=";
        case Comparator::ge: return ">=";
        case Comparator::le: return "<=";
    }
    return "=";
}

std::unique_ptr<QueryAst> QueryAst::clone() const {
    auto copy = std::make_unique<QueryAst>();
    copy->kind = kind;
    copy->concept_id = concept_id;
    copy->polarity = polarity;
    copy->filters = filters;
    if (left) copy->left = left->clone();
    if (right) copy->right = right->clone();
    return copy;
}

bool ast_equal(const QueryAst& a, const QueryAst& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == QueryAst::Kind::atom)
        return a.concept_id == b.concept_id && a.polarity == b.polarity && a.filters == b.filters;
    if (a.left && b.left) {
        if (!ast_equal(*a.left, *b.left)) return false;
    } else if (a.left || b.left) {
        return false;
    }
    if (a.right && b.right) return ast_equal(*a.right, *b.right);
    return !a.right && !b.right;
}

namespace {

enum class TokKind { word, lparen, rparen, lbracket, rbracket, comma, op_eq, op_ne, op_ge, op_le, end };

struct Token {
    TokKind kind = TokKind::end;
    std::string text;
    std::size_t offset = 0;
};

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '+' ||
           c == '/' || c == '\'' || c == '.';
}

std::vector<Token> lex(const std::string& text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '(') { tokens.push_back({TokKind::lparen, "(", i++}); continue; }
        if (c == ')') { tokens.push_back({TokKind::rparen, ")", i++}); continue; }
        if (c == '[') { tokens.push_back({TokKind::lbracket, "[", i++}); continue; }
        if (c == ']') { tokens.push_back({TokKind::rbracket, "]", i++}); continue; }
        if (c == ',') { tokens.push_back({TokKind::comma, ",", i++}); continue; }
        if (c == '!' && i + 1 < text.size() && text[i + 1] == '=') {
            tokens.push_back({TokKind::op_ne, "!=", i});
            i += 2;
            continue;
        }
        if (c == '>' && i + 1 < text.size() && text[i + 1] == '=') {
            tokens.push_back({TokKind::op_ge, ">=", i});
            i += 2;
            continue;
        }
        if (c == '<' && i + 1 < text.size() && text[i + 1] == '=') {
            tokens.push_back({TokKind::op_le, "<=", i});
            i += 2;
            continue;
        }
        if (c == '=') { tokens.push_back({TokKind::op_eq, "=", i++}); continue; }
        if (c == '"') {
            const std::size_t start = i++;
            std::string value;
            while (i < text.size() && text[i] != '"') value += text[i++];
            if (i >= text.size()) throw ParseError("unterminated string literal", start);
            ++i;
            tokens.push_back({TokKind::word, value, start});
            continue;
        }
        if (is_word_char(c)) {
            const std::size_t start = i;
            std::string word;
            while (i < text.size() && is_word_char(text[i])) word += text[i++];
            tokens.push_back({TokKind::word, word, start});
            continue;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
    tokens.push_back({TokKind::end, "", text.size()});
    return tokens;
}

bool is_keyword(const std::string& word) {
    return word == "AND" || word == "OR" || word == "NOT" || word == "EXCEPT" ||
           word == "BEFORE" || word == "NEG";
}

struct Parser {
    const std::vector<Token>& tokens;
    const Ontology& ontology;
    std::size_t pos = 0;

    const Token& peek() const { return tokens[pos]; }
    const Token& advance() { return tokens[pos++]; }

    bool at_keyword(const char* kw) const {
        return peek().kind == TokKind::word && peek().text == kw;
    }

    [[noreturn]] void fail(const std::string& expected) const {
        const auto& t = peek();
        const std::string got = t.kind == TokKind::end ? "end of input" : "'" + t.text + "'";
        throw ParseError("expected " + expected + ", got " + got + " at offset " +
                             std::to_string(t.offset),
                         t.offset);
    }

    std::unique_ptr<QueryAst> parse_query() {
        auto ast = parse_expr();
        if (peek().kind != TokKind::end) fail("AND, OR, EXCEPT or end of query");
        return ast;
    }

    // expr := term ("OR" term)*
    std::unique_ptr<QueryAst> parse_expr() {
        auto left = parse_term();
        while (at_keyword("OR")) {
            advance();
            auto node = std::make_unique<QueryAst>();
            node->kind = QueryAst::Kind::or_;
            node->left = std::move(left);
            node->right = parse_term();
            left = std::move(node);
        }
        return left;
    }

    // term := factor (("AND" | "EXCEPT") factor)*
    std::unique_ptr<QueryAst> parse_term() {
        auto left = parse_factor();
        while (at_keyword("AND") || at_keyword("EXCEPT")) {
            const bool is_and = peek().text == "AND";
            advance();
            auto node = std::make_unique<QueryAst>();
            node->kind = is_and ? QueryAst::Kind::and_ : QueryAst::Kind::except;
            node->left = std::move(left);
            node->right = parse_factor();
            left = std::move(node);
        }
        return left;
    }

    // factor := "NOT" factor | "BEFORE" "(" atom "," atom ")" | atom | "(" expr ")"
    std::unique_ptr<QueryAst> parse_factor() {
        if (at_keyword("NOT")) {
            advance();
            auto node = std::make_unique<QueryAst>();
            node->kind = QueryAst::Kind::not_;
            node->left = parse_factor();
            return node;
        }
        if (at_keyword("BEFORE")) {
            advance();
            if (peek().kind != TokKind::lparen) fail("'(' after BEFORE");
            advance();
            auto node = std::make_unique<QueryAst>();
            node->kind = QueryAst::Kind::before;
            node->left = parse_atom();
            if (peek().kind != TokKind::comma) fail("',' between BEFORE operands");
            advance();
            node->right = parse_atom();
            if (peek().kind != TokKind::rparen) fail("')' closing BEFORE");
            advance();
            return node;
        }
        if (peek().kind == TokKind::lparen) {
            advance();
            auto inner = parse_expr();
            if (peek().kind != TokKind::rparen) fail("')'");
            advance();
            return inner;
        }
        return parse_atom();
    }

    // atom := NAME ("[" filter ("," filter)* "]")? | "NEG" NAME
    std::unique_ptr<QueryAst> parse_atom() {
        auto node = std::make_unique<QueryAst>();
        node->kind = QueryAst::Kind::atom;
        if (at_keyword("NEG")) {
            advance();
            node->polarity = Polarity::negated;
            node->concept_id = parse_name();
            return node;
        }
        node->concept_id = parse_name();
        if (peek().kind == TokKind::lbracket) {
            advance();
            node->filters.push_back(parse_filter());
            while (peek().kind == TokKind::comma) {
                advance();
                node->filters.push_back(parse_filter());
            }
            if (peek().kind != TokKind::rbracket) fail("']' closing filters");
            advance();
        }
        return node;
    }

    /// Greedily consumes the longest run of words resolving to one concept_id.
    ConceptId parse_name() {
        if (peek().kind != TokKind::word || is_keyword(peek().text)) fail("a concept_id name");
        const std::size_t start = pos;
        std::size_t best_len = 0;
        ConceptId best;
        std::string joined;
        for (std::size_t take = 0; start + take < tokens.size(); ++take) {
            const auto& t = tokens[start + take];
            if (t.kind != TokKind::word || is_keyword(t.text)) break;
            if (take > 0) joined += ' ';
            joined += t.text;
            if (auto id = ontology.resolve(joined)) {
                best_len = take + 1;
                best = *id;
            }
        }
        if (best_len == 0) {
            std::string message =
                "unknown concept_id '" + tokens[start].text + "' at offset " +
                std::to_string(tokens[start].offset);
            auto near = ontology.nearest_surface_forms(joined.empty() ? tokens[start].text : joined);
            if (!near.empty()) {
                message += "; nearest surface forms:";
                for (const auto& n : near) message += " '" + n + "'";
            }
            throw ParseError(message, tokens[start].offset);
        }
        pos = start + best_len;
        return best;
    }

    // filter := IDENT ("=" | "!=" | ">=" | "<=") VALUE
    AtomFilter parse_filter() {
        if (peek().kind != TokKind::word) fail("a filter attribute name");
        AtomFilter f;
        f.attribute = advance().text;
        switch (peek().kind) {
            case TokKind::op_eq: f.comparator = Comparator::eq; break;
            case TokKind::op_ne: f.comparator = Comparator::ne; break;
            case TokKind::op_ge: f.comparator = Comparator::ge; break;
            case TokKind::op_le: f.comparator = Comparator::le; break;
            default: fail("a comparator (=, !=, >=, <=)");
        }
        advance();
        if (peek().kind != TokKind::word) fail("a filter value");
        f.value = advance().text;
        if ((f.comparator == Comparator::ge || f.comparator == Comparator::le) &&
            !ontology.is_ordinal_attribute(f.attribute))
            throw ParseError("comparator " + to_string(f.comparator) + " requires an ordinal " +
                                 "attribute, but '" + f.attribute + "' has no ordinal scale",
                             peek().offset);
        return f;
    }
};

void print_node(const QueryAst& ast, std::string& out, bool parenthesize) {
    switch (ast.kind) {
        case QueryAst::Kind::atom: {
            if (ast.polarity == Polarity::negated) out += "NEG ";
            out += ast.concept_id;
            if (!ast.filters.empty()) {
                out += '[';
                for (std::size_t i = 0; i < ast.filters.size(); ++i) {
                    if (i) out += ", ";
                    out += ast.filters[i].attribute;
                    out += ' ';
                    out += to_string(ast.filters[i].comparator);
                    out += ' ';
                    out += ast.filters[i].value;
                }
                out += ']';
            }
            return;
        }
        case QueryAst::Kind::not_:
            out += "NOT ";
            print_node(*ast.left, out, true);
            return;
        case QueryAst::Kind::before:
            out += "BEFORE(";
            print_node(*ast.left, out, false);
            out += ", ";
            print_node(*ast.right, out, false);
            out += ')';
            return;
        case QueryAst::Kind::and_:
        case QueryAst::Kind::or_:
        case QueryAst::Kind::except: {
            if (parenthesize) out += '(';
            print_node(*ast.left, out, true);
            out += ast.kind == QueryAst::Kind::and_   ? " AND "
                   : ast.kind == QueryAst::Kind::or_ ? " OR "
                                                     : " EXCEPT ";
            print_node(*ast.right, out, true);
            if (parenthesize) out += ')';
            return;
        }
    }
}

}  // namespace

std::string pretty_print(const QueryAst& ast) {
    std::string out;
    print_node(ast, out, false);
    return out;
}

std::unique_ptr<QueryAst> parse(const std::string& squerl_text, const Ontology& ontology) {
    const auto tokens = lex(squerl_text);
    Parser parser{tokens, ontology};
    return parser.parse_query();
}

}  // namespace acr
