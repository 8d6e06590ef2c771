#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "convkg/kg.hpp"
#include "convkg/text.hpp"

namespace convkg::kg {

std::optional<std::string> SparqlQuery::violation() const {
    if (patterns.empty()) return "query has no triple patterns";
    std::set<std::string> vars;
    for (const auto& p : patterns) {
        for (const auto* t : {&p.subject, &p.predicate, &p.object}) {
            if (t->is_variable()) {
                if (t->value.empty()) return "empty variable name";
                vars.insert(t->value);
            }
        }
    }
    switch (form) {
        case QueryForm::select:
            if (projection.empty()) return "SELECT needs a non-empty projection";
            break;
        case QueryForm::ask:
            if (!projection.empty()) return "ASK must not project variables";
            break;
        case QueryForm::select_count:
            if (projection.size() != 1) return "COUNT projects exactly one variable";
            break;
    }
    for (const auto& v : projection) {
        if (!vars.count(v)) return "projected variable ?" + v + " does not occur in the patterns";
    }
    for (const auto& f : filters) {
        if (!vars.count(f.variable)) return "filtered variable ?" + f.variable + " does not occur in the patterns";
    }
    for (const auto& v : order_by) {
        if (!vars.count(v)) return "ORDER BY variable ?" + v + " does not occur in the patterns";
    }
    if (limit && *limit == 0) return "LIMIT must be positive";
    return std::nullopt;
}

namespace {

std::string escape_literal(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '"': out += "\\\""; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string to_sparql(const RdfTerm& term) {
    switch (term.kind) {
        case RdfTerm::Kind::iri:
            return "<" + term.value + ">";
        case RdfTerm::Kind::variable:
            return "?" + term.value;
        case RdfTerm::Kind::literal: {
            std::string out = "\"" + escape_literal(term.value) + "\"";
            if (!term.datatype.empty()) out += "^^<" + term.datatype + ">";
            else if (!term.lang.empty()) out += "@" + term.lang;
            return out;
        }
    }
    return {};
}

std::string serialize(const SparqlQuery& q) {
    std::ostringstream out;
    switch (q.form) {
        case QueryForm::ask:
            out << "ASK";
            break;
        case QueryForm::select_count:
            out << "SELECT (COUNT(DISTINCT ?" << q.projection.front() << ") AS ?count)";
            break;
        case QueryForm::select:
            out << "SELECT";
            if (q.distinct) out << " DISTINCT";
            for (const auto& v : q.projection) out << " ?" << v;
            break;
    }
    out << " WHERE {";
    for (const auto& p : q.patterns) {
        out << " " << to_sparql(p.subject) << " " << to_sparql(p.predicate) << " "
            << to_sparql(p.object) << " .";
    }
    for (const auto& f : q.filters) {
        out << " FILTER(CONTAINS(LCASE(STR(?" << f.variable << ")), \"" << escape_literal(f.token)
            << "\"))";
    }
    out << " }";
    if (!q.order_by.empty() && q.form == QueryForm::select) {
        out << " ORDER BY";
        for (const auto& v : q.order_by) out << " ?" << v;
    }
    if (q.limit && q.form == QueryForm::select) out << " LIMIT " << *q.limit;
    return out.str();
}

// --- parser -------------------------------------------------------------------

namespace {

struct Token {
    enum class Kind { word, iri, string, variable, punct, number, end };
    Kind kind = Kind::end;
    std::string text;
    std::string datatype;
    std::string lang;
};

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    Token next() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (pos_ >= s_.size()) return {Token::Kind::end, {}, {}, {}};
        char c = s_[pos_];
        if (c == '<') {
            auto close = s_.find('>', pos_);
            if (close == std::string_view::npos) fail("unterminated IRI");
            Token t{Token::Kind::iri, std::string(s_.substr(pos_ + 1, close - pos_ - 1)), {}, {}};
            pos_ = close + 1;
            return t;
        }
        if (c == '?' || c == '$') {
            auto start = ++pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
                ++pos_;
            }
            if (pos_ == start) fail("empty variable name");
            return {Token::Kind::variable, std::string(s_.substr(start, pos_ - start)), {}, {}};
        }
        if (c == '"') return string_literal();
        if (std::isdigit(static_cast<unsigned char>(c))) {
            auto start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            return {Token::Kind::number, std::string(s_.substr(start, pos_ - start)), {}, {}};
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            auto start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
                ++pos_;
            }
            auto word = std::string(s_.substr(start, pos_ - start));
            std::transform(word.begin(), word.end(), word.begin(),
                           [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
            return {Token::Kind::word, word, {}, {}};
        }
        ++pos_;
        return {Token::Kind::punct, std::string(1, c), {}, {}};
    }

    [[noreturn]] static void fail(const std::string& why) {
        throw KgError(KgError::Kind::unsupported, "SPARQL parse error: " + why);
    }

private:
    Token string_literal() {
        ++pos_;
        std::string lex;
        while (true) {
            if (pos_ >= s_.size()) fail("unterminated string");
            char c = s_[pos_++];
            if (c == '"') break;
            if (c == '\\' && pos_ < s_.size()) {
                char e = s_[pos_++];
                switch (e) {
                    case 'n': lex += '\n'; break;
                    case 'r': lex += '\r'; break;
                    case 't': lex += '\t'; break;
                    default: lex += e;
                }
                continue;
            }
            lex += c;
        }
        Token t{Token::Kind::string, std::move(lex), {}, {}};
        if (s_.substr(pos_, 3) == "^^<") {
            auto close = s_.find('>', pos_ + 3);
            if (close == std::string_view::npos) fail("unterminated datatype IRI");
            t.datatype = std::string(s_.substr(pos_ + 3, close - pos_ - 3));
            pos_ = close + 1;
        } else if (pos_ < s_.size() && s_[pos_] == '@') {
            auto start = ++pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) {
                ++pos_;
            }
            t.lang = std::string(s_.substr(start, pos_ - start));
        }
        return t;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    explicit Parser(std::string_view s) : lex_(s) { advance(); }

    SparqlQuery parse() {
        SparqlQuery q;
        if (is_word("ASK")) {
            advance();
            q.form = QueryForm::ask;
        } else if (is_word("SELECT")) {
            advance();
            select_clause(q);
        } else {
            Lexer::fail("expected SELECT or ASK");
        }
        if (is_word("WHERE")) advance();
        expect_punct("{");
        while (!is_punct("}")) {
            if (is_word("FILTER")) {
                advance();
                q.filters.push_back(contains_filter());
                continue;
            }
            TriplePattern p{term(), term(), term()};
            q.patterns.push_back(std::move(p));
            if (is_punct(".")) advance();
        }
        advance();
        if (is_word("ORDER")) {
            advance();
            expect_word("BY");
            while (cur_.kind == Token::Kind::variable) {
                q.order_by.push_back(cur_.text);
                advance();
            }
        }
        if (is_word("LIMIT")) {
            advance();
            if (cur_.kind != Token::Kind::number) Lexer::fail("LIMIT expects a number");
            q.limit = std::stoull(cur_.text);
            advance();
        }
        if (cur_.kind != Token::Kind::end) Lexer::fail("trailing input after query");
        return q;
    }

private:
    void advance() { cur_ = lex_.next(); }
    bool is_word(std::string_view w) const { return cur_.kind == Token::Kind::word && cur_.text == w; }
    bool is_punct(std::string_view p) const { return cur_.kind == Token::Kind::punct && cur_.text == p; }
    void expect_word(std::string_view w) {
        if (!is_word(w)) Lexer::fail("expected " + std::string(w));
        advance();
    }
    void expect_punct(std::string_view p) {
        if (!is_punct(p)) Lexer::fail("expected '" + std::string(p) + "'");
        advance();
    }
    std::string variable() {
        if (cur_.kind != Token::Kind::variable) Lexer::fail("expected a variable");
        auto v = cur_.text;
        advance();
        return v;
    }

    void select_clause(SparqlQuery& q) {
        if (is_punct("(")) {
            advance();
            expect_word("COUNT");
            expect_punct("(");
            expect_word("DISTINCT");
            q.form = QueryForm::select_count;
            q.projection.push_back(variable());
            expect_punct(")");
            expect_word("AS");
            variable();
            expect_punct(")");
            return;
        }
        q.form = QueryForm::select;
        if (is_word("DISTINCT")) {
            q.distinct = true;
            advance();
        }
        while (cur_.kind == Token::Kind::variable) q.projection.push_back(variable());
    }

    RdfTerm term() {
        RdfTerm t;
        switch (cur_.kind) {
            case Token::Kind::iri: t = RdfTerm::iri(cur_.text); break;
            case Token::Kind::variable: t = RdfTerm::variable(cur_.text); break;
            case Token::Kind::string: t = RdfTerm::literal(cur_.text, cur_.datatype, cur_.lang); break;
            default: Lexer::fail("expected an RDF term, got '" + cur_.text + "'");
        }
        advance();
        return t;
    }

    ContainsFilter contains_filter() {
        expect_punct("(");
        expect_word("CONTAINS");
        expect_punct("(");
        expect_word("LCASE");
        expect_punct("(");
        expect_word("STR");
        expect_punct("(");
        auto v = variable();
        expect_punct(")");
        expect_punct(")");
        expect_punct(",");
        if (cur_.kind != Token::Kind::string) Lexer::fail("CONTAINS expects a string");
        auto token = text::to_lower(cur_.text);
        advance();
        expect_punct(")");
        expect_punct(")");
        return {std::move(v), std::move(token)};
    }

    Lexer lex_;
    Token cur_;
};

}  // namespace

SparqlQuery parse_sparql(std::string_view text) { return Parser(text).parse(); }

}  // namespace convkg::kg
