#include <algorithm>
#include <fstream>
#include <functional>
#include <set>

#include "convkg/kg.hpp"
#include "convkg/text.hpp"

namespace convkg::kg {

RdfTerm RdfTerm::variable(std::string name) {
    if (!name.empty() && (name.front() == '?' || name.front() == '$')) name.erase(0, 1);
    return {Kind::variable, std::move(name), {}, {}};
}

std::size_t RdfTermHash::operator()(const RdfTerm& t) const {
    std::size_t h = std::hash<std::string>{}(t.value);
    auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
    mix(static_cast<std::size_t>(t.kind));
    if (!t.datatype.empty()) mix(std::hash<std::string>{}(t.datatype));
    if (!t.lang.empty()) mix(std::hash<std::string>{}(t.lang));
    return h;
}

TripleStore::TripleStore(std::vector<std::string> label_predicates)
    : label_predicates_(std::move(label_predicates)) {}

bool TripleStore::add(Triple triple) {
    auto it = by_subject_.find(triple.subject);
    if (it != by_subject_.end()) {
        for (auto idx : it->second) {
            if (triples_[idx] == triple) return false;
        }
    }
    auto idx = triples_.size();
    by_subject_[triple.subject].push_back(idx);
    by_predicate_[triple.predicate].push_back(idx);
    by_object_[triple.object].push_back(idx);
    if (triple.object.is_literal() &&
        std::find(label_predicates_.begin(), label_predicates_.end(), triple.predicate.value) !=
            label_predicates_.end()) {
        label_index_[triple.subject.value].push_back(triple.object.value);
    }
    triples_.push_back(std::move(triple));
    return true;
}

const std::vector<std::string>& TripleStore::labels_of(const std::string& subject) const {
    static const std::vector<std::string> kNone;
    auto it = label_index_.find(subject);
    return it == label_index_.end() ? kNone : it->second;
}

// --- N-Triples ---------------------------------------------------------------

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

class LineParser {
public:
    LineParser(std::string_view line, std::size_t lineno) : s_(line), lineno_(lineno) {}

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
    }
    bool at_end() {
        skip_ws();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }

    RdfTerm term(bool allow_literal) {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of line");
        char c = s_[pos_];
        if (c == '<') return RdfTerm::iri(iri());
        if (c == '_' && pos_ + 1 < s_.size() && s_[pos_ + 1] == ':') {
            auto start = pos_;
            while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\t') ++pos_;
            return RdfTerm::iri(std::string(s_.substr(start, pos_ - start)));
        }
        if (c == '"' && allow_literal) return literal();
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    void expect_dot() {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '.') fail("expected '.'");
        ++pos_;
        if (!at_end()) fail("trailing characters after '.'");
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw KgError(KgError::Kind::malformed,
                      "N-Triples line " + std::to_string(lineno_) + ": " + why);
    }

    std::string iri() {
        ++pos_;
        auto close = s_.find('>', pos_);
        if (close == std::string_view::npos) fail("unterminated IRI");
        std::string out(s_.substr(pos_, close - pos_));
        pos_ = close + 1;
        return out;
    }

    std::uint32_t hex(std::size_t n) {
        if (pos_ + n > s_.size()) fail("truncated escape");
        std::uint32_t v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            char h = s_[pos_++];
            v <<= 4;
            if (h >= '0' && h <= '9') v |= static_cast<std::uint32_t>(h - '0');
            else if (h >= 'a' && h <= 'f') v |= static_cast<std::uint32_t>(h - 'a' + 10);
            else if (h >= 'A' && h <= 'F') v |= static_cast<std::uint32_t>(h - 'A' + 10);
            else fail("bad hex digit in escape");
        }
        return v;
    }

    RdfTerm literal() {
        ++pos_;
        std::string lex;
        while (true) {
            if (pos_ >= s_.size()) fail("unterminated literal");
            char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                lex += c;
                continue;
            }
            if (pos_ >= s_.size()) fail("dangling escape");
            char e = s_[pos_++];
            switch (e) {
                case 't': lex += '\t'; break;
                case 'n': lex += '\n'; break;
                case 'r': lex += '\r'; break;
                case 'b': lex += '\b'; break;
                case 'f': lex += '\f'; break;
                case '"': lex += '"'; break;
                case '\'': lex += '\''; break;
                case '\\': lex += '\\'; break;
                case 'u': append_utf8(lex, hex(4)); break;
                case 'U': append_utf8(lex, hex(8)); break;
                default: fail("unknown escape");
            }
        }
        if (s_.substr(pos_, 2) == "^^") {
            pos_ += 2;
            if (pos_ >= s_.size() || s_[pos_] != '<') fail("datatype must be an IRI");
            return RdfTerm::literal(std::move(lex), iri());
        }
        if (pos_ < s_.size() && s_[pos_] == '@') {
            auto start = ++pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) {
                ++pos_;
            }
            return RdfTerm::literal(std::move(lex), {}, std::string(s_.substr(start, pos_ - start)));
        }
        return RdfTerm::literal(std::move(lex));
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t lineno_;
};

}  // namespace

void TripleStore::load_ntriples(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        LineParser p(line, lineno);
        if (p.at_end()) continue;
        auto s = p.term(false);
        auto pr = p.term(false);
        auto o = p.term(true);
        p.expect_dot();
        add({std::move(s), std::move(pr), std::move(o)});
    }
}

TripleStore TripleStore::from_file(const std::string& path, std::vector<std::string> label_predicates) {
    std::ifstream in(path);
    if (!in) throw KgError(KgError::Kind::precondition, "cannot open N-Triples file " + path);
    if (label_predicates.empty()) label_predicates.emplace_back("http://www.w3.org/2000/01/rdf-schema#label");
    TripleStore store(std::move(label_predicates));
    store.load_ntriples(in);
    return store;
}

// --- evaluation --------------------------------------------------------------

namespace {

const RdfTerm* resolve(const RdfTerm& t, const Binding& b) {
    if (!t.is_variable()) return &t;
    auto it = b.find(t.value);
    return it == b.end() ? nullptr : &it->second;
}

bool unify(const RdfTerm& pattern, const RdfTerm& value, Binding& b) {
    if (!pattern.is_variable()) return pattern == value;
    auto [it, inserted] = b.emplace(pattern.value, value);
    return inserted || it->second == value;
}

bool passes(const ContainsFilter& f, const Binding& b) {
    auto it = b.find(f.variable);
    if (it == b.end()) return false;
    return text::to_lower(it->second.value).find(f.token) != std::string::npos;
}

}  // namespace

ResultSet TripleStore::evaluate(const SparqlQuery& query) const {
    if (auto why = query.violation()) throw KgError(KgError::Kind::unsupported, *why);

    std::vector<Binding> solutions(1);
    std::vector<bool> used(query.patterns.size(), false);
    std::set<std::string> bound;

    for (std::size_t step = 0; step < query.patterns.size() && !solutions.empty(); ++step) {
        // most constrained pattern first
        std::size_t best = 0;
        int best_score = -1;
        for (std::size_t i = 0; i < query.patterns.size(); ++i) {
            if (used[i]) continue;
            const auto& p = query.patterns[i];
            int score = 0;
            for (const auto* t : {&p.subject, &p.predicate, &p.object}) {
                if (!t->is_variable() || bound.count(t->value)) ++score;
            }
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        used[best] = true;
        const auto& pat = query.patterns[best];

        std::vector<Binding> next;
        for (const auto& sol : solutions) {
            const RdfTerm* s = resolve(pat.subject, sol);
            const RdfTerm* p = resolve(pat.predicate, sol);
            const RdfTerm* o = resolve(pat.object, sol);

            const std::vector<std::size_t>* candidates = nullptr;
            auto narrow = [&](const RdfTerm* term, const auto& index) {
                if (!term) return;
                auto it = index.find(*term);
                static const std::vector<std::size_t> kEmpty;
                const auto* list = it == index.end() ? &kEmpty : &it->second;
                if (!candidates || list->size() < candidates->size()) candidates = list;
            };
            narrow(s, by_subject_);
            narrow(p, by_predicate_);
            narrow(o, by_object_);

            auto try_triple = [&](const Triple& t) {
                Binding b = sol;
                if (unify(pat.subject, t.subject, b) && unify(pat.predicate, t.predicate, b) &&
                    unify(pat.object, t.object, b)) {
                    next.push_back(std::move(b));
                }
            };
            if (candidates) {
                for (auto idx : *candidates) try_triple(triples_[idx]);
            } else {
                for (const auto& t : triples_) try_triple(t);
            }
        }
        solutions = std::move(next);
        for (const auto* t : {&pat.subject, &pat.predicate, &pat.object}) {
            if (t->is_variable()) bound.insert(t->value);
        }
    }

    std::erase_if(solutions, [&](const Binding& b) {
        return !std::all_of(query.filters.begin(), query.filters.end(),
                            [&](const ContainsFilter& f) { return passes(f, b); });
    });

    ResultSet out;
    out.form = query.form;
    switch (query.form) {
        case QueryForm::ask:
            out.boolean = !solutions.empty();
            return out;
        case QueryForm::select_count: {
            std::set<RdfTerm> distinct;
            for (const auto& b : solutions) {
                if (auto it = b.find(query.projection.front()); it != b.end()) distinct.insert(it->second);
            }
            out.count = distinct.size();
            out.variables = {"count"};
            return out;
        }
        case QueryForm::select:
            break;
    }

    out.variables = query.projection;
    for (auto& sol : solutions) {
        Binding row;
        for (const auto& v : query.projection) {
            if (auto it = sol.find(v); it != sol.end()) row.emplace(v, it->second);
        }
        out.rows.push_back(std::move(row));
    }
    if (query.distinct) {
        std::set<Binding> seen;
        std::erase_if(out.rows, [&](const Binding& r) { return !seen.insert(r).second; });
    }
    if (!query.order_by.empty()) {
        std::stable_sort(out.rows.begin(), out.rows.end(), [&](const Binding& a, const Binding& b) {
            for (const auto& v : query.order_by) {
                auto ia = a.find(v);
                auto ib = b.find(v);
                std::string_view va = ia == a.end() ? std::string_view{} : std::string_view(ia->second.value);
                std::string_view vb = ib == b.end() ? std::string_view{} : std::string_view(ib->second.value);
                if (va != vb) return va < vb;
            }
            return false;
        });
    }
    if (query.limit && out.rows.size() > *query.limit) out.rows.resize(*query.limit);
    return out;
}

ResultSet EmbeddedTarget::execute(const SparqlQuery& query) { return store_->evaluate(query); }

std::optional<std::string> EmbeddedTarget::label_of(const std::string& iri) const {
    const auto& labels = store_->labels_of(iri);
    if (labels.empty()) return std::nullopt;
    return labels.front();
}

}  // namespace convkg::kg
