#pragma once
// Knowledge-graph access: RDF terms, the SPARQL subset the planner emits,
// an embedded in-memory triple store, and a SPARQL 1.1 protocol client.
//
// Supported query shape:
//   SELECT [DISTINCT] ?v... | SELECT (COUNT(DISTINCT ?v) AS ?count) | ASK
//   WHERE { s p o . ... FILTER(CONTAINS(LCASE(STR(?v)), "token")) ... }
//   [ORDER BY ?v...] [LIMIT n]

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace convkg::kg {

class KgError : public std::runtime_error {
public:
    enum class Kind { transport, rejected, malformed, unsupported, precondition };
    KgError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct RdfTerm {
    enum class Kind { iri, literal, variable };
    Kind kind = Kind::iri;
    std::string value;     // IRI text, lexical form, or variable name without '?'
    std::string datatype;  // literals only; empty for plain strings
    std::string lang;      // literals only

    static RdfTerm iri(std::string v) { return {Kind::iri, std::move(v), {}, {}}; }
    static RdfTerm literal(std::string lex, std::string dt = {}, std::string lang = {}) {
        return {Kind::literal, std::move(lex), std::move(dt), std::move(lang)};
    }
    static RdfTerm variable(std::string name);  // accepts "?x" or "x"

    bool is_iri() const { return kind == Kind::iri; }
    bool is_literal() const { return kind == Kind::literal; }
    bool is_variable() const { return kind == Kind::variable; }

    bool operator==(const RdfTerm&) const = default;
    auto operator<=>(const RdfTerm&) const = default;
};

struct RdfTermHash {
    std::size_t operator()(const RdfTerm& t) const;
};

std::string to_sparql(const RdfTerm& term);

struct Triple {
    RdfTerm subject;
    RdfTerm predicate;
    RdfTerm object;

    bool operator==(const Triple&) const = default;
    auto operator<=>(const Triple&) const = default;
};

using TriplePattern = Triple;

// Case-insensitive CONTAINS(LCASE(STR(?variable)), token).
struct ContainsFilter {
    std::string variable;  // without '?'
    std::string token;     // stored lowercased

    bool operator==(const ContainsFilter&) const = default;
};

enum class QueryForm { select, ask, select_count };

struct SparqlQuery {
    QueryForm form = QueryForm::select;
    std::vector<TriplePattern> patterns;
    std::vector<ContainsFilter> filters;
    std::vector<std::string> projection;  // variable names without '?'
    bool distinct = false;
    std::vector<std::string> order_by;    // ascending, by string value
    std::optional<std::size_t> limit;

    // SELECT needs a projection, ASK none, COUNT exactly one; every projected
    // variable must occur in the patterns.
    std::optional<std::string> violation() const;
};

std::string serialize(const SparqlQuery& query);

// Parses the subset above. Throws KgError(unsupported) otherwise.
SparqlQuery parse_sparql(std::string_view text);

using Binding = std::map<std::string, RdfTerm>;

struct ResultSet {
    QueryForm form = QueryForm::select;
    std::vector<std::string> variables;
    std::vector<Binding> rows;
    bool boolean = false;
    std::uint64_t count = 0;
};

// ---------------------------------------------------------------------------

class TripleStore {
public:
    TripleStore() = default;
    explicit TripleStore(std::vector<std::string> label_predicates);

    // Returns false when the triple was already present.
    bool add(Triple triple);

    // N-Triples: one `<s> <p> <o> .` or `<s> <p> "lex"[^^<dt>|@lang] .` per line.
    // Throws KgError(malformed) with the line number.
    void load_ntriples(std::istream& in);
    static TripleStore from_file(const std::string& path,
                                 std::vector<std::string> label_predicates = {});

    const std::vector<Triple>& triples() const { return triples_; }
    std::size_t size() const { return triples_.size(); }
    const std::vector<std::string>& labels_of(const std::string& subject) const;
    const std::vector<std::string>& label_predicates() const { return label_predicates_; }

    ResultSet evaluate(const SparqlQuery& query) const;

private:
    std::vector<std::string> label_predicates_;
    std::vector<Triple> triples_;
    std::unordered_map<RdfTerm, std::vector<std::size_t>, RdfTermHash> by_subject_;
    std::unordered_map<RdfTerm, std::vector<std::size_t>, RdfTermHash> by_predicate_;
    std::unordered_map<RdfTerm, std::vector<std::size_t>, RdfTermHash> by_object_;
    std::unordered_map<std::string, std::vector<std::string>> label_index_;
};

// Something queries can be sent to.
class KgTarget {
public:
    virtual ~KgTarget() = default;
    virtual ResultSet execute(const SparqlQuery& query) = 0;
    virtual std::string describe() const = 0;
    // Display label when known without a query; remote targets return nullopt.
    virtual std::optional<std::string> label_of(const std::string&) const { return std::nullopt; }
};

class EmbeddedTarget : public KgTarget {
public:
    explicit EmbeddedTarget(std::shared_ptr<const TripleStore> store) : store_(std::move(store)) {}
    ResultSet execute(const SparqlQuery& query) override;
    std::string describe() const override { return "embedded store"; }
    std::optional<std::string> label_of(const std::string& iri) const override;
    const TripleStore& store() const { return *store_; }

private:
    std::shared_ptr<const TripleStore> store_;
};

// SPARQL 1.1 protocol: form-encoded POST `query`,
// Accept: application/sparql-results+json.
class HttpSparqlTarget : public KgTarget {
public:
    explicit HttpSparqlTarget(std::string endpoint_url) : url_(std::move(endpoint_url)) {}
    ResultSet execute(const SparqlQuery& query) override;
    std::string describe() const override { return url_; }

private:
    std::string url_;
};

// Parses a SPARQL JSON results document for `query`. Throws KgError(malformed).
ResultSet parse_results_json(const std::string& body, const SparqlQuery& query);

// ---------------------------------------------------------------------------

struct VertexHit {
    std::string iri;
    std::string label;

    bool operator==(const VertexHit&) const = default;
};

// Vertices whose label contains every token (case-insensitive), ordered by
// label then IRI, capped at `limit`. Throws KgError(precondition) when no
// non-empty token is given.
std::vector<VertexHit> keyword_vertex_search(KgTarget& target, const std::vector<std::string>& tokens,
                                             std::size_t limit,
                                             const std::vector<std::string>& label_predicates);

// Distinct predicates on edges source -> object; an unbound side is a wildcard.
// Predicates listed in `exclude` are dropped. Sorted by IRI.
// Throws KgError(precondition) "unlinked relation" when both sides are unbound.
std::vector<std::string> predicates_between(KgTarget& target, const std::optional<std::string>& source,
                                            const std::optional<std::string>& object,
                                            const std::vector<std::string>& exclude = {});

}  // namespace convkg::kg
