#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "convkg/http.hpp"
#include "convkg/kg.hpp"
#include "convkg/text.hpp"

namespace convkg::kg {

using json = nlohmann::json;

ResultSet parse_results_json(const std::string& body, const SparqlQuery& query) {
    auto doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw KgError(KgError::Kind::malformed, "SPARQL results body is not a JSON object");
    }
    ResultSet out;
    out.form = query.form;
    if (query.form == QueryForm::ask) {
        auto it = doc.find("boolean");
        if (it == doc.end() || !it->is_boolean()) {
            throw KgError(KgError::Kind::malformed, "ASK result has no boolean");
        }
        out.boolean = it->get<bool>();
        return out;
    }

    if (auto head = doc.find("head"); head != doc.end() && head->contains("vars") && (*head)["vars"].is_array()) {
        for (const auto& v : (*head)["vars"]) {
            if (v.is_string()) out.variables.push_back(v.get<std::string>());
        }
    }
    auto results = doc.find("results");
    if (results == doc.end() || !results->is_object() || !results->contains("bindings") ||
        !(*results)["bindings"].is_array()) {
        throw KgError(KgError::Kind::malformed, "SELECT result has no results.bindings array");
    }
    for (const auto& row : (*results)["bindings"]) {
        if (!row.is_object()) throw KgError(KgError::Kind::malformed, "binding row is not an object");
        Binding b;
        for (const auto& [name, cell] : row.items()) {
            if (!cell.is_object() || !cell.contains("type") || !cell.contains("value") ||
                !cell["value"].is_string()) {
                throw KgError(KgError::Kind::malformed, "malformed binding for ?" + name);
            }
            auto type = cell["type"].get<std::string>();
            auto value = cell["value"].get<std::string>();
            if (type == "uri") {
                b.emplace(name, RdfTerm::iri(std::move(value)));
            } else if (type == "literal" || type == "typed-literal") {
                b.emplace(name, RdfTerm::literal(std::move(value), cell.value("datatype", ""),
                                                 cell.value("xml:lang", "")));
            } else if (type == "bnode") {
                b.emplace(name, RdfTerm::iri("_:" + value));
            } else {
                throw KgError(KgError::Kind::malformed, "unknown binding type '" + type + "'");
            }
        }
        out.rows.push_back(std::move(b));
    }

    if (query.form == QueryForm::select_count) {
        out.count = 0;
        if (!out.rows.empty()) {
            const Binding& first = out.rows.front();
            auto it = first.find("count");
            if (it == first.end() && !first.empty()) it = first.begin();
            if (it != first.end()) {
                const auto& v = it->second.value;
                std::uint64_t n = 0;
                auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
                if (ec != std::errc{} || ptr != v.data() + v.size()) {
                    throw KgError(KgError::Kind::malformed, "COUNT result is not an integer: " + v);
                }
                out.count = n;
            }
        }
        out.rows.clear();
        out.variables = {"count"};
    }
    return out;
}

ResultSet HttpSparqlTarget::execute(const SparqlQuery& query) {
    if (auto why = query.violation()) throw KgError(KgError::Kind::unsupported, *why);
    http::Response res;
    try {
        res = http::post(url_, "query=" + http::form_urlencode(serialize(query)),
                         "application/x-www-form-urlencoded",
                         {{"Accept", "application/sparql-results+json"}});
    } catch (const http::TransportError& e) {
        throw KgError(KgError::Kind::transport, e.what());
    } catch (const std::invalid_argument& e) {
        throw KgError(KgError::Kind::precondition, e.what());
    }
    if (res.status != 200) {
        throw KgError(KgError::Kind::rejected, "endpoint rejected query (HTTP " +
                                                   std::to_string(res.status) +
                                                   "): " + res.body.substr(0, 500));
    }
    return parse_results_json(res.body, query);
}

std::vector<VertexHit> keyword_vertex_search(KgTarget& target, const std::vector<std::string>& tokens,
                                             std::size_t limit,
                                             const std::vector<std::string>& label_predicates) {
    std::set<std::string> normalized;
    for (const auto& t : tokens) {
        auto n = text::to_lower(text::trim(t));
        if (!n.empty()) normalized.insert(std::move(n));
    }
    if (normalized.empty()) {
        throw KgError(KgError::Kind::precondition, "keyword search needs at least one non-empty token");
    }
    if (limit == 0) throw KgError(KgError::Kind::precondition, "keyword search limit must be positive");

    std::map<std::string, std::string> best_label;  // vertex -> smallest matching label
    for (const auto& lp : label_predicates) {
        SparqlQuery q;
        q.form = QueryForm::select;
        q.distinct = true;
        q.patterns.push_back({RdfTerm::variable("v"), RdfTerm::iri(lp), RdfTerm::variable("label")});
        for (const auto& t : normalized) q.filters.push_back({"label", t});
        q.projection = {"v", "label"};
        q.order_by = {"label", "v"};
        q.limit = limit;
        for (const auto& row : target.execute(q).rows) {
            auto v = row.find("v");
            auto l = row.find("label");
            if (v == row.end() || l == row.end() || !v->second.is_iri()) continue;
            auto [it, inserted] = best_label.emplace(v->second.value, l->second.value);
            if (!inserted && l->second.value < it->second) it->second = l->second.value;
        }
    }

    std::vector<VertexHit> hits;
    hits.reserve(best_label.size());
    for (auto& [iri, label] : best_label) hits.push_back({iri, label});
    std::sort(hits.begin(), hits.end(), [](const VertexHit& a, const VertexHit& b) {
        return a.label != b.label ? a.label < b.label : a.iri < b.iri;
    });
    if (hits.size() > limit) hits.resize(limit);
    return hits;
}

std::vector<std::string> predicates_between(KgTarget& target, const std::optional<std::string>& source,
                                            const std::optional<std::string>& object,
                                            const std::vector<std::string>& exclude) {
    if (!source && !object) throw KgError(KgError::Kind::precondition, "unlinked relation");
    SparqlQuery q;
    q.form = QueryForm::select;
    q.distinct = true;
    q.patterns.push_back({source ? RdfTerm::iri(*source) : RdfTerm::variable("s"),
                          RdfTerm::variable("p"),
                          object ? RdfTerm::iri(*object) : RdfTerm::variable("o")});
    q.projection = {"p"};
    std::set<std::string> preds;
    for (const auto& row : target.execute(q).rows) {
        auto it = row.find("p");
        if (it == row.end() || !it->second.is_iri()) continue;
        if (std::find(exclude.begin(), exclude.end(), it->second.value) != exclude.end()) continue;
        preds.insert(it->second.value);
    }
    return {preds.begin(), preds.end()};
}

}  // namespace convkg::kg
