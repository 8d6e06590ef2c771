#include "convkg/matching.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "convkg/http.hpp"
#include "convkg/retry.hpp"
#include "convkg/text.hpp"

namespace convkg {

using json = nlohmann::json;

std::uint32_t TrigramEmbedder::bucket(std::string_view trigram) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : trigram) {
        h ^= c;
        h *= 16777619u;
    }
    return h % kDimensions;
}

std::vector<double> TrigramEmbedder::embed(std::string_view input) const {
    std::vector<double> v(kDimensions, 0.0);
    auto padded = " " + text::to_lower(text::trim(input)) + " ";
    if (padded.size() < 3) return v;
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        v[bucket(std::string_view(padded).substr(i, 3))] += 1.0;
    }
    return v;
}

HttpEmbedder::HttpEmbedder(LlmSettings settings) : settings_(std::move(settings)) {}

std::vector<double> HttpEmbedder::embed(std::string_view input) const {
    std::string key(input);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    std::map<std::string, std::string> headers;
    if (const char* k = std::getenv(settings_.api_key_env.c_str()); k && *k) {
        headers["Authorization"] = std::string("Bearer ") + k;
    }
    auto url = settings_.url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    json body = {{"model", settings_.embedding_model}, {"input", key}};
    http::Response res;
    try {
        res = http::post(url + "/embeddings", body.dump(), "application/json", headers);
    } catch (const http::TransportError& e) {
        throw LlmError(e.what(), true, id());
    }
    if (res.status != 200) {
        throw LlmError("embedding endpoint returned HTTP " + std::to_string(res.status),
                       res.status >= 500 || res.status == 429, id());
    }
    auto doc = json::parse(res.body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("data") || !doc["data"].is_array() || doc["data"].empty() ||
        !doc["data"][0].contains("embedding")) {
        throw LlmError("malformed embedding response", false, id());
    }
    auto vec = doc["data"][0]["embedding"].get<std::vector<double>>();
    std::lock_guard lock(mutex_);
    cache_.emplace(std::move(key), vec);
    return vec;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0, na = 0, nb = 0;
    auto n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    for (std::size_t i = n; i < a.size(); ++i) na += a[i] * a[i];
    for (std::size_t i = n; i < b.size(); ++i) nb += b[i] * b[i];
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string predicate_label(std::string_view iri) {
    auto cut = iri.find_last_of("/#");
    auto seg = cut == std::string_view::npos ? iri : iri.substr(cut + 1);
    std::string out;
    for (std::size_t i = 0; i < seg.size(); ++i) {
        char c = seg[i];
        auto u = static_cast<unsigned char>(c);
        if (c == '_' || c == '-' || c == '.') {
            if (!out.empty() && out.back() != ' ') out += ' ';
            continue;
        }
        bool boundary = std::isupper(u) && i > 0 &&
                        (std::islower(static_cast<unsigned char>(seg[i - 1])) ||
                         std::isdigit(static_cast<unsigned char>(seg[i - 1])) ||
                         (i + 1 < seg.size() && std::islower(static_cast<unsigned char>(seg[i + 1])) &&
                          std::isupper(static_cast<unsigned char>(seg[i - 1]))));
        if (boundary && !out.empty() && out.back() != ' ') out += ' ';
        out += static_cast<char>(std::tolower(u));
    }
    return text::trim(out);
}

std::vector<std::string> entity_tokens(std::string_view entity) {
    auto tokens = text::content_tokens(entity);
    if (!tokens.empty()) return tokens;
    // all function words ("The Who"): search with every word
    for (const auto& w : text::split(entity, ' ')) {
        auto t = text::to_lower(text::trim(w));
        if (!t.empty()) tokens.push_back(t);
    }
    return tokens;
}

std::string_view to_string(VertexFailure failure) {
    return failure == VertexFailure::malformed_json ? "malformed_json" : "not_in_candidates";
}

VertexValidation validate_vertex(std::string_view raw, const std::vector<kg::VertexHit>& candidates) {
    auto obj = find_json_object(raw);
    if (!obj) return VertexFailure::malformed_json;
    auto it = obj->find("label");
    if (it == obj->end() || !it->is_string()) return VertexFailure::malformed_json;
    auto label = text::trim(it->get<std::string>());
    for (const auto& c : candidates) {
        if (c.label == label) return c.iri;
    }
    return VertexFailure::not_in_candidates;
}

std::string select_vertex(LlmBackend& llm, const PromptSpec& prompt, const std::string& entity,
                          const std::vector<kg::VertexHit>& candidates, std::size_t theta,
                          std::size_t* attempts) {
    if (candidates.empty()) {
        throw PipelineError(Stage::linking, "no candidate vertices for entity '" + entity + "'");
    }
    std::string listing;
    std::set<std::string> shown;
    for (const auto& c : candidates) {
        if (shown.insert(c.label).second) listing += c.label + "\n";
    }
    LlmRequest req{prompt, entity, {{"entity", entity}, {"candidates", listing}}};

    Attempted<std::string> result;
    try {
        result = retry_bounded<std::string>(theta, [&](std::string& why) -> std::optional<std::string> {
            auto checked = validate_vertex(llm.complete(req).raw_text, candidates);
            if (auto* f = std::get_if<VertexFailure>(&checked)) {
                why = std::string(to_string(*f));
                return std::nullopt;
            }
            return std::get<std::string>(checked);
        });
    } catch (const LlmError& e) {
        throw PipelineError(Stage::linking, "vertex selection failed for '" + entity + "': " + e.what());
    }
    if (attempts) *attempts = result.attempts;
    if (!result.value) {
        throw PipelineError(Stage::linking, "vertex selection failed for '" + entity + "' after " +
                                                std::to_string(result.attempts) +
                                                " attempts: " + result.last_failure);
    }
    return *result.value;
}

RelationLinks link_relation(const QirTriple& fact, const std::map<std::string, std::string>& ent_to_vertex,
                            const Embedder& embedder, kg::KgTarget& target,
                            const std::vector<std::string>& label_predicates, std::size_t predicate_cap) {
    auto vertex_of = [&](const QirTerm& t) -> std::optional<std::string> {
        if (t.is_variable()) return std::nullopt;
        auto it = ent_to_vertex.find(t.text);
        if (it == ent_to_vertex.end()) return std::nullopt;
        return it->second;
    };
    auto s = vertex_of(fact.subject);
    auto o = vertex_of(fact.object);
    RelationLinks out;
    if (!s && !o) {
        out.degraded = true;
        return out;
    }

    auto rel_vec = embedder.embed(fact.relation);
    auto score = [&](const std::string& iri) { return cosine(rel_vec, embedder.embed(predicate_label(iri))); };
    for (const auto& p : kg::predicates_between(target, s, o, label_predicates)) {
        out.predicates.push_back({p, score(p), EdgeDirection::forward});
    }
    for (const auto& p : kg::predicates_between(target, o, s, label_predicates)) {
        out.predicates.push_back({p, score(p), EdgeDirection::reverse});
    }
    std::sort(out.predicates.begin(), out.predicates.end(),
              [](const ScoredPredicate& a, const ScoredPredicate& b) {
                  if (a.score != b.score) return a.score > b.score;
                  if (a.iri != b.iri) return a.iri < b.iri;
                  return a.direction < b.direction;
              });
    if (predicate_cap > 0 && out.predicates.size() > predicate_cap) out.predicates.resize(predicate_cap);
    return out;
}

LinkResult link(const QIR& qir, LlmBackend& llm, const PromptLibrary& prompts, const Embedder& embedder,
                kg::KgTarget& target, const EngineConfig& config) {
    LinkResult out;
    const auto& spec = prompts.get(task::select_vertex);
    for (const auto& entity : qir.entities) {
        std::vector<kg::VertexHit> hits;
        try {
            hits = kg::keyword_vertex_search(target, entity_tokens(entity), config.vertex_limit,
                                             config.label_predicates);
        } catch (const kg::KgError& e) {
            throw PipelineError(Stage::linking, "entity retrieval failed for '" + entity + "': " + e.what());
        }
        ++out.keyword_searches;
        std::size_t n = 0;
        try {
            out.maps.ent_to_vertex[entity] = select_vertex(llm, spec, entity, hits, config.theta, &n);
        } catch (...) {
            out.llm_calls += n;
            throw;
        }
        out.llm_calls += n;
        out.candidates[entity] = std::move(hits);
    }

    for (const auto& fact : qir.facts) {
        RelationLinks links;
        try {
            links = link_relation(fact, out.maps.ent_to_vertex, embedder, target, config.label_predicates,
                                  config.predicate_candidate_cap);
        } catch (const kg::KgError& e) {
            throw PipelineError(Stage::linking, "relation linking failed for '" + fact.relation + "': " + e.what());
        } catch (const LlmError& e) {
            throw PipelineError(Stage::linking, "relation embedding failed for '" + fact.relation + "': " + e.what());
        }
        if (links.degraded) out.degraded.insert("unlinked_relation");
        auto& merged = out.maps.rel_to_pred[fact.relation];
        for (auto& p : links.predicates) {
            if (std::find(merged.begin(), merged.end(), p) == merged.end()) merged.push_back(std::move(p));
        }
        std::stable_sort(merged.begin(), merged.end(), [](const ScoredPredicate& a, const ScoredPredicate& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.iri != b.iri) return a.iri < b.iri;
            return a.direction < b.direction;
        });
    }
    return out;
}

}  // namespace convkg
