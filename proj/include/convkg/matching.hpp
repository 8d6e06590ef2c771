#pragma once
// Entity and relation linking.
//
// Entities are grounded to exactly one KG vertex chosen by the LLM from a
// keyword-retrieved candidate list; relations map to every predicate that
// connects the linked endpoints, ranked by embedding similarity.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "convkg/kg.hpp"
#include "convkg/llm.hpp"
#include "convkg/model.hpp"

namespace convkg {

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(std::string_view text) const = 0;
    virtual std::string id() const = 0;
};

// Offline fallback: hashed character-trigram term frequencies of the
// lowercased text padded with one space on each side.
class TrigramEmbedder : public Embedder {
public:
    static constexpr std::size_t kDimensions = 4096;

    std::vector<double> embed(std::string_view text) const override;
    std::string id() const override { return "trigram-4096"; }

    static std::uint32_t bucket(std::string_view trigram);  // FNV-1a 32 mod kDimensions
};

// OpenAI-compatible /embeddings endpoint with an in-process cache.
class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(LlmSettings settings);
    std::vector<double> embed(std::string_view text) const override;
    std::string id() const override { return "http:" + settings_.embedding_model; }

private:
    LlmSettings settings_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

// 0 when either vector is all zeros.
double cosine(std::span<const double> a, std::span<const double> b);

// Final IRI segment, camelCase and '_'/'-' split, lowercased: foundedBy -> "founded by".
std::string predicate_label(std::string_view iri);

// Keyword tokens for an entity phrase; keeps every content word.
std::vector<std::string> entity_tokens(std::string_view entity);

// --- vertex selection ------------------------------------------------------------

enum class VertexFailure { malformed_json, not_in_candidates };

std::string_view to_string(VertexFailure failure);

using VertexValidation = std::variant<std::string, VertexFailure>;

// Accepts iff the reply holds a JSON object whose "label" names a candidate
// label. Returns the candidate's IRI (first in list order on duplicate labels).
VertexValidation validate_vertex(std::string_view raw, const std::vector<kg::VertexHit>& candidates);

// One LLM round: the model sees labels only. Retries up to theta on invalid
// replies, re-presenting the same list. Throws PipelineError(linking).
std::string select_vertex(LlmBackend& llm, const PromptSpec& prompt, const std::string& entity,
                          const std::vector<kg::VertexHit>& candidates, std::size_t theta,
                          std::size_t* attempts = nullptr);

// --- relation linking ------------------------------------------------------------

struct RelationLinks {
    std::vector<ScoredPredicate> predicates;  // descending score, ties by IRI then direction
    bool degraded = false;                    // both endpoints unbound
};

RelationLinks link_relation(const QirTriple& fact, const std::map<std::string, std::string>& ent_to_vertex,
                            const Embedder& embedder, kg::KgTarget& target,
                            const std::vector<std::string>& label_predicates,
                            std::size_t predicate_cap = 0);

struct LinkResult {
    LinkingMaps maps;
    std::map<std::string, std::vector<kg::VertexHit>> candidates;  // per entity
    std::set<std::string> degraded;
    std::size_t llm_calls = 0;
    std::size_t keyword_searches = 0;
};

// Entities first, then relations. Throws PipelineError(linking) naming the
// entity that could not be grounded.
LinkResult link(const QIR& qir, LlmBackend& llm, const PromptLibrary& prompts, const Embedder& embedder,
                kg::KgTarget& target, const EngineConfig& config);

}  // namespace convkg
