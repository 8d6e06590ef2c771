#pragma once
// Query planning: expand linked QIR facts into candidate SPARQL queries,
// truncate, let the LLM prune the predicate list, then execute the queries
// that still touch a kept predicate and merge their answers.

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "convkg/kg.hpp"
#include "convkg/llm.hpp"
#include "convkg/model.hpp"

namespace convkg {

struct CandidateQuery {
    kg::SparqlQuery query;
    std::set<std::string> predicate_set;
    std::size_t rank_cost = 0;                      // sum of per-fact option ranks
    std::map<std::size_t, std::string> origin;      // fact index -> predicate IRI
    std::map<std::size_t, EdgeDirection> direction; // fact index -> edge orientation
};

// Orders by rank_cost, then origin lexicographically, then direction.
bool candidate_less(const CandidateQuery& a, const CandidateQuery& b);

struct Generated {
    std::vector<CandidateQuery> candidates;
    std::vector<std::size_t> skipped_facts;  // facts with no predicate option
};

// Cartesian product over each fact's rel_to_pred options, first fact varying
// slowest. Throws PipelineError(selection) "no executable facts" when no fact
// has an option, or when the answer variable only occurs in skipped facts.
Generated generate(const QIR& qir, const LinkingMaps& maps);

// Keeps the query_num best candidates by candidate_less, in input order.
std::vector<CandidateQuery> truncate(std::vector<CandidateQuery> candidates, std::size_t query_num);

struct PredicateIndex {
    std::vector<std::string> all_predicates;                   // first-seen order
    std::map<std::string, std::set<std::size_t>> pred_to_query;
};

PredicateIndex build_index(const std::vector<CandidateQuery>& candidates);

enum class SelectionFailure { malformed_json, empty_selection };

std::string_view to_string(SelectionFailure failure);

using SelectionValidation = std::variant<std::vector<std::string>, SelectionFailure>;

// Accepts {"predicates": [...]}; items name a candidate by full IRI or by its
// unique final segment. Unknown items are dropped. Result follows `all` order.
SelectionValidation validate_predicate_selection(std::string_view raw, const std::vector<std::string>& all);

struct PredicateFilter {
    std::vector<std::string> kept;  // P', in P order
    bool degraded = false;          // retries exhausted, P' = P
    std::size_t attempts = 0;
};

// Throws std::invalid_argument when the index has no predicates.
PredicateFilter filter_predicates(LlmBackend& llm, const PromptSpec& prompt, const std::string& question,
                                  const PredicateIndex& index, std::size_t theta);

// Q' in truncated-list order.
std::vector<std::size_t> select_queries(const PredicateIndex& index, const std::vector<std::string>& kept,
                                        std::size_t candidate_count);

struct PlanOutcome {
    std::vector<Answer> answers;
    std::set<std::string> degraded;
    std::size_t generated = 0;   // |Q| before truncation
    std::size_t truncated = 0;   // |Q| after truncation
    std::size_t executed = 0;    // |Q'|
    std::size_t llm_calls = 0;
    nlohmann::json trace = nlohmann::json::object();
};

// Throws PipelineError(selection) for generation failures and
// PipelineError(execution) when every executed query fails.
PlanOutcome plan_and_execute(LlmBackend& llm, const PromptLibrary& prompts, const std::string& question,
                             const QIR& qir, const LinkingMaps& maps, const EngineConfig& config,
                             kg::KgTarget& target);

// JSON views shared by traces and the service.
nlohmann::json to_json(const Answer& answer);
nlohmann::json to_json(const QIR& qir);
nlohmann::json to_json(const LinkingMaps& maps);

}  // namespace convkg
