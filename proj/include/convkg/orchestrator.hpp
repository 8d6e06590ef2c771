#pragma once
// Turn controller. Agents are nodes of an explicit route graph; each node
// updates SessionState and sets `route` to the next node.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convkg/kg.hpp"
#include "convkg/llm.hpp"
#include "convkg/matching.hpp"
#include "convkg/model.hpp"

namespace convkg {

struct RouteEdge {
    Route from;
    Route to;
    const char* when;
};

// The complete edge set. Any transition outside it is a bug.
const std::vector<RouteEdge>& route_edges();
bool route_allowed(Route from, Route to);

// Upper bound on node visits per turn; every node runs at most once except
// chat_agent (three visits) and qir_agent/query_agent (two visits each).
inline constexpr std::size_t kMaxRouteSteps = 12;

struct TurnResult {
    std::vector<Answer> answers;
    std::optional<std::string> final_text;  // only with reformulation enabled
    std::set<std::string> degraded_flags;
    std::optional<std::string> trace_ref;   // trace file path when trace_dir is set
    std::optional<Stage> error_stage;
    std::string error_message;

    std::string question;                   // as processed (after translation)
    std::string standalone_question;
    std::vector<Route> route_log;
    std::size_t llm_calls = 0;
    std::size_t executed_queries = 0;
    std::size_t candidate_queries = 0;      // after truncation
    std::map<std::string, double> stage_seconds;  // understanding, linking, execution
    nlohmann::json trace = nlohmann::json::object();

    bool ok() const { return !error_stage.has_value(); }
};

nlohmann::json to_json(const TurnResult& result);

// Empty answers yield a fixed not-found sentence without an LLM call.
// LLM failure yields the joined answers and sets *degraded.
std::string reformulate_answer(LlmBackend& llm, const PromptSpec& prompt, const std::vector<Answer>& answers,
                               const std::string& question, bool* degraded = nullptr);

inline constexpr const char* kNotFoundSentence = "The answer was not found in the knowledge graph.";

// Throws std::invalid_argument on an empty question before any LLM call.
// LLM failure returns the original text and sets *degraded.
std::string translate_question(LlmBackend& llm, const PromptSpec& prompt, const std::string& question,
                               bool* degraded = nullptr);

class Engine {
public:
    Engine(EngineConfig config, std::shared_ptr<LlmBackend> llm, std::shared_ptr<kg::KgTarget> target,
           std::shared_ptr<const Embedder> embedder, PromptLibrary prompts);

    // Builds backend, target, embedder and prompts from the config:
    // llm.script_file selects the scripted backend, store_file the embedded
    // store (else endpoint_url), embedding_model the HTTP embedder.
    static std::shared_ptr<Engine> from_config(const EngineConfig& config);

    const EngineConfig& config() const { return config_; }
    LlmBackend& llm() const { return *llm_; }
    kg::KgTarget& target() const { return *target_; }
    const PromptLibrary& prompts() const { return prompts_; }

    // Runs one turn and always appends it to state.dialogue.
    TurnResult process_turn(SessionState& state, const std::string& question) const;
    TurnResult process_turn(SessionState& state, const std::string& question, const EngineConfig& config) const;

private:
    EngineConfig config_;
    std::shared_ptr<LlmBackend> llm_;
    std::shared_ptr<kg::KgTarget> target_;
    std::shared_ptr<const Embedder> embedder_;
    PromptLibrary prompts_;
};

}  // namespace convkg
