#pragma once
// LLM gateway: prompt specs, the backend interface, a live OpenAI-compatible
// backend and a deterministic scripted backend for offline runs.
//
// The gateway never interprets model output. Callers validate raw_text and
// own the retry policy.

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "convkg/model.hpp"

namespace convkg {

enum class PromptStrategy { zero_shot, few_shot, chain_of_thought_few_shot };
enum class OutputContract { label, free_text, json_object };

struct FewShotExample {
    std::string input;
    std::string output;
};

struct PromptSpec {
    std::string name;         // task id, e.g. "classify"
    std::string instruction;  // template with {question}/{context}/{candidates}/{predicates}
    PromptStrategy strategy = PromptStrategy::zero_shot;
    std::vector<FewShotExample> examples;
    OutputContract contract = OutputContract::free_text;

    std::optional<std::string> violation() const;
};

using PromptVars = std::map<std::string, std::string>;

struct LlmRequest {
    PromptSpec prompt;
    std::string payload;  // the task's primary input (question, entity, ...)
    PromptVars vars;      // placeholder values for the instruction

    std::string rendered_instruction() const;
};

struct LlmResponse {
    std::string raw_text;
    std::string backend_id;
};

class LlmError : public std::runtime_error {
public:
    LlmError(const std::string& message, bool retriable, std::string backend_id)
        : std::runtime_error(message), retriable_(retriable), backend_id_(std::move(backend_id)) {}
    bool retriable() const { return retriable_; }
    const std::string& backend_id() const { return backend_id_; }

private:
    bool retriable_;
    std::string backend_id_;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string id() const = 0;
    // Returns the model output verbatim; never retries. Throws LlmError.
    virtual LlmResponse complete(const LlmRequest& request) = 0;
};

// Forwards to another backend and counts every request, including failed ones.
class CountingBackend : public LlmBackend {
public:
    explicit CountingBackend(LlmBackend& inner) : inner_(inner) {}
    std::string id() const override { return inner_.id(); }
    LlmResponse complete(const LlmRequest& request) override {
        ++calls_;
        return inner_.complete(request);
    }
    std::size_t calls() const { return calls_; }

private:
    LlmBackend& inner_;
    std::size_t calls_ = 0;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

// System message carries the rendered instruction; few-shot examples follow
// as user/assistant exchanges; the payload is the final user message.
std::vector<ChatMessage> assemble_messages(const LlmRequest& request);

// OpenAI-compatible chat-completion backend.
class HttpChatBackend : public LlmBackend {
public:
    explicit HttpChatBackend(LlmSettings settings);
    std::string id() const override;
    LlmResponse complete(const LlmRequest& request) override;

    nlohmann::json request_body(const LlmRequest& request) const;

private:
    LlmSettings settings_;
};

// --- scripted backend ------------------------------------------------------

struct ScriptMatcher {
    std::string task;                    // empty: any task
    std::string field;                   // empty: the payload, else a prompt variable
    std::vector<std::string> contains;   // case-insensitive, all must occur
    std::optional<std::string> equals;   // exact match after trimming

    bool matches(const LlmRequest& request) const;
};

struct ScriptRule {
    ScriptMatcher matcher;
    std::string output;
    std::size_t fail_first = 0;            // failing calls before `output` is served
    std::optional<std::string> fail_output;  // served while failing; else a transport error
};

class ScriptedBackend : public LlmBackend {
public:
    // Throws std::invalid_argument for an empty rule list.
    explicit ScriptedBackend(std::vector<ScriptRule> rules, std::string id = "scripted");

    // Rule file: JSON array of {task, field, contains, equals, output, fail_first, fail_output}.
    static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& rules,
                                                      std::string id = "scripted");
    static std::unique_ptr<ScriptedBackend> from_file(const std::string& path);

    std::string id() const override { return id_; }
    LlmResponse complete(const LlmRequest& request) override;

    std::size_t calls() const;
    std::size_t calls_for(std::string_view task) const;
    std::vector<std::string> call_log() const;  // task names, in call order
    void reset();                                // clears counters and the log

private:
    std::vector<ScriptRule> rules_;
    std::unique_ptr<std::atomic<std::size_t>[]> hits_;
    std::string id_;
    mutable std::mutex log_mutex_;
    std::vector<std::string> log_;
};

// --- prompt library ----------------------------------------------------------

namespace task {
inline constexpr std::string_view classify = "classify";
inline constexpr std::string_view rephrase = "rephrase";
inline constexpr std::string_view extract_triples = "extract_triples";
inline constexpr std::string_view select_vertex = "select_vertex";
inline constexpr std::string_view select_predicates = "select_predicates";
inline constexpr std::string_view reformulate_answer = "reformulate_answer";
inline constexpr std::string_view translate = "translate";
}  // namespace task

// Prompt texts live in data files: one `<task>.txt` per instruction plus
// `extract_triples.examples.json` for the two few-shot examples.
class PromptLibrary {
public:
    static PromptLibrary load(const std::string& dir);
    static PromptLibrary load_default();  // $CONVKG_PROMPT_DIR, else the shipped data dir
    static std::string default_dir();

    const PromptSpec& get(std::string_view task) const;

private:
    std::map<std::string, PromptSpec, std::less<>> specs_;
};

}  // namespace convkg
