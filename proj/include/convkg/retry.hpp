#pragma once
// Bounded retry loop shared by every validating agent.

#include <cstddef>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "convkg/llm.hpp"

namespace convkg {

template <typename T>
struct Attempted {
    std::optional<T> value;     // nullopt: budget exhausted
    std::size_t attempts = 0;   // LLM calls spent
    std::string last_failure;   // reason of the last rejected attempt
};

// Runs `attempt()` at most `theta` times. `attempt` returns the validated value
// or nullopt (setting `why`). Retriable LlmErrors consume one attempt;
// non-retriable ones propagate.
template <typename T, typename Fn>
Attempted<T> retry_bounded(std::size_t theta, Fn&& attempt) {
    Attempted<T> out;
    while (!out.value && out.attempts < theta) {
        ++out.attempts;
        try {
            std::string why;
            out.value = attempt(why);
            if (!out.value) out.last_failure = why;
        } catch (const LlmError& e) {
            if (!e.retriable()) throw;
            out.last_failure = e.what();
        }
    }
    return out;
}

// Finds the JSON object in an LLM reply: the whole text, a fenced block, or the
// last parseable {...} span (chain-of-thought replies end with the object).
// Never throws.
std::optional<nlohmann::json> find_json_object(std::string_view raw);

}  // namespace convkg
