#pragma once
// Contextual understanding: classify a question, rephrase it when it depends
// on earlier turns, extract relational triples and validate them into a QIR.

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>

#include "convkg/llm.hpp"
#include "convkg/model.hpp"

namespace convkg {

enum class QuestionType { SelfContained, Dependent };

std::string_view to_string(QuestionType type);

// Trim + case-fold, then exact label match. Anything else is a failure.
std::optional<QuestionType> parse_question_type(std::string_view raw);

struct RawTripleOutput {
    std::string text;
};

enum class TripleFailure { malformed_json, empty_component, no_known_entity, no_variable };

std::string_view to_string(TripleFailure failure);

using TripleValidation = std::variant<QIR, TripleFailure>;

// Total: every input yields a QIR or exactly one failure tag.
TripleValidation validate_triples(const RawTripleOutput& raw);

// --- single LLM calls ---------------------------------------------------------

// nullopt when the reply is not one of the two labels.
std::optional<QuestionType> classify(LlmBackend& llm, const PromptSpec& prompt,
                                     const std::string& question);

// Returns the trimmed first line of the reply (may be empty).
std::string rephrase(LlmBackend& llm, const PromptSpec& prompt, const std::string& question,
                     const QuestionContext& context);

RawTripleOutput extract_triples(LlmBackend& llm, const PromptSpec& prompt,
                                const std::string& standalone_question);

// --- bounded agents -------------------------------------------------------------

struct Rephrasing {
    std::string question;
    bool degraded = false;  // retries exhausted, original question kept
    std::size_t attempts = 0;
};

// Classifier agent: retries unparseable labels up to theta.
// Throws PipelineError(classification) when exhausted.
QuestionType classify_question(LlmBackend& llm, const PromptLibrary& prompts,
                               const std::string& question, std::size_t theta,
                               std::size_t* attempts = nullptr);

// Rephraser agent: retries empty output; falls back to the original question.
Rephrasing rephrase_question(LlmBackend& llm, const PromptLibrary& prompts,
                             const std::string& question, const QuestionContext& context,
                             std::size_t theta);

// QIR agent: extract/validate loop bounded by theta.
// Throws PipelineError(understanding) when exhausted.
QIR build_qir(LlmBackend& llm, const PromptLibrary& prompts, const std::string& standalone_question,
              std::size_t theta, std::size_t* attempts = nullptr);

struct Understood {
    QIR qir;
    QuestionType type = QuestionType::SelfContained;
    std::string standalone_question;
    std::set<std::string> degraded;
    std::size_t llm_calls = 0;
};

// Full composition: classify, maybe rephrase, extract/validate.
// In single-turn mode the classifier is skipped and the question is treated
// as self-contained.
Understood understand(LlmBackend& llm, const PromptLibrary& prompts, const std::string& question,
                      const QuestionContext& context, const EngineConfig& config);

}  // namespace convkg
