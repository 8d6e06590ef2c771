#pragma once
// Shared domain types for the conversational KGQA engine.
//
// Everything here is a value type except SessionState, which is threaded
// through the agent graph for exactly one turn at a time.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace convkg {

// ---------------------------------------------------------------------------
// Answers and dialogue history
// ---------------------------------------------------------------------------

enum class AnswerKind { entity, literal, count, boolean };

std::string_view to_string(AnswerKind kind);
std::optional<AnswerKind> answer_kind_from_string(std::string_view text);

struct Answer {
    AnswerKind kind = AnswerKind::literal;
    std::string value;                         // IRI for entities, lexical form otherwise
    std::optional<std::string> display_label;

    static Answer entity(std::string iri, std::optional<std::string> label = std::nullopt);
    static Answer literal(std::string lexical);
    static Answer count(std::uint64_t n);
    static Answer boolean(bool b);

    bool operator==(const Answer& other) const {
        return kind == other.kind && value == other.value;
    }
};

// Checks the per-kind value invariants. Returns a reason on violation.
std::optional<std::string> answer_violation(const Answer& answer);

struct Turn {
    std::string question;
    std::vector<Answer> answers;
    std::uint64_t asked_at = 0;
};

// Append-only history. Existing turns are never modified.
class Dialogue {
public:
    Dialogue() = default;

    const std::vector<Turn>& turns() const { return turns_; }
    std::size_t size() const { return turns_.size(); }
    bool empty() const { return turns_.empty(); }

    friend Dialogue append_turn(const Dialogue& dialogue, std::string question,
                                std::vector<Answer> answers);

private:
    std::vector<Turn> turns_;
};

// Returns a new dialogue with one more turn carrying the raw answers.
// Throws std::invalid_argument for an empty question.
Dialogue append_turn(const Dialogue& dialogue, std::string question,
                     std::vector<Answer> answers);

struct ContextPair {
    std::string question;
    std::vector<Answer> truncated_answers;
};

struct QuestionContext {
    std::vector<ContextPair> pairs;

    bool empty() const { return pairs.empty(); }
    // Plain-text rendering used as the {context} prompt placeholder.
    std::string render() const;
};

// One pair per prior turn, each answer list cut to its first `limit` items
// in execution order.
QuestionContext build_context(const Dialogue& dialogue, std::size_t limit);

// ---------------------------------------------------------------------------
// Question intermediate representation
// ---------------------------------------------------------------------------

bool is_sparql_variable_name(std::string_view text);

struct QirTerm {
    enum class Kind { known_entity, variable };
    Kind kind = Kind::known_entity;
    std::string text;

    static QirTerm known(std::string text) { return {Kind::known_entity, std::move(text)}; }
    static QirTerm variable(std::string name) { return {Kind::variable, std::move(name)}; }
    bool is_variable() const { return kind == Kind::variable; }

    bool operator==(const QirTerm&) const = default;
};

struct QirTriple {
    QirTerm subject;
    std::string relation;
    QirTerm object;

    bool operator==(const QirTriple&) const = default;
};

enum class QuestionForm { list, count, boolean };

std::string_view to_string(QuestionForm form);
std::optional<QuestionForm> question_form_from_string(std::string_view text);

struct QIR {
    std::set<std::string> entities;   // E
    std::set<std::string> variables;  // U
    std::set<std::string> relations;  // R
    std::vector<QirTriple> facts;     // RF
    QuestionForm form = QuestionForm::list;
    std::string target;               // answer variable; empty for boolean questions

    bool operator==(const QIR&) const = default;
};

// Builds E/U/R from the facts so that they hold exactly the mentioned items.
QIR make_qir(std::vector<QirTriple> facts, QuestionForm form, std::string target = {});

// Returns the first violated QIR invariant, or nullopt.
std::optional<std::string> qir_violation(const QIR& qir);

// ---------------------------------------------------------------------------
// Linking output
// ---------------------------------------------------------------------------

// forward: pattern (subject, p, object) as written in the fact.
// reverse: the KG edge runs from the fact's object to its subject.
enum class EdgeDirection { forward, reverse };

struct ScoredPredicate {
    std::string iri;
    double score = 0.0;
    EdgeDirection direction = EdgeDirection::forward;

    bool operator==(const ScoredPredicate&) const = default;
};

struct LinkingMaps {
    std::map<std::string, std::string> ent_to_vertex;
    std::map<std::string, std::vector<ScoredPredicate>> rel_to_pred;

    bool operator==(const LinkingMaps&) const = default;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class SystemMode { multi_turn, single_turn };

std::string_view to_string(SystemMode mode);

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct LlmSettings {
    std::string url = "https://api.openai.com/v1";
    std::string model = "gpt-4o";
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.0;
    std::string embedding_model;  // empty: use the offline trigram embedder
    std::string script_file;      // non-empty: scripted backend rules
};

inline constexpr std::string_view kRdfsLabel = "http://www.w3.org/2000/01/rdf-schema#label";

struct EngineConfig {
    std::size_t theta = 3;
    std::size_t context_limit = 100;
    std::size_t vertex_limit = 600;
    std::size_t query_num = 40;
    std::size_t predicate_candidate_cap = 0;  // 0: unbounded
    SystemMode system_mode = SystemMode::multi_turn;
    std::string endpoint_url;
    std::string store_file;
    std::vector<std::string> label_predicates{std::string(kRdfsLabel)};
    LlmSettings llm;
    bool translation_enabled = false;
    bool reformulation_enabled = false;
    std::string prompt_dir;
    std::string trace_dir;

    // Throws ConfigError when a bound invariant is violated.
    void validate() const;

    // Sets one field from its textual key/value form. Throws ConfigError.
    void set(std::string_view key, std::string_view value);

    // Parses `key = value` lines; '#' starts a comment. Validates the result.
    static EngineConfig parse(std::istream& in, EngineConfig base);
    static EngineConfig parse(std::istream& in);
    // load() resolves relative file paths against the config file's directory.
    static EngineConfig load(const std::string& path, EngineConfig base);
    static EngineConfig load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Pipeline errors and per-turn state
// ---------------------------------------------------------------------------

enum class Stage {
    translation,
    classification,
    rephrasing,
    understanding,
    linking,
    selection,
    execution,
    reformulation,
};

std::string_view to_string(Stage stage);

class PipelineError : public std::runtime_error {
public:
    PipelineError(Stage stage, const std::string& message)
        : std::runtime_error(message), stage_(stage) {}
    Stage stage() const { return stage_; }

private:
    Stage stage_;
};

enum class Route {
    chat_agent,
    classifier_agent,
    rephraser_agent,
    qir_agent,
    matching_agent,
    query_agent,
    end,
};

std::string_view to_string(Route route);

struct SessionState {
    std::string session_id;
    Dialogue dialogue;
    std::string current_question;
    std::optional<std::string> standalone_question;
    std::optional<QIR> qir;
    std::optional<LinkingMaps> linking;
    std::optional<std::vector<Answer>> answer;
    Route route = Route::chat_agent;
    bool qir_done = false;
    bool query_done = false;
};

}  // namespace convkg
