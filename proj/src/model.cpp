#include "convkg/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "convkg/text.hpp"

namespace convkg {

std::string_view to_string(AnswerKind kind) {
    switch (kind) {
        case AnswerKind::entity: return "entity";
        case AnswerKind::literal: return "literal";
        case AnswerKind::count: return "count";
        case AnswerKind::boolean: return "boolean";
    }
    return "literal";
}

std::optional<AnswerKind> answer_kind_from_string(std::string_view text) {
    if (text == "entity") return AnswerKind::entity;
    if (text == "literal") return AnswerKind::literal;
    if (text == "count") return AnswerKind::count;
    if (text == "boolean") return AnswerKind::boolean;
    return std::nullopt;
}

Answer Answer::entity(std::string iri, std::optional<std::string> label) {
    return {AnswerKind::entity, std::move(iri), std::move(label)};
}

Answer Answer::literal(std::string lexical) {
    return {AnswerKind::literal, std::move(lexical), std::nullopt};
}

Answer Answer::count(std::uint64_t n) {
    return {AnswerKind::count, std::to_string(n), std::nullopt};
}

Answer Answer::boolean(bool b) {
    return {AnswerKind::boolean, b ? "true" : "false", std::nullopt};
}

namespace {

bool is_absolute_iri(std::string_view v) {
    auto colon = v.find(':');
    if (colon == std::string_view::npos || colon == 0) return false;
    if (!std::isalpha(static_cast<unsigned char>(v[0]))) return false;
    for (std::size_t i = 1; i < colon; ++i) {
        char c = v[i];
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') {
            return false;
        }
    }
    return v.find_first_of(" <>\"{}|\\^`") == std::string_view::npos;
}

}  // namespace

std::optional<std::string> answer_violation(const Answer& answer) {
    switch (answer.kind) {
        case AnswerKind::count: {
            std::uint64_t n = 0;
            const auto* first = answer.value.data();
            const auto* last = first + answer.value.size();
            auto [ptr, ec] = std::from_chars(first, last, n);
            if (answer.value.empty() || ec != std::errc{} || ptr != last) {
                return "count answer is not a non-negative integer: " + answer.value;
            }
            return std::nullopt;
        }
        case AnswerKind::boolean:
            if (answer.value != "true" && answer.value != "false") {
                return "boolean answer must be \"true\" or \"false\": " + answer.value;
            }
            return std::nullopt;
        case AnswerKind::entity:
            if (!is_absolute_iri(answer.value)) {
                return "entity answer is not an absolute IRI: " + answer.value;
            }
            return std::nullopt;
        case AnswerKind::literal:
            return std::nullopt;
    }
    return std::nullopt;
}

Dialogue append_turn(const Dialogue& dialogue, std::string question,
                     std::vector<Answer> answers) {
    if (text::trim(question).empty()) {
        throw std::invalid_argument("append_turn: question must be non-empty");
    }
    Dialogue next = dialogue;
    std::uint64_t seq = next.turns_.empty() ? 1 : next.turns_.back().asked_at + 1;
    next.turns_.push_back(Turn{std::move(question), std::move(answers), seq});
    return next;
}

std::string QuestionContext::render() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        out << "Q" << (i + 1) << ": " << p.question << "\n";
        out << "A" << (i + 1) << ": ";
        if (p.truncated_answers.empty()) out << "(no answer)";
        for (std::size_t j = 0; j < p.truncated_answers.size(); ++j) {
            const auto& a = p.truncated_answers[j];
            if (j) out << "; ";
            out << (a.display_label ? *a.display_label : a.value);
        }
        out << "\n";
    }
    return out.str();
}

QuestionContext build_context(const Dialogue& dialogue, std::size_t limit) {
    QuestionContext ctx;
    ctx.pairs.reserve(dialogue.size());
    for (const auto& turn : dialogue.turns()) {
        ContextPair pair{turn.question, {}};
        auto n = std::min(limit, turn.answers.size());
        pair.truncated_answers.assign(turn.answers.begin(),
                                      turn.answers.begin() + static_cast<std::ptrdiff_t>(n));
        ctx.pairs.push_back(std::move(pair));
    }
    return ctx;
}

bool is_sparql_variable_name(std::string_view text) {
    if (text.size() < 2 || (text[0] != '?' && text[0] != '$')) return false;
    for (std::size_t i = 1; i < text.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (!std::isalnum(c) && c != '_') return false;
    }
    return true;
}

std::string_view to_string(QuestionForm form) {
    switch (form) {
        case QuestionForm::list: return "list";
        case QuestionForm::count: return "count";
        case QuestionForm::boolean: return "boolean";
    }
    return "list";
}

std::optional<QuestionForm> question_form_from_string(std::string_view text) {
    auto t = text::to_lower(text::trim(text));
    if (t == "list" || t == "factoid") return QuestionForm::list;
    if (t == "count") return QuestionForm::count;
    if (t == "boolean") return QuestionForm::boolean;
    return std::nullopt;
}

QIR make_qir(std::vector<QirTriple> facts, QuestionForm form, std::string target) {
    QIR qir;
    qir.form = form;
    for (const auto& f : facts) {
        for (const auto* term : {&f.subject, &f.object}) {
            (term->is_variable() ? qir.variables : qir.entities).insert(term->text);
        }
        qir.relations.insert(f.relation);
    }
    if (form != QuestionForm::boolean) {
        if (!target.empty() && qir.variables.count(target)) {
            qir.target = std::move(target);
        } else {
            // first variable in order of appearance
            for (const auto& f : facts) {
                if (f.subject.is_variable()) { qir.target = f.subject.text; break; }
                if (f.object.is_variable()) { qir.target = f.object.text; break; }
            }
        }
    }
    qir.facts = std::move(facts);
    return qir;
}

std::optional<std::string> qir_violation(const QIR& qir) {
    if (qir.entities.empty()) return "QIR has no known entity";
    if (qir.form != QuestionForm::boolean && qir.variables.empty()) {
        return "non-boolean QIR has no variable";
    }
    for (const auto& f : qir.facts) {
        for (const auto* term : {&f.subject, &f.object}) {
            if (term->is_variable()) {
                if (!qir.variables.count(term->text)) return "fact uses undeclared variable " + term->text;
                if (!is_sparql_variable_name(term->text)) return "invalid variable name " + term->text;
            } else if (!qir.entities.count(term->text)) {
                return "fact uses undeclared entity " + term->text;
            }
        }
        if (text::trim(f.relation).empty()) return "fact has empty relation";
        if (!qir.relations.count(f.relation)) return "fact uses undeclared relation " + f.relation;
    }
    if (qir.form != QuestionForm::boolean && !qir.variables.count(qir.target)) {
        return "answer target is not a declared variable";
    }
    return std::nullopt;
}

std::string_view to_string(SystemMode mode) {
    return mode == SystemMode::multi_turn ? "multi_turn" : "single_turn";
}

namespace {

std::size_t parse_size(std::string_view key, std::string_view value) {
    auto v = text::trim(value);
    long long n = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || n < 0) {
        throw ConfigError("config: " + std::string(key) + " expects a non-negative integer, got '" +
                          v + "'");
    }
    return static_cast<std::size_t>(n);
}

bool parse_bool(std::string_view key, std::string_view value) {
    auto v = text::to_lower(text::trim(value));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: " + std::string(key) + " expects a boolean, got '" + v + "'");
}

std::string unquote(std::string_view value) {
    auto v = text::trim(value);
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                          (v.front() == '\'' && v.back() == '\''))) {
        return v.substr(1, v.size() - 2);
    }
    return v;
}

}  // namespace

void EngineConfig::validate() const {
    if (theta < 1) throw ConfigError("config: theta must be >= 1");
    if (context_limit < 1) throw ConfigError("config: context_limit must be >= 1");
    if (vertex_limit < 1) throw ConfigError("config: vertex_limit must be >= 1");
    if (query_num < 1) throw ConfigError("config: query_num must be >= 1");
    if (label_predicates.empty()) throw ConfigError("config: label_predicates must not be empty");
}

void EngineConfig::set(std::string_view key_in, std::string_view raw) {
    auto key = text::to_lower(text::trim(key_in));
    auto value = unquote(raw);
    if (key == "theta") {
        theta = parse_size(key, value);
    } else if (key == "context_limit" || key == "context_limit_l" || key == "l") {
        context_limit = parse_size(key, value);
    } else if (key == "vertex_limit" || key == "v_limit") {
        vertex_limit = parse_size(key, value);
    } else if (key == "query_num") {
        query_num = parse_size(key, value);
    } else if (key == "predicate_candidate_cap") {
        predicate_candidate_cap = parse_size(key, value);
    } else if (key == "system_mode" || key == "mode") {
        auto v = text::to_lower(value);
        if (v == "multi_turn" || v == "multi" || v == "dialogue") {
            system_mode = SystemMode::multi_turn;
        } else if (v == "single_turn" || v == "single") {
            system_mode = SystemMode::single_turn;
        } else {
            throw ConfigError("config: unknown system_mode '" + v + "'");
        }
    } else if (key == "endpoint_url" || key == "endpoint") {
        endpoint_url = value;
    } else if (key == "store_file") {
        store_file = value;
    } else if (key == "label_predicates") {
        label_predicates.clear();
        for (const auto& p : text::split(value, ',')) {
            auto t = text::trim(p);
            if (!t.empty()) label_predicates.push_back(t);
        }
    } else if (key == "llm_url") {
        llm.url = value;
    } else if (key == "llm_model") {
        llm.model = value;
    } else if (key == "llm_api_key_env") {
        llm.api_key_env = value;
    } else if (key == "llm_temperature") {
        try {
            llm.temperature = std::stod(value);
        } catch (const std::exception&) {
            throw ConfigError("config: llm_temperature expects a number");
        }
    } else if (key == "embedding_model") {
        llm.embedding_model = value;
    } else if (key == "llm_script" || key == "script_file") {
        llm.script_file = value;
    } else if (key == "translation_enabled") {
        translation_enabled = parse_bool(key, value);
    } else if (key == "reformulation_enabled") {
        reformulation_enabled = parse_bool(key, value);
    } else if (key == "prompt_dir") {
        prompt_dir = value;
    } else if (key == "trace_dir") {
        trace_dir = value;
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

EngineConfig EngineConfig::parse(std::istream& in, EngineConfig base) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // '#' starts a comment only at line start or after whitespace (IRIs carry '#')
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '#' && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
                line.erase(i);
                break;
            }
        }
        auto t = text::trim(line);
        if (t.empty() || t.front() == '[') continue;  // TOML table headers are ignored
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        base.set(t.substr(0, eq), t.substr(eq + 1));
    }
    base.validate();
    return base;
}

EngineConfig EngineConfig::parse(std::istream& in) { return parse(in, EngineConfig{}); }

EngineConfig EngineConfig::load(const std::string& path) { return load(path, EngineConfig{}); }

EngineConfig EngineConfig::load(const std::string& path, EngineConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    auto before = base;
    auto cfg = parse(in, std::move(base));
    // file paths set by the config file are relative to the file itself
    auto dir = std::filesystem::path(path).parent_path();
    auto anchor = [&](std::string& value, const std::string& old) {
        if (value.empty() || value == old || std::filesystem::path(value).is_absolute()) return;
        value = (dir / value).lexically_normal().string();
    };
    anchor(cfg.store_file, before.store_file);
    anchor(cfg.llm.script_file, before.llm.script_file);
    anchor(cfg.prompt_dir, before.prompt_dir);
    anchor(cfg.trace_dir, before.trace_dir);
    return cfg;
}

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::translation: return "translation";
        case Stage::classification: return "classification";
        case Stage::rephrasing: return "rephrasing";
        case Stage::understanding: return "understanding";
        case Stage::linking: return "linking";
        case Stage::selection: return "selection";
        case Stage::execution: return "execution";
        case Stage::reformulation: return "reformulation";
    }
    return "unknown";
}

std::string_view to_string(Route route) {
    switch (route) {
        case Route::chat_agent: return "chat_agent";
        case Route::classifier_agent: return "classifier_agent";
        case Route::rephraser_agent: return "rephraser_agent";
        case Route::qir_agent: return "qir_agent";
        case Route::matching_agent: return "matching_agent";
        case Route::query_agent: return "query_agent";
        case Route::end: return "END";
    }
    return "END";
}

}  // namespace convkg
