#include "convkg/understanding.hpp"

#include <algorithm>
#include <cctype>

#include "convkg/retry.hpp"
#include "convkg/text.hpp"

namespace convkg {

using json = nlohmann::json;

std::string_view to_string(QuestionType type) {
    return type == QuestionType::SelfContained ? "SelfContained" : "Dependent";
}

std::optional<QuestionType> parse_question_type(std::string_view raw) {
    auto t = text::to_lower(text::trim(raw));
    if (t == "selfcontained" || t == "self-contained") return QuestionType::SelfContained;
    if (t == "dependent") return QuestionType::Dependent;
    return std::nullopt;
}

std::string_view to_string(TripleFailure failure) {
    switch (failure) {
        case TripleFailure::malformed_json: return "malformed_json";
        case TripleFailure::empty_component: return "empty_component";
        case TripleFailure::no_known_entity: return "no_known_entity";
        case TripleFailure::no_variable: return "no_variable";
    }
    return "malformed_json";
}

namespace {

// Relation phrases made only of function words ("has", "is") carry no intent.
bool is_generic_relation(const std::string& relation) {
    return text::content_tokens(relation).empty();
}

std::string sanitize_variable(std::string_view name) {
    std::string out = "?";
    for (char c : name.substr(1)) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '_') {
            out += c;
        } else if (std::isspace(u) || c == '-') {
            out += '_';
        }
    }
    return out;
}

std::optional<QirTerm> to_term(const json& node, const std::set<std::string>& declared_vars) {
    if (!node.is_string()) return std::nullopt;
    auto s = text::trim(node.get<std::string>());
    if (s.empty()) return std::nullopt;
    bool is_var = s.front() == '?' || s.front() == '$';
    if (!is_var && (declared_vars.count(s) || declared_vars.count("?" + s))) {
        s = "?" + s;
        is_var = true;
    }
    if (is_var) {
        if (s.front() == '$') s.front() = '?';
        auto v = sanitize_variable(s);
        if (!is_sparql_variable_name(v)) return std::nullopt;
        return QirTerm::variable(std::move(v));
    }
    return QirTerm::known(std::move(s));
}

}  // namespace

TripleValidation validate_triples(const RawTripleOutput& raw) {
    auto obj = find_json_object(raw.text);
    if (!obj) return TripleFailure::malformed_json;

    std::set<std::string> declared_vars;
    if (auto it = obj->find("variables"); it != obj->end() && it->is_array()) {
        for (const auto& v : *it) {
            if (v.is_string()) declared_vars.insert(text::trim(v.get<std::string>()));
        }
    }

    auto triples_it = obj->find("triples");
    if (triples_it == obj->end() || !triples_it->is_array() || triples_it->empty()) {
        return TripleFailure::empty_component;
    }

    std::vector<QirTriple> facts;
    for (const auto& t : *triples_it) {
        const json* s = nullptr;
        const json* r = nullptr;
        const json* o = nullptr;
        if (t.is_array() && t.size() == 3) {
            s = &t[0];
            r = &t[1];
            o = &t[2];
        } else if (t.is_object()) {
            auto pick = [&t](std::initializer_list<const char*> keys) -> const json* {
                for (const char* k : keys) {
                    if (auto it = t.find(k); it != t.end()) return &*it;
                }
                return nullptr;
            };
            s = pick({"subject", "s"});
            r = pick({"relation", "predicate", "r", "p"});
            o = pick({"object", "o"});
        }
        if (!s || !r || !o || !r->is_string()) return TripleFailure::empty_component;
        auto subject = to_term(*s, declared_vars);
        auto object = to_term(*o, declared_vars);
        auto relation = text::trim(r->get<std::string>());
        if (!subject || !object || relation.empty() || is_generic_relation(relation)) {
            return TripleFailure::empty_component;
        }
        facts.push_back({std::move(*subject), std::move(relation), std::move(*object)});
    }

    bool any_known = std::any_of(facts.begin(), facts.end(), [](const QirTriple& f) {
        return !f.subject.is_variable() || !f.object.is_variable();
    });
    if (!any_known) return TripleFailure::no_known_entity;

    auto form = QuestionForm::list;
    if (auto it = obj->find("form"); it != obj->end() && it->is_string()) {
        form = question_form_from_string(it->get<std::string>()).value_or(QuestionForm::list);
    }
    bool any_var = std::any_of(facts.begin(), facts.end(), [](const QirTriple& f) {
        return f.subject.is_variable() || f.object.is_variable();
    });
    if (form != QuestionForm::boolean && !any_var) return TripleFailure::no_variable;

    std::string target;
    if (auto it = obj->find("target"); it != obj->end() && it->is_string()) {
        auto t = text::trim(it->get<std::string>());
        if (!t.empty() && t.front() != '?') t = "?" + t;
        target = sanitize_variable(t);
    }
    return make_qir(std::move(facts), form, std::move(target));
}

std::optional<QuestionType> classify(LlmBackend& llm, const PromptSpec& prompt,
                                     const std::string& question) {
    LlmRequest req{prompt, question, {{"question", question}}};
    return parse_question_type(llm.complete(req).raw_text);
}

std::string rephrase(LlmBackend& llm, const PromptSpec& prompt, const std::string& question,
                     const QuestionContext& context) {
    LlmRequest req{prompt, question, {{"question", question}, {"context", context.render()}}};
    auto raw = text::trim(llm.complete(req).raw_text);
    auto nl = raw.find('\n');
    if (nl != std::string::npos) raw = text::trim(raw.substr(0, nl));
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
        raw = raw.substr(1, raw.size() - 2);
    }
    return raw;
}

RawTripleOutput extract_triples(LlmBackend& llm, const PromptSpec& prompt,
                                const std::string& standalone_question) {
    LlmRequest req{prompt, standalone_question, {{"question", standalone_question}}};
    return {llm.complete(req).raw_text};
}

QuestionType classify_question(LlmBackend& llm, const PromptLibrary& prompts,
                               const std::string& question, std::size_t theta,
                               std::size_t* attempts) {
    if (text::trim(question).empty()) {
        throw PipelineError(Stage::classification, "classification failed: empty question");
    }
    const auto& spec = prompts.get(task::classify);
    Attempted<QuestionType> result;
    try {
        result = retry_bounded<QuestionType>(theta, [&](std::string& why) {
            auto t = classify(llm, spec, question);
            if (!t) why = "label is neither SelfContained nor Dependent";
            return t;
        });
    } catch (const LlmError& e) {
        throw PipelineError(Stage::classification, std::string("classification failed: ") + e.what());
    }
    if (attempts) *attempts = result.attempts;
    if (!result.value) {
        throw PipelineError(Stage::classification,
                            "classification failed after " + std::to_string(result.attempts) +
                                " attempts: " + result.last_failure);
    }
    return *result.value;
}

Rephrasing rephrase_question(LlmBackend& llm, const PromptLibrary& prompts,
                             const std::string& question, const QuestionContext& context,
                             std::size_t theta) {
    const auto& spec = prompts.get(task::rephrase);
    Rephrasing out{question, false, 0};
    try {
        auto result = retry_bounded<std::string>(theta, [&](std::string& why) -> std::optional<std::string> {
            auto q = rephrase(llm, spec, question, context);
            if (q.empty()) {
                why = "empty rephrasing";
                return std::nullopt;
            }
            return q;
        });
        out.attempts = result.attempts;
        if (result.value) {
            out.question = std::move(*result.value);
        } else {
            out.degraded = true;
        }
    } catch (const LlmError&) {
        out.attempts += 1;
        out.degraded = true;
    }
    return out;
}

QIR build_qir(LlmBackend& llm, const PromptLibrary& prompts, const std::string& standalone_question,
              std::size_t theta, std::size_t* attempts) {
    const auto& spec = prompts.get(task::extract_triples);
    Attempted<QIR> result;
    try {
        result = retry_bounded<QIR>(theta, [&](std::string& why) -> std::optional<QIR> {
            auto checked = validate_triples(extract_triples(llm, spec, standalone_question));
            if (auto* failure = std::get_if<TripleFailure>(&checked)) {
                why = std::string(to_string(*failure));
                return std::nullopt;
            }
            return std::get<QIR>(std::move(checked));
        });
    } catch (const LlmError& e) {
        throw PipelineError(Stage::understanding, std::string("triple extraction failed: ") + e.what());
    }
    if (attempts) *attempts = result.attempts;
    if (!result.value) {
        throw PipelineError(Stage::understanding,
                            "triple extraction failed after " + std::to_string(result.attempts) +
                                " attempts: " + result.last_failure);
    }
    return std::move(*result.value);
}

Understood understand(LlmBackend& llm, const PromptLibrary& prompts, const std::string& question,
                      const QuestionContext& context, const EngineConfig& config) {
    Understood out;
    out.standalone_question = question;
    if (config.system_mode == SystemMode::multi_turn) {
        std::size_t n = 0;
        out.type = classify_question(llm, prompts, question, config.theta, &n);
        out.llm_calls += n;
        if (out.type == QuestionType::Dependent) {
            auto r = rephrase_question(llm, prompts, question, context, config.theta);
            out.llm_calls += r.attempts;
            out.standalone_question = r.question;
            if (r.degraded) out.degraded.insert("rephrase_fallback");
        }
    }
    std::size_t n = 0;
    out.qir = build_qir(llm, prompts, out.standalone_question, config.theta, &n);
    out.llm_calls += n;
    return out;
}

}  // namespace convkg
