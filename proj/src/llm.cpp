#include "convkg/llm.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "convkg/http.hpp"
#include "convkg/text.hpp"

#ifndef CONVKG_DEFAULT_PROMPT_DIR
#define CONVKG_DEFAULT_PROMPT_DIR "data/prompts"
#endif

namespace convkg {

using json = nlohmann::json;

std::optional<std::string> PromptSpec::violation() const {
    if (name.empty()) return "prompt has no name";
    if (text::trim(instruction).empty()) return "prompt '" + name + "' has an empty instruction";
    bool few = strategy != PromptStrategy::zero_shot;
    if (few && examples.empty()) return "few-shot prompt '" + name + "' carries no examples";
    if (!few && !examples.empty()) return "zero-shot prompt '" + name + "' carries examples";
    return std::nullopt;
}

std::string LlmRequest::rendered_instruction() const {
    return text::substitute(prompt.instruction, vars);
}

std::vector<ChatMessage> assemble_messages(const LlmRequest& request) {
    std::vector<ChatMessage> out;
    out.push_back({"system", request.rendered_instruction()});
    for (const auto& ex : request.prompt.examples) {
        out.push_back({"user", ex.input});
        out.push_back({"assistant", ex.output});
    }
    out.push_back({"user", request.payload});
    return out;
}

// --- live backend -----------------------------------------------------------

HttpChatBackend::HttpChatBackend(LlmSettings settings) : settings_(std::move(settings)) {}

std::string HttpChatBackend::id() const { return "http:" + settings_.model; }

json HttpChatBackend::request_body(const LlmRequest& request) const {
    json messages = json::array();
    for (const auto& m : assemble_messages(request)) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    json body = {{"model", settings_.model},
                 {"temperature", settings_.temperature},
                 {"messages", std::move(messages)}};
    if (request.prompt.contract == OutputContract::json_object) {
        body["response_format"] = {{"type", "json_object"}};
    }
    return body;
}

LlmResponse HttpChatBackend::complete(const LlmRequest& request) {
    std::map<std::string, std::string> headers;
    if (const char* key = std::getenv(settings_.api_key_env.c_str()); key && *key) {
        headers["Authorization"] = std::string("Bearer ") + key;
    }
    auto url = settings_.url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    url += "/chat/completions";

    http::Response res;
    try {
        res = http::post(url, request_body(request).dump(), "application/json", headers);
    } catch (const http::TransportError& e) {
        throw LlmError(e.what(), true, id());
    } catch (const std::invalid_argument& e) {
        throw LlmError(e.what(), false, id());
    }
    if (res.status == 429 || res.status >= 500) {
        throw LlmError("LLM endpoint returned HTTP " + std::to_string(res.status), true, id());
    }
    if (res.status != 200) {
        throw LlmError("LLM endpoint refused request (HTTP " + std::to_string(res.status) +
                           "): " + res.body.substr(0, 300),
                       false, id());
    }
    auto parsed = json::parse(res.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty()) {
        throw LlmError("malformed chat-completion body", true, id());
    }
    const auto& msg = parsed["choices"][0]["message"];
    if (!msg.is_object() || !msg.contains("content") || !msg["content"].is_string()) {
        throw LlmError("chat-completion choice has no text content", false, id());
    }
    return {msg["content"].get<std::string>(), id()};
}

// --- scripted backend -------------------------------------------------------

bool ScriptMatcher::matches(const LlmRequest& request) const {
    if (!task.empty() && task != request.prompt.name) return false;
    std::string subject;
    if (field.empty() || field == "payload") {
        subject = request.payload;
    } else {
        auto it = request.vars.find(field);
        if (it == request.vars.end()) return false;
        subject = it->second;
    }
    if (equals && text::trim(*equals) != text::trim(subject)) return false;
    for (const auto& needle : contains) {
        if (!text::contains_ci(subject, needle)) return false;
    }
    return true;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, std::string id)
    : rules_(std::move(rules)), id_(std::move(id)) {
    if (rules_.empty()) throw std::invalid_argument("scripted backend needs at least one rule");
    hits_ = std::make_unique<std::atomic<std::size_t>[]>(rules_.size());
    for (std::size_t i = 0; i < rules_.size(); ++i) hits_[i].store(0);
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& rules, std::string id) {
    if (!rules.is_array()) throw std::invalid_argument("script: expected a JSON array of rules");
    std::vector<ScriptRule> out;
    for (const auto& r : rules) {
        ScriptRule rule;
        rule.matcher.task = r.value("task", "");
        rule.matcher.field = r.value("field", "");
        if (r.contains("contains")) {
            const auto& c = r["contains"];
            if (c.is_string()) {
                rule.matcher.contains.push_back(c.get<std::string>());
            } else {
                rule.matcher.contains = c.get<std::vector<std::string>>();
            }
        }
        if (r.contains("equals")) rule.matcher.equals = r["equals"].get<std::string>();
        const auto& output = r.at("output");
        rule.output = output.is_string() ? output.get<std::string>() : output.dump();
        rule.fail_first = r.value("fail_first", std::size_t{0});
        if (r.contains("fail_output")) rule.fail_output = r["fail_output"].get<std::string>();
        out.push_back(std::move(rule));
    }
    return std::make_unique<ScriptedBackend>(std::move(out), std::move(id));
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("script: cannot open " + path);
    auto rules = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    return from_json(rules, "scripted:" + std::filesystem::path(path).filename().string());
}

LlmResponse ScriptedBackend::complete(const LlmRequest& request) {
    {
        std::lock_guard lock(log_mutex_);
        log_.push_back(request.prompt.name);
    }
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& rule = rules_[i];
        if (!rule.matcher.matches(request)) continue;
        auto n = hits_[i].fetch_add(1);
        if (n < rule.fail_first) {
            if (rule.fail_output) return {*rule.fail_output, id_};
            throw LlmError("scripted transport failure", true, id_);
        }
        return {rule.output, id_};
    }
    throw LlmError("no scripted rule matches task '" + request.prompt.name + "'", false, id_);
}

std::size_t ScriptedBackend::calls() const {
    std::lock_guard lock(log_mutex_);
    return log_.size();
}

std::size_t ScriptedBackend::calls_for(std::string_view task_name) const {
    std::lock_guard lock(log_mutex_);
    std::size_t n = 0;
    for (const auto& t : log_) n += (t == task_name);
    return n;
}

std::vector<std::string> ScriptedBackend::call_log() const {
    std::lock_guard lock(log_mutex_);
    return log_;
}

void ScriptedBackend::reset() {
    std::lock_guard lock(log_mutex_);
    log_.clear();
    for (std::size_t i = 0; i < rules_.size(); ++i) hits_[i].store(0);
}

// --- prompt library ---------------------------------------------------------

namespace {

struct TaskShape {
    std::string_view name;
    PromptStrategy strategy;
    OutputContract contract;
};

constexpr TaskShape kTasks[] = {
    {task::classify, PromptStrategy::zero_shot, OutputContract::label},
    {task::rephrase, PromptStrategy::zero_shot, OutputContract::free_text},
    {task::extract_triples, PromptStrategy::chain_of_thought_few_shot, OutputContract::json_object},
    {task::select_vertex, PromptStrategy::zero_shot, OutputContract::json_object},
    {task::select_predicates, PromptStrategy::zero_shot, OutputContract::json_object},
    {task::reformulate_answer, PromptStrategy::zero_shot, OutputContract::free_text},
    {task::translate, PromptStrategy::zero_shot, OutputContract::free_text},
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::invalid_argument("prompt file not found: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

PromptLibrary PromptLibrary::load(const std::string& dir) {
    namespace fs = std::filesystem;
    PromptLibrary lib;
    for (const auto& shape : kTasks) {
        PromptSpec spec;
        spec.name = std::string(shape.name);
        spec.strategy = shape.strategy;
        spec.contract = shape.contract;
        spec.instruction = slurp(fs::path(dir) / (spec.name + ".txt"));
        if (shape.strategy != PromptStrategy::zero_shot) {
            auto examples = json::parse(slurp(fs::path(dir) / (spec.name + ".examples.json")));
            for (const auto& ex : examples) {
                spec.examples.push_back(
                    {ex.at("input").get<std::string>(),
                     ex.at("output").is_string() ? ex.at("output").get<std::string>()
                                                 : ex.at("output").dump()});
            }
        }
        if (auto why = spec.violation()) throw std::invalid_argument(*why);
        lib.specs_.emplace(spec.name, std::move(spec));
    }
    return lib;
}

std::string PromptLibrary::default_dir() {
    if (const char* env = std::getenv("CONVKG_PROMPT_DIR"); env && *env) return env;
    return CONVKG_DEFAULT_PROMPT_DIR;
}

PromptLibrary PromptLibrary::load_default() { return load(default_dir()); }

const PromptSpec& PromptLibrary::get(std::string_view task_name) const {
    auto it = specs_.find(task_name);
    if (it == specs_.end()) {
        throw std::out_of_range("no prompt for task '" + std::string(task_name) + "'");
    }
    return it->second;
}

}  // namespace convkg
