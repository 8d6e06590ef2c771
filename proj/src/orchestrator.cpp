#include "convkg/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "convkg/planning.hpp"
#include "convkg/text.hpp"
#include "convkg/understanding.hpp"

namespace convkg {

using json = nlohmann::json;

const std::vector<RouteEdge>& route_edges() {
    static const std::vector<RouteEdge> edges = {
        {Route::chat_agent, Route::qir_agent, "no QIR yet"},
        {Route::chat_agent, Route::query_agent, "QIR ready"},
        {Route::chat_agent, Route::end, "query done"},
        {Route::qir_agent, Route::classifier_agent, "multi-turn, question not yet classified"},
        {Route::qir_agent, Route::chat_agent, "QIR built or failed"},
        {Route::classifier_agent, Route::rephraser_agent, "Dependent"},
        {Route::classifier_agent, Route::qir_agent, "SelfContained"},
        {Route::classifier_agent, Route::chat_agent, "failed"},
        {Route::rephraser_agent, Route::qir_agent, "standalone question ready"},
        {Route::rephraser_agent, Route::chat_agent, "failed"},
        {Route::query_agent, Route::matching_agent, "not linked yet"},
        {Route::query_agent, Route::chat_agent, "answers ready or failed"},
        {Route::matching_agent, Route::query_agent, "linked"},
        {Route::matching_agent, Route::chat_agent, "failed"},
    };
    return edges;
}

bool route_allowed(Route from, Route to) {
    const auto& edges = route_edges();
    return std::any_of(edges.begin(), edges.end(), [&](const RouteEdge& e) { return e.from == from && e.to == to; });
}

namespace {

std::string answer_text(const Answer& a) { return a.display_label.value_or(a.value); }

std::string join_answers(const std::vector<Answer>& answers) {
    std::string out;
    for (const auto& a : answers) {
        if (!out.empty()) out += "; ";
        out += answer_text(a);
    }
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

json to_json(const TurnResult& r) {
    json answers = json::array();
    for (const auto& a : r.answers) answers.push_back(to_json(a));
    json route = json::array();
    for (auto step : r.route_log) route.push_back(to_string(step));
    json j = {{"question", r.question},
              {"standalone_question", r.standalone_question},
              {"answers", answers},
              {"degraded_flags", r.degraded_flags},
              {"route", route},
              {"llm_calls", r.llm_calls},
              {"executed_queries", r.executed_queries},
              {"candidate_queries", r.candidate_queries},
              {"stage_seconds", r.stage_seconds}};
    j["final_text"] = r.final_text ? json(*r.final_text) : json(nullptr);
    j["trace_ref"] = r.trace_ref ? json(*r.trace_ref) : json(nullptr);
    if (r.error_stage) {
        j["error"] = {{"stage", to_string(*r.error_stage)}, {"message", r.error_message}};
    } else {
        j["error"] = nullptr;
    }
    return j;
}

std::string reformulate_answer(LlmBackend& llm, const PromptSpec& prompt, const std::vector<Answer>& answers,
                               const std::string& question, bool* degraded) {
    if (degraded) *degraded = false;
    if (answers.empty()) return kNotFoundSentence;
    auto joined = join_answers(answers);
    try {
        auto reply = text::trim(llm.complete({prompt, question, {{"question", question}, {"answers", joined}}}).raw_text);
        if (!reply.empty()) return reply;
    } catch (const LlmError&) {
    }
    if (degraded) *degraded = true;
    return joined;
}

std::string translate_question(LlmBackend& llm, const PromptSpec& prompt, const std::string& question,
                               bool* degraded) {
    if (degraded) *degraded = false;
    if (text::trim(question).empty()) throw std::invalid_argument("cannot translate an empty question");
    try {
        auto reply = text::trim(llm.complete({prompt, question, {{"question", question}}}).raw_text);
        auto nl = reply.find('\n');
        if (nl != std::string::npos) reply = text::trim(reply.substr(0, nl));
        if (!reply.empty()) return reply;
    } catch (const LlmError&) {
    }
    if (degraded) *degraded = true;
    return question;
}

Engine::Engine(EngineConfig config, std::shared_ptr<LlmBackend> llm, std::shared_ptr<kg::KgTarget> target,
               std::shared_ptr<const Embedder> embedder, PromptLibrary prompts)
    : config_(std::move(config)),
      llm_(std::move(llm)),
      target_(std::move(target)),
      embedder_(std::move(embedder)),
      prompts_(std::move(prompts)) {
    config_.validate();
    if (!llm_ || !target_ || !embedder_) throw std::invalid_argument("engine needs an LLM, a KG target and an embedder");
}

std::shared_ptr<Engine> Engine::from_config(const EngineConfig& config) {
    config.validate();
    std::shared_ptr<LlmBackend> llm;
    if (!config.llm.script_file.empty()) {
        llm = ScriptedBackend::from_file(config.llm.script_file);
    } else {
        llm = std::make_shared<HttpChatBackend>(config.llm);
    }
    std::shared_ptr<kg::KgTarget> target;
    if (!config.store_file.empty()) {
        auto store = std::make_shared<const kg::TripleStore>(
            kg::TripleStore::from_file(config.store_file, config.label_predicates));
        target = std::make_shared<kg::EmbeddedTarget>(store);
    } else if (!config.endpoint_url.empty()) {
        target = std::make_shared<kg::HttpSparqlTarget>(config.endpoint_url);
    } else {
        throw ConfigError("either store_file or endpoint_url must be set");
    }
    std::shared_ptr<const Embedder> embedder;
    if (config.llm.embedding_model.empty()) {
        embedder = std::make_shared<TrigramEmbedder>();
    } else {
        embedder = std::make_shared<HttpEmbedder>(config.llm);
    }
    auto prompts = config.prompt_dir.empty() ? PromptLibrary::load_default() : PromptLibrary::load(config.prompt_dir);
    return std::make_shared<Engine>(config, std::move(llm), std::move(target), std::move(embedder), std::move(prompts));
}

TurnResult Engine::process_turn(SessionState& state, const std::string& question) const {
    return process_turn(state, question, config_);
}

TurnResult Engine::process_turn(SessionState& state, const std::string& raw_question,
                                const EngineConfig& config) const {
    if (text::trim(raw_question).empty()) throw std::invalid_argument("question must not be empty");
    config.validate();

    TurnResult result;
    CountingBackend llm(*llm_);
    const auto turn_number = state.dialogue.size() + 1;
    auto question = text::trim(raw_question);

    if (config.translation_enabled) {
        bool degraded = false;
        question = translate_question(llm, prompts_.get(task::translate), question, &degraded);
        if (degraded) result.degraded_flags.insert("translation_fallback");
    }
    result.question = question;

    state.current_question = question;
    state.standalone_question.reset();
    state.qir.reset();
    state.linking.reset();
    state.answer.reset();
    state.route = Route::chat_agent;
    state.qir_done = false;
    state.query_done = false;

    const auto context = build_context(state.dialogue, config.context_limit);
    const bool multi_turn = config.system_mode == SystemMode::multi_turn;
    std::optional<QuestionType> type;
    double understanding_s = 0, linking_s = 0, execution_s = 0;
    json plan_trace = json::object();
    json candidates_trace = json::object();

    auto fail = [&](Stage stage, const std::string& message) {
        result.error_stage = stage;
        result.error_message = message;
        state.answer = std::vector<Answer>{};
        state.query_done = true;
        return Route::chat_agent;
    };

    // Each node returns the next route; exceptions map to the node's stage.
    auto run_node = [&](Route node) -> Route {
        auto t0 = std::chrono::steady_clock::now();
        Stage stage = Stage::understanding;
        Route next = Route::end;
        try {
            switch (node) {
                case Route::chat_agent:
                    if (state.query_done) return Route::end;
                    return state.qir_done ? Route::query_agent : Route::qir_agent;

                case Route::qir_agent:
                    stage = Stage::understanding;
                    if (!state.standalone_question) {
                        if (multi_turn) return Route::classifier_agent;
                        state.standalone_question = question;
                    }
                    state.qir = build_qir(llm, prompts_, *state.standalone_question, config.theta);
                    state.qir_done = true;
                    next = Route::chat_agent;
                    break;

                case Route::classifier_agent: {
                    stage = Stage::classification;
                    type = classify_question(llm, prompts_, question, config.theta);
                    if (*type == QuestionType::Dependent) {
                        next = Route::rephraser_agent;
                    } else {
                        state.standalone_question = question;
                        next = Route::qir_agent;
                    }
                    break;
                }

                case Route::rephraser_agent: {
                    stage = Stage::rephrasing;
                    auto r = rephrase_question(llm, prompts_, question, context, config.theta);
                    if (r.degraded) result.degraded_flags.insert("rephrase_fallback");
                    state.standalone_question = r.question;
                    next = Route::qir_agent;
                    break;
                }

                case Route::matching_agent: {
                    stage = Stage::linking;
                    try {
                        auto linked = link(*state.qir, llm, prompts_, *embedder_, *target_, config);
                        result.degraded_flags.insert(linked.degraded.begin(), linked.degraded.end());
                        for (const auto& [entity, hits] : linked.candidates) {
                            json list = json::array();
                            for (const auto& h : hits) list.push_back({{"iri", h.iri}, {"label", h.label}});
                            candidates_trace[entity] = list;
                        }
                        state.linking = std::move(linked.maps);
                    } catch (...) {
                        linking_s += seconds_since(t0);
                        throw;
                    }
                    linking_s += seconds_since(t0);
                    return Route::query_agent;
                }

                case Route::query_agent: {
                    if (!state.linking) return Route::matching_agent;
                    stage = Stage::selection;
                    auto outcome = plan_and_execute(llm, prompts_, *state.standalone_question, *state.qir,
                                                    *state.linking, config, *target_);
                    result.executed_queries = outcome.executed;
                    result.candidate_queries = outcome.truncated;
                    result.degraded_flags.insert(outcome.degraded.begin(), outcome.degraded.end());
                    plan_trace = std::move(outcome.trace);
                    state.answer = std::move(outcome.answers);
                    state.query_done = true;
                    execution_s += seconds_since(t0);
                    return Route::chat_agent;
                }

                case Route::end:
                    return Route::end;
            }
        } catch (const PipelineError& e) {
            if (node == Route::query_agent) execution_s += seconds_since(t0);
            if (node == Route::qir_agent || node == Route::classifier_agent || node == Route::rephraser_agent) {
                understanding_s += seconds_since(t0);
            }
            return fail(e.stage(), e.what());
        } catch (const LlmError& e) {
            return fail(stage, e.what());
        } catch (const kg::KgError& e) {
            return fail(node == Route::query_agent ? Stage::execution : stage, e.what());
        }
        if (node == Route::qir_agent || node == Route::classifier_agent || node == Route::rephraser_agent) {
            understanding_s += seconds_since(t0);
        }
        return next;
    };

    Route current = Route::chat_agent;
    result.route_log.push_back(current);
    for (std::size_t step = 0; current != Route::end; ++step) {
        if (step >= kMaxRouteSteps) {
            fail(Stage::execution, "route step limit exceeded");
            current = Route::end;
            result.route_log.push_back(current);
            break;
        }
        auto next = run_node(current);
        if (!route_allowed(current, next)) {
            fail(Stage::execution, std::string("illegal route ") + std::string(to_string(current)) + " -> " +
                                       std::string(to_string(next)));
            next = current == Route::chat_agent ? Route::end : Route::chat_agent;
        }
        state.route = next;
        current = next;
        result.route_log.push_back(current);
    }

    result.answers = state.answer.value_or(std::vector<Answer>{});
    result.standalone_question = state.standalone_question.value_or(question);
    state.dialogue = append_turn(state.dialogue, question, result.answers);

    if (config.reformulation_enabled) {
        bool degraded = false;
        result.final_text = reformulate_answer(llm, prompts_.get(task::reformulate_answer), result.answers,
                                               question, &degraded);
        if (degraded) result.degraded_flags.insert("reformulation_fallback");
    }

    result.llm_calls = llm.calls();
    result.stage_seconds = {{"understanding", understanding_s}, {"linking", linking_s}, {"execution", execution_s}};

    json trace = plan_trace.is_object() ? plan_trace : json::object();
    trace["session"] = state.session_id;
    trace["turn"] = turn_number;
    trace["question"] = question;
    trace["standalone_question"] = result.standalone_question;
    trace["question_type"] = type ? json(std::string(to_string(*type))) : json(nullptr);
    trace["system_mode"] = to_string(config.system_mode);
    if (state.qir && !trace.contains("qir")) trace["qir"] = to_json(*state.qir);
    if (state.linking && !trace.contains("linking")) trace["linking"] = to_json(*state.linking);
    trace["vertex_candidates"] = candidates_trace;
    trace["turn_result"] = to_json(result);
    result.trace = std::move(trace);

    if (!config.trace_dir.empty()) {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(config.trace_dir, ec);
        auto name = (state.session_id.empty() ? std::string("turn") : state.session_id + "-turn") + "-" +
                    std::to_string(turn_number) + ".json";
        auto path = (fs::path(config.trace_dir) / name).string();
        std::ofstream out(path);
        if (out) {
            out << result.trace.dump(2) << "\n";
            result.trace_ref = path;
        } else {
            result.degraded_flags.insert("trace_write_failed");
        }
    }
    return result;
}

}  // namespace convkg
