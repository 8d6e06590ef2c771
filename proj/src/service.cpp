#include "convkg/service.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>

#include <httplib.h>

#include "convkg/planning.hpp"
#include "convkg/text.hpp"

namespace convkg::service {

using json = nlohmann::json;

namespace {

std::string new_session_id() {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    static constexpr char hex[] = "0123456789abcdef";
    std::string id;
    auto bits = rng();
    for (int i = 0; i < 16; ++i, bits >>= 4) id += hex[bits & 0xf];
    return id;
}

std::int64_t unix_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

json config_json(const EngineConfig& c) {
    return {{"theta", c.theta},
            {"context_limit", c.context_limit},
            {"vertex_limit", c.vertex_limit},
            {"query_num", c.query_num},
            {"predicate_candidate_cap", c.predicate_candidate_cap},
            {"system_mode", to_string(c.system_mode)},
            {"translation_enabled", c.translation_enabled},
            {"reformulation_enabled", c.reformulation_enabled}};
}

json history_entry(std::size_t turn, const TurnResult& r) {
    json answers = json::array();
    for (const auto& a : r.answers) answers.push_back(to_json(a));
    json j = {{"turn", turn},
              {"question", r.question},
              {"answers", answers},
              {"degraded_flags", r.degraded_flags}};
    j["final_text"] = r.final_text ? json(*r.final_text) : json(nullptr);
    if (r.error_stage) {
        j["error"] = {{"stage", to_string(*r.error_stage)}, {"message", r.error_message}};
    } else {
        j["error"] = nullptr;
    }
    return j;
}

}  // namespace

const std::vector<std::string>& overridable_keys() {
    static const std::vector<std::string> keys = {
        "theta",       "context_limit", "context_limit_l",     "l",
        "vertex_limit", "v_limit",      "query_num",           "predicate_candidate_cap",
        "system_mode", "mode",          "translation_enabled", "reformulation_enabled",
    };
    return keys;
}

EngineConfig apply_overrides(EngineConfig base, const json& overrides) {
    if (overrides.is_null()) return base;
    if (!overrides.is_object()) throw ServiceError(422, "session config must be a JSON object");
    const auto& keys = overridable_keys();
    for (const auto& [key, value] : overrides.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ServiceError(422, "'" + key + "' cannot be set per session");
        }
        std::string text;
        if (value.is_string()) {
            text = value.get<std::string>();
        } else if (value.is_boolean()) {
            text = value.get<bool>() ? "true" : "false";
        } else if (value.is_number()) {
            text = value.dump();
        } else {
            throw ServiceError(422, "'" + key + "' must be a string, number or boolean");
        }
        try {
            base.set(key, text);
        } catch (const ConfigError& e) {
            throw ServiceError(422, e.what());
        }
    }
    try {
        base.validate();
    } catch (const ConfigError& e) {
        throw ServiceError(422, e.what());
    }
    return base;
}

SessionService::SessionService(std::shared_ptr<const Engine> engine, std::string persist_dir)
    : engine_(std::move(engine)), persist_dir_(std::move(persist_dir)) {
    if (!engine_) throw std::invalid_argument("session service needs an engine");
    if (!persist_dir_.empty()) std::filesystem::create_directories(persist_dir_);
}

std::string SessionService::create_session(const json& overrides) {
    auto record = std::make_shared<Record>();
    record->config = apply_overrides(engine_->config(), overrides);
    record->created_at = unix_now();
    {
        std::unique_lock lock(sessions_mutex_);
        do {
            record->id = new_session_id();
        } while (sessions_.count(record->id));
        record->state.session_id = record->id;
        sessions_.emplace(record->id, record);
    }
    persist(*record, {{"event", "created"}, {"session_id", record->id}, {"created_at", record->created_at},
                      {"config", config_json(record->config)}});
    return record->id;
}

std::shared_ptr<SessionService::Record> SessionService::find(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session " + session_id);
    return it->second;
}

TurnResult SessionService::post_message(const std::string& session_id, const std::string& question) {
    auto record = find(session_id);
    std::unique_lock turn(record->turn_mutex, std::try_to_lock);
    if (!turn.owns_lock()) throw ServiceError(409, "a turn is already in flight for session " + session_id);
    if (text::trim(question).empty()) throw ServiceError(422, "question must not be empty");

    SessionState working;
    {
        std::lock_guard lock(record->data_mutex);
        working = record->state;
    }
    auto result = engine_->process_turn(working, question, record->config);
    std::size_t turn_number = 0;
    {
        std::lock_guard lock(record->data_mutex);
        record->state = std::move(working);
        record->results.push_back(result);
        turn_number = record->results.size();
    }
    auto line = history_entry(turn_number, result);
    line["event"] = "turn";
    persist(*record, line);
    return result;
}

json SessionService::get_history(const std::string& session_id) const {
    auto record = find(session_id);
    std::lock_guard lock(record->data_mutex);
    json out = json::array();
    for (std::size_t i = 0; i < record->results.size(); ++i) out.push_back(history_entry(i + 1, record->results[i]));
    return out;
}

json SessionService::get_trace(const std::string& session_id, std::size_t turn) const {
    auto record = find(session_id);
    std::lock_guard lock(record->data_mutex);
    if (turn == 0 || turn > record->results.size()) {
        throw ServiceError(404, "session " + session_id + " has no turn " + std::to_string(turn));
    }
    return record->results[turn - 1].trace;
}

json SessionService::session_info(const std::string& session_id) const {
    auto record = find(session_id);
    std::lock_guard lock(record->data_mutex);
    return {{"session_id", record->id},
            {"created_at", record->created_at},
            {"config", config_json(record->config)},
            {"turns", record->results.size()}};
}

std::size_t SessionService::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

void SessionService::persist(const Record& record, const json& line) const {
    if (persist_dir_.empty()) return;
    std::lock_guard lock(persist_mutex_);
    std::ofstream out(std::filesystem::path(persist_dir_) / (record.id + ".jsonl"), std::ios::app);
    out << line.dump() << "\n";
}

void register_routes(httplib::Server& server, SessionService& service, const std::string& cors_origin) {
    server.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});

    auto send = [](httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json; charset=utf-8");
    };
    auto guarded = [send](auto handler) {
        return [send, handler](const httplib::Request& req, httplib::Response& res) {
            try {
                handler(req, res);
            } catch (const ServiceError& e) {
                send(res, e.status(), {{"error", {{"status", e.status()}, {"message", e.what()}}}});
            } catch (const std::exception& e) {
                send(res, 500, {{"error", {{"status", 500}, {"message", e.what()}}}});
            }
        };
    };
    auto parse_body = [](const httplib::Request& req) {
        if (text::trim(req.body).empty()) return json::object();
        auto doc = json::parse(req.body, nullptr, false);
        if (doc.is_discarded()) throw ServiceError(422, "request body is not valid JSON");
        return doc;
    };

    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/healthz", [send](const httplib::Request&, httplib::Response& res) {
        send(res, 200, {{"status", "ok"}});
    });

    server.Post("/sessions", guarded([&service, send, parse_body](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        auto overrides = body.is_object() && body.contains("config") ? body["config"] : body;
        auto id = service.create_session(overrides);
        send(res, 201, service.session_info(id));
    }));

    server.Post(R"(/sessions/([A-Za-z0-9_-]+)/messages)",
                guarded([&service, send, parse_body](const httplib::Request& req, httplib::Response& res) {
                    auto body = parse_body(req);
                    if (!body.is_object() || !body.contains("question") || !body["question"].is_string()) {
                        throw ServiceError(422, "body must be {\"question\": \"...\"}");
                    }
                    auto result = service.post_message(req.matches[1], body["question"].get<std::string>());
                    auto j = to_json(result);
                    j["turn"] = service.get_history(req.matches[1]).size();
                    send(res, 200, j);
                }));

    server.Get(R"(/sessions/([A-Za-z0-9_-]+)/history)",
               guarded([&service, send](const httplib::Request& req, httplib::Response& res) {
                   send(res, 200, service.get_history(req.matches[1]));
               }));

    server.Get(R"(/sessions/([A-Za-z0-9_-]+)/trace/(\d+))",
               guarded([&service, send](const httplib::Request& req, httplib::Response& res) {
                   std::size_t turn = 0;
                   try {
                       turn = std::stoul(req.matches[2]);
                   } catch (const std::exception&) {
                       throw ServiceError(404, "no such turn");
                   }
                   send(res, 200, service.get_trace(req.matches[1], turn));
               }));

    server.Get(R"(/sessions/([A-Za-z0-9_-]+))",
               guarded([&service, send](const httplib::Request& req, httplib::Response& res) {
                   send(res, 200, service.session_info(req.matches[1]));
               }));
}

bool serve(SessionService& service, const std::string& host, int port, const std::string& cors_origin) {
    httplib::Server server;
    register_routes(server, service, cors_origin);
    return server.listen(host, port);
}

}  // namespace convkg::service
