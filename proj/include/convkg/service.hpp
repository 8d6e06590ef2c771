#pragma once
// HTTP session API over the engine.
//
//   POST /sessions                         {config overrides}      -> {session_id, config}
//   POST /sessions/{id}/messages           {"question": "..."}     -> turn result
//   GET  /sessions/{id}/history                                    -> [turn entries]
//   GET  /sessions/{id}/trace/{turn}                               -> planning trace (turn is 1-based)
//   GET  /healthz

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convkg/model.hpp"
#include "convkg/orchestrator.hpp"

namespace httplib {
class Server;
}

namespace convkg::service {

class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

// Keys a client may override per session; everything else is fixed by the server.
const std::vector<std::string>& overridable_keys();

// Applies a JSON object of overrides to `base`. Throws ServiceError(422).
EngineConfig apply_overrides(EngineConfig base, const nlohmann::json& overrides);

class SessionService {
public:
    // persist_dir non-empty: every session appends JSON lines to <dir>/<id>.jsonl.
    explicit SessionService(std::shared_ptr<const Engine> engine, std::string persist_dir = {});

    std::string create_session(const nlohmann::json& overrides = nlohmann::json::object());

    // 404 unknown session, 409 turn in flight, 422 empty question.
    // Pipeline errors come back as a normal TurnResult carrying the error.
    TurnResult post_message(const std::string& session_id, const std::string& question);

    nlohmann::json get_history(const std::string& session_id) const;
    nlohmann::json get_trace(const std::string& session_id, std::size_t turn) const;
    nlohmann::json session_info(const std::string& session_id) const;
    std::size_t session_count() const;

private:
    struct Record {
        std::string id;
        std::int64_t created_at = 0;
        EngineConfig config;
        std::mutex turn_mutex;          // one in-flight turn
        mutable std::mutex data_mutex;  // guards state and results
        SessionState state;
        std::vector<TurnResult> results;
    };

    std::shared_ptr<Record> find(const std::string& session_id) const;
    void persist(const Record& record, const nlohmann::json& line) const;

    std::shared_ptr<const Engine> engine_;
    std::string persist_dir_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Record>> sessions_;
    mutable std::mutex persist_mutex_;
};

// Installs the routes plus permissive CORS headers for `cors_origin`.
void register_routes(httplib::Server& server, SessionService& service, const std::string& cors_origin = "*");

// Blocks until the server stops. Returns false when binding fails.
bool serve(SessionService& service, const std::string& host, int port, const std::string& cors_origin = "*");

}  // namespace convkg::service
