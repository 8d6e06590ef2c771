#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "convkg/service.hpp"
#include "support.hpp"

using namespace convkg;
using namespace convkg::service;
using nlohmann::json;

namespace {

// Forwards to the desk script, records every request and can hold one
// question until released.
class GatedBackend : public LlmBackend {
public:
    explicit GatedBackend(std::string hold_payload = {}) : inner_(fixture::desk_backend()), hold_(std::move(hold_payload)) {}
    std::string id() const override { return "gated"; }
    LlmResponse complete(const LlmRequest& req) override {
        {
            std::unique_lock lock(mutex_);
            requests_.push_back(req);
            if (!hold_.empty() && req.payload == hold_) {
                entered_ = true;
                cv_.notify_all();
                cv_.wait(lock, [&] { return released_; });
            }
        }
        return inner_->complete(req);
    }
    void wait_entered() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return entered_; });
    }
    void release() {
        std::lock_guard lock(mutex_);
        released_ = true;
        cv_.notify_all();
    }
    std::vector<LlmRequest> requests() {
        std::lock_guard lock(mutex_);
        return requests_;
    }

private:
    std::shared_ptr<ScriptedBackend> inner_;
    std::string hold_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool entered_ = false;
    bool released_ = false;
    std::vector<LlmRequest> requests_;
};

int status_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ServiceError& e) {
        return e.status();
    }
    return 0;
}

}  // namespace

TEST(Overrides, AcceptedAndRejected) {
    EngineConfig base;
    auto c = apply_overrides(base, json{{"mode", "single_turn"}, {"theta", 2}, {"l", 5}, {"reformulation_enabled", true}});
    EXPECT_EQ(c.system_mode, SystemMode::single_turn);
    EXPECT_EQ(c.theta, 2u);
    EXPECT_EQ(c.context_limit, 5u);
    EXPECT_TRUE(c.reformulation_enabled);
    EXPECT_EQ(status_of([&] { apply_overrides(base, json{{"theta", 0}}); }), 422);
    EXPECT_EQ(status_of([&] { apply_overrides(base, json{{"store_file", "/etc/passwd"}}); }), 422);
    EXPECT_EQ(status_of([&] { apply_overrides(base, json{{"theta", "lots"}}); }), 422);
    EXPECT_EQ(status_of([&] { apply_overrides(base, json::array()); }), 422);
}

TEST(Sessions, CreatePostHistoryTrace) {
    SessionService svc(fixture::desk_engine());
    auto id = svc.create_session();
    EXPECT_EQ(id.size(), 16u);
    EXPECT_EQ(svc.session_info(id)["config"]["system_mode"], "multi_turn");
    auto single = svc.create_session(json{{"mode", "single_turn"}});
    EXPECT_EQ(svc.session_info(single)["config"]["system_mode"], "single_turn");
    EXPECT_EQ(status_of([&] { svc.create_session(json{{"theta", 0}}); }), 422);
    EXPECT_EQ(svc.session_count(), 2u);

    auto t1 = svc.post_message(id, "Who is the author of Harry Potter?");
    auto t2 = svc.post_message(id, "When was its first movie released?");
    ASSERT_EQ(t2.answers.size(), 1u);
    EXPECT_EQ(t2.answers[0].value, "2001");

    auto s2 = svc.post_message(single, "When was its first movie released?");
    EXPECT_TRUE(s2.answers.empty());
    auto history = svc.get_history(single);
    ASSERT_EQ(history.size(), 1u);
    EXPECT_FALSE(history[0]["error"].is_null());
    EXPECT_TRUE(history[0]["answers"].empty());

    auto trace = svc.get_trace(id, 2);
    EXPECT_EQ(trace["standalone_question"], "When was the first Harry Potter movie released?");
    EXPECT_EQ(trace["turn"], 2);
    EXPECT_EQ(status_of([&] { svc.get_trace(id, 3); }), 404);
    EXPECT_EQ(status_of([&] { svc.get_trace(id, 0); }), 404);
    EXPECT_EQ(status_of([&] { svc.post_message("0000000000000000", "hi"); }), 404);
    EXPECT_EQ(status_of([&] { svc.post_message(id, "  "); }), 422);
    EXPECT_EQ(svc.get_history(id).size(), 2u);
}

TEST(Sessions, ConcurrentTurnOnSameSessionIsRejected) {
    auto gated = std::make_shared<GatedBackend>("Who founded Intel?");
    SessionService svc(fixture::desk_engine(gated));
    auto a = svc.create_session();
    auto b = svc.create_session();
    auto first = std::async(std::launch::async, [&] { return svc.post_message(a, "Who founded Intel?"); });
    gated->wait_entered();
    EXPECT_EQ(status_of([&] { svc.post_message(a, "Where was Barack Obama born?"); }), 409);
    auto other = svc.post_message(b, "Where was Barack Obama born?");
    EXPECT_EQ(other.answers.size(), 1u);
    gated->release();
    auto r = first.get();
    EXPECT_EQ(r.answers.size(), 2u);
    EXPECT_EQ(svc.get_history(a).size(), 1u);
}

TEST(Sessions, IsolatedContexts) {
    auto rec = std::make_shared<GatedBackend>();
    SessionService svc(fixture::desk_engine(rec));
    auto a = svc.create_session();
    auto b = svc.create_session();
    svc.post_message(a, "Who is the author of Harry Potter?");
    svc.post_message(b, "Where was she born?");
    for (const auto& req : rec->requests()) {
        if (req.prompt.name == "rephrase") {
            EXPECT_EQ(req.vars.at("context").find("Rowling"), std::string::npos);
        }
    }
    EXPECT_EQ(svc.get_history(a).size(), 1u);
    EXPECT_EQ(svc.get_history(b).size(), 1u);
}

TEST(Sessions, ServiceMatchesDirectEngine) {
    auto engine = fixture::desk_engine();
    SessionService svc(engine);
    auto id = svc.create_session();
    SessionState direct;
    for (auto q : {"Who wrote Conversational Question Answering with Agents?", "In which year was it published?",
                   "Which venue published it?"}) {
        auto via_service = svc.post_message(id, q);
        auto via_engine = engine->process_turn(direct, q);
        EXPECT_EQ(via_service.answers, via_engine.answers) << q;
        EXPECT_EQ(via_service.standalone_question, via_engine.standalone_question);
    }
}

TEST(Sessions, PersistsJsonLines) {
    auto dir = std::filesystem::temp_directory_path() / "convkg-persist-test";
    std::filesystem::remove_all(dir);
    SessionService svc(fixture::desk_engine(), dir.string());
    auto id = svc.create_session();
    svc.post_message(id, "Who founded Intel?");
    std::ifstream in(dir / (id + ".jsonl"));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        EXPECT_NO_THROW(json::parse(line));
        ++n;
    }
    EXPECT_GE(n, 1u);
    std::filesystem::remove_all(dir);
}

TEST(Http, EndToEndOverLocalhost) {
    SessionService svc(fixture::desk_engine());
    httplib::Server server;
    register_routes(server, svc, "*");
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);

    auto health = cli.Get("/healthz");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

    auto created = cli.Post("/sessions", "{}", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    auto id = json::parse(created->body)["session_id"].get<std::string>();

    auto bad = cli.Post("/sessions", R"({"config":{"theta":0}})", "application/json");
    EXPECT_EQ(bad->status, 422);
    EXPECT_EQ(json::parse(bad->body)["error"]["status"], 422);

    auto m1 = cli.Post("/sessions/" + id + "/messages", R"({"question":"Who is the author of Harry Potter?"})",
                       "application/json");
    ASSERT_EQ(m1->status, 200);
    auto m2 = cli.Post("/sessions/" + id + "/messages", R"({"question":"When was its first movie released?"})",
                       "application/json");
    ASSERT_EQ(m2->status, 200);
    auto body = json::parse(m2->body);
    EXPECT_EQ(body["turn"], 2);
    EXPECT_EQ(body["answers"][0]["value"], "2001");
    EXPECT_TRUE(body["error"].is_null());

    auto history = cli.Get("/sessions/" + id + "/history");
    EXPECT_EQ(json::parse(history->body).size(), 2u);
    auto trace = cli.Get("/sessions/" + id + "/trace/2");
    EXPECT_EQ(trace->status, 200);
    EXPECT_TRUE(json::parse(trace->body).contains("kept_predicates"));
    EXPECT_EQ(cli.Get("/sessions/" + id + "/trace/9")->status, 404);
    EXPECT_EQ(cli.Get("/sessions/ffffffffffffffff/history")->status, 404);
    EXPECT_EQ(cli.Post("/sessions/" + id + "/messages", "not json", "application/json")->status, 422);
    EXPECT_EQ(cli.Get("/sessions/" + id)->status, 200);
    auto preflight = cli.Options("/sessions");
    EXPECT_EQ(preflight->status, 204);

    server.stop();
    th.join();
}
