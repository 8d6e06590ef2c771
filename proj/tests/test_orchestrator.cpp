#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include "convkg/orchestrator.hpp"
#include "support.hpp"

using namespace convkg;
using nlohmann::json;
using fixture::kg_iri;

namespace {

SessionState fresh(const std::string& id = "t") {
    SessionState s;
    s.session_id = id;
    return s;
}

void expect_sound_route(const TurnResult& r) {
    ASSERT_GE(r.route_log.size(), 2u);
    EXPECT_EQ(r.route_log.front(), Route::chat_agent);
    EXPECT_EQ(r.route_log.back(), Route::end);
    EXPECT_LE(r.route_log.size(), kMaxRouteSteps + 1);
    for (std::size_t i = 1; i < r.route_log.size(); ++i) {
        EXPECT_TRUE(route_allowed(r.route_log[i - 1], r.route_log[i]))
            << to_string(r.route_log[i - 1]) << " -> " << to_string(r.route_log[i]);
    }
    EXPECT_EQ(r.error_message.find("route"), std::string::npos) << r.error_message;
}

}  // namespace

TEST(Dialogue, DependentTurnResolvesThroughHistory) {
    auto engine = fixture::desk_engine();
    auto s = fresh();
    auto t1 = engine->process_turn(s, "Who is the author of Harry Potter?");
    ASSERT_TRUE(t1.ok()) << t1.error_message;
    ASSERT_EQ(t1.answers.size(), 1u);
    EXPECT_EQ(t1.answers[0].value, kg_iri("J._K._Rowling"));
    EXPECT_EQ(t1.answers[0].display_label, "J. K. Rowling");

    auto t2 = engine->process_turn(s, "When was its first movie released?");
    ASSERT_TRUE(t2.ok()) << t2.error_message;
    ASSERT_EQ(t2.answers.size(), 1u);
    EXPECT_EQ(t2.answers[0].value, "2001");
    EXPECT_EQ(t2.standalone_question, "When was the first Harry Potter movie released?");
    EXPECT_EQ(s.dialogue.size(), 2u);
    expect_sound_route(t2);
    std::vector<Route> want{Route::chat_agent, Route::qir_agent, Route::classifier_agent, Route::rephraser_agent,
                            Route::qir_agent, Route::chat_agent, Route::query_agent, Route::matching_agent,
                            Route::query_agent, Route::chat_agent, Route::end};
    EXPECT_EQ(t2.route_log, want);
}

TEST(Dialogue, SingleTurnModeCannotResolveReference) {
    EngineConfig cfg;
    cfg.system_mode = SystemMode::single_turn;
    auto engine = fixture::desk_engine(nullptr, cfg);
    auto s = fresh();
    engine->process_turn(s, "Who is the author of Harry Potter?");
    auto t2 = engine->process_turn(s, "When was its first movie released?");
    EXPECT_TRUE(t2.answers.empty());
    EXPECT_FALSE(t2.ok());
    EXPECT_EQ(t2.standalone_question, "When was its first movie released?");
    expect_sound_route(t2);
}

TEST(Dialogue, FailedTurnStillAppends) {
    auto engine = fixture::desk_engine();
    auto s = fresh();
    auto r = engine->process_turn(s, "Who founded Microsoft?");
    EXPECT_EQ(r.error_stage, Stage::linking);
    EXPECT_TRUE(r.answers.empty());
    ASSERT_EQ(s.dialogue.size(), 1u);
    EXPECT_EQ(s.dialogue.turns()[0].question, "Who founded Microsoft?");
    EXPECT_TRUE(s.dialogue.turns()[0].answers.empty());
    EXPECT_THROW(engine->process_turn(s, "   "), std::invalid_argument);
    EXPECT_EQ(s.dialogue.size(), 1u);
}

TEST(Dialogue, HistoryIsMonotone) {
    auto engine = fixture::desk_engine();
    auto s = fresh();
    std::vector<Turn> seen;
    for (auto q : {"Who wrote Conversational Question Answering with Agents?", "In which year was it published?",
                   "Which venue published it?", "Who founded Microsoft?"}) {
        engine->process_turn(s, q);
        ASSERT_EQ(s.dialogue.size(), seen.size() + 1);
        for (std::size_t i = 0; i < seen.size(); ++i) {
            EXPECT_EQ(s.dialogue.turns()[i].question, seen[i].question);
            EXPECT_EQ(s.dialogue.turns()[i].answers, seen[i].answers);
        }
        seen = s.dialogue.turns();
    }
    EXPECT_EQ(seen[1].answers, std::vector<Answer>{Answer::literal("2023")});
}

TEST(Reformulation, SentencesAndNotFound) {
    EngineConfig cfg;
    cfg.reformulation_enabled = true;
    auto engine = fixture::desk_engine(nullptr, cfg);
    auto s = fresh();
    auto a = engine->process_turn(s, "When was the first Harry Potter movie released?");
    EXPECT_EQ(a.final_text, "The first Harry Potter movie was released in 2001.");
    EXPECT_EQ(a.answers, std::vector<Answer>{Answer::literal("2001")});

    auto b = engine->process_turn(s, "Is Michelle Obama the wife of Barack Obama?");
    EXPECT_EQ(b.final_text, "Yes, Michelle Obama is the wife of Barack Obama.");

    auto llm = fixture::desk_backend();
    auto engine2 = fixture::desk_engine(llm, cfg);
    auto s2 = fresh();
    auto c = engine2->process_turn(s2, "Who founded Microsoft?");
    EXPECT_EQ(c.final_text, kNotFoundSentence);
    EXPECT_EQ(llm->calls_for("reformulate_answer"), 0u);

    auto d = engine2->process_turn(s2, "Where was Barack Obama born?");
    EXPECT_EQ(d.final_text, "Honolulu");
    EXPECT_TRUE(d.degraded_flags.count("reformulation_fallback"));
}

TEST(Translation, GermanEnglishAndEmpty) {
    EngineConfig cfg;
    cfg.translation_enabled = true;
    cfg.reformulation_enabled = true;
    auto engine = fixture::desk_engine(nullptr, cfg);
    auto s = fresh();
    auto r = engine->process_turn(s, "Wer gründete Intel?");
    EXPECT_EQ(r.question, "Who founded Intel?");
    EXPECT_EQ(r.final_text, "Intel was founded by Robert Noyce and Gordon Moore.");
    EXPECT_EQ(s.dialogue.turns()[0].question, "Who founded Intel?");

    auto en = engine->process_turn(s, "Who founded Intel?");
    EXPECT_EQ(en.question, "Who founded Intel?");
    EXPECT_FALSE(en.degraded_flags.count("translation_fallback"));

    auto llm = fixture::desk_backend();
    EXPECT_THROW(translate_question(*llm, fixture::prompts().get(task::translate), " "), std::invalid_argument);
    EXPECT_EQ(llm->calls(), 0u);
    bool degraded = false;
    EXPECT_EQ(translate_question(*llm, fixture::prompts().get(task::translate), "Qui a fondé Intel?", &degraded),
              "Qui a fondé Intel?");
    EXPECT_TRUE(degraded);
}

TEST(Routes, GraphIsClosedAndTerminates) {
    std::set<Route> nodes{Route::chat_agent, Route::classifier_agent, Route::rephraser_agent, Route::qir_agent,
                          Route::matching_agent, Route::query_agent};
    for (const auto& e : route_edges()) {
        EXPECT_NE(e.from, Route::end);
        EXPECT_TRUE(nodes.count(e.from));
    }
    // END reachable from every node
    std::set<Route> reaches{Route::end};
    for (bool grew = true; grew;) {
        grew = false;
        for (const auto& e : route_edges()) {
            if (reaches.count(e.to) && !reaches.count(e.from)) grew = reaches.insert(e.from).second;
        }
    }
    for (auto n : nodes) EXPECT_TRUE(reaches.count(n)) << to_string(n);
    // every node reachable from chat_agent
    std::set<Route> reach{Route::chat_agent};
    for (bool grew = true; grew;) {
        grew = false;
        for (const auto& e : route_edges()) {
            if (reach.count(e.from) && !reach.count(e.to)) grew = reach.insert(e.to).second;
        }
    }
    EXPECT_EQ(reach.size(), nodes.size() + 1);
    EXPECT_FALSE(route_allowed(Route::query_agent, Route::end));
    EXPECT_FALSE(route_allowed(Route::rephraser_agent, Route::matching_agent));
}

TEST(Routes, PathologicalBackendsStillTerminate) {
    std::mt19937 rng(3);
    std::vector<std::string> garbage{"", "Dependent", "SelfContained", "{}", "{\"label\":\"Intel\"}",
                                     "{\"triples\":[[\"?x\",\"founded\",\"Intel\"]]}",
                                     "{\"triples\":[[\"Intel\",\"founded\",\"?x\"]],\"form\":\"count\"}",
                                     "{\"predicates\":[\"location\"]}", "\x01\xff", "{\"label\":\"Nope\"}"};
    std::vector<std::string> tasks{"classify", "rephrase", "extract_triples", "select_vertex", "select_predicates"};
    for (int trial = 0; trial < 60; ++trial) {
        json rules = json::array();
        for (const auto& t : tasks) {
            if (rng() % 5 == 0) continue;
            rules.push_back({{"task", t}, {"output", garbage[rng() % garbage.size()]}, {"fail_first", rng() % 3}});
        }
        rules.push_back({{"task", "translate"}, {"output", "x"}});
        auto llm = fixture::scripted(rules);
        EngineConfig cfg;
        cfg.theta = 1 + rng() % 3;
        cfg.system_mode = rng() % 2 ? SystemMode::multi_turn : SystemMode::single_turn;
        auto engine = fixture::desk_engine(llm, cfg);
        auto s = fresh();
        auto r1 = engine->process_turn(s, "Who founded Intel?");
        auto r2 = engine->process_turn(s, "Where was she born?");
        expect_sound_route(r1);
        expect_sound_route(r2);
        EXPECT_EQ(s.dialogue.size(), 2u);
        EXPECT_EQ(r1.llm_calls + r2.llm_calls, llm->calls());
    }
}

TEST(Budget, LlmCallsBoundedByTheta) {
    for (std::size_t theta = 1; theta <= 3; ++theta) {
        auto llm = fixture::scripted(json::array({
            {{"task", "classify"}, {"output", "Dependent"}, {"fail_first", 10}, {"fail_output", "?"}},
        }));
        EngineConfig cfg;
        cfg.theta = theta;
        auto engine = fixture::desk_engine(llm, cfg);
        auto s = fresh();
        auto r = engine->process_turn(s, "Where was she born?");
        EXPECT_EQ(r.error_stage, Stage::classification);
        EXPECT_EQ(llm->calls(), theta);
    }

    auto llm = fixture::desk_backend();
    auto engine = fixture::desk_engine(llm);
    auto s = fresh();
    auto r = engine->process_turn(s, "Is Michelle Obama the wife of Barack Obama?");
    // classify + extract + two vertices + filter
    EXPECT_EQ(r.llm_calls, 5u);
    EXPECT_EQ(llm->calls(), 5u);
    EXPECT_LE(r.llm_calls, 3 * (3 + r.trace["qir"]["entities"].size() + 1));
}

TEST(Modes, MultiTurnEqualsSingleTurnOnStandaloneQuestions) {
    EngineConfig single;
    single.system_mode = SystemMode::single_turn;
    auto multi_engine = fixture::desk_engine();
    auto single_engine = fixture::desk_engine(nullptr, single);
    for (auto q : {"Who founded Intel?", "Where was Barack Obama born?", "How many films are in the Harry Potter film series?",
                   "Is Michelle Obama the wife of Barack Obama?", "Who directed Harry Potter and the Chamber of Secrets?"}) {
        auto a = fresh(), b = fresh();
        auto ra = multi_engine->process_turn(a, q);
        auto rb = single_engine->process_turn(b, q);
        EXPECT_EQ(ra.answers, rb.answers) << q;
        EXPECT_TRUE(ra.ok() && rb.ok()) << q;
    }
}

TEST(Trace, WrittenPerTurnWithPipelineRecord) {
    auto dir = std::filesystem::temp_directory_path() / ("convkg-trace-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    EngineConfig cfg;
    cfg.trace_dir = dir.string();
    auto engine = fixture::desk_engine(nullptr, cfg);
    auto s = fresh("sess");
    auto r = engine->process_turn(s, "Who founded Intel?");
    ASSERT_TRUE(r.trace_ref);
    EXPECT_EQ(std::filesystem::path(*r.trace_ref).filename(), "sess-turn-1.json");
    std::ifstream in(*r.trace_ref);
    auto t = json::parse(in);
    EXPECT_EQ(t["turn"], 1);
    EXPECT_EQ(t["question_type"], "SelfContained");
    EXPECT_EQ(t["all_predicates"].size(), 4u);
    EXPECT_EQ(t["kept_predicates"].size(), 3u);
    EXPECT_EQ(t["executed"].size(), 3u);
    EXPECT_EQ(t["candidates"].size(), 4u);
    EXPECT_TRUE(t["vertex_candidates"].contains("Intel"));
    EXPECT_EQ(t["turn_result"]["answers"].size(), 2u);
    std::filesystem::remove_all(dir);
}

TEST(Engine, FromConfigFile) {
    auto cfg = EngineConfig::load(fixture::desk_conf());
    auto engine = Engine::from_config(cfg);
    auto s = fresh();
    auto r = engine->process_turn(s, "Where was Barack Obama born?");
    ASSERT_EQ(r.answers.size(), 1u);
    EXPECT_EQ(r.answers[0].value, kg_iri("Honolulu"));
    EngineConfig none;
    EXPECT_THROW(Engine::from_config(none), ConfigError);
}
