#include <gtest/gtest.h>

#include "convkg/llm.hpp"
#include "convkg/retry.hpp"
#include "support.hpp"

using namespace convkg;
using nlohmann::json;

TEST(PromptLibrary, ShippedPromptsLoadWithStrategies) {
    const auto& lib = fixture::prompts();
    EXPECT_EQ(lib.get(task::classify).contract, OutputContract::label);
    EXPECT_EQ(lib.get(task::classify).strategy, PromptStrategy::zero_shot);
    const auto& triples = lib.get(task::extract_triples);
    EXPECT_EQ(triples.strategy, PromptStrategy::chain_of_thought_few_shot);
    EXPECT_EQ(triples.examples.size(), 2u);
    EXPECT_EQ(lib.get(task::select_vertex).contract, OutputContract::json_object);
    EXPECT_EQ(lib.get(task::select_predicates).contract, OutputContract::json_object);
    for (auto t : {task::classify, task::rephrase, task::extract_triples, task::select_vertex,
                   task::select_predicates, task::reformulate_answer, task::translate}) {
        EXPECT_FALSE(lib.get(t).violation()) << t;
    }
    EXPECT_THROW(lib.get("nope"), std::exception);
}

TEST(PromptSpec, StrategyNeedsMatchingExamples) {
    PromptSpec p{"x", "do it", PromptStrategy::few_shot, {}, OutputContract::free_text};
    EXPECT_TRUE(p.violation());
    p.examples.push_back({"in", "out"});
    EXPECT_FALSE(p.violation());
    p.strategy = PromptStrategy::zero_shot;
    EXPECT_TRUE(p.violation());
}

TEST(Messages, InstructionExamplesThenPayload) {
    PromptSpec p{"t", "Context:\n{context}\nAnswer {missing}", PromptStrategy::few_shot,
                 {{"q1", "a1"}, {"q2", "a2"}}, OutputContract::free_text};
    LlmRequest req{p, "the question", {{"context", "C"}}};
    auto msgs = assemble_messages(req);
    ASSERT_EQ(msgs.size(), 6u);
    EXPECT_EQ(msgs[0].role, "system");
    EXPECT_EQ(msgs[0].content, "Context:\nC\nAnswer {missing}");
    EXPECT_EQ(msgs[1].role, "user");
    EXPECT_EQ(msgs[2].role, "assistant");
    EXPECT_EQ(msgs[4].content, "a2");
    EXPECT_EQ(msgs[5].role, "user");
    EXPECT_EQ(msgs[5].content, "the question");
}

TEST(HttpChat, RequestBodyCarriesJsonContract) {
    LlmSettings s;
    s.model = "m";
    HttpChatBackend backend(s);
    LlmRequest req{fixture::prompts().get(task::select_vertex), "Intel", {{"entity", "Intel"}, {"candidates", "Intel\n"}}};
    auto body = backend.request_body(req);
    EXPECT_EQ(body["model"], "m");
    EXPECT_EQ(body["temperature"], 0.0);
    EXPECT_EQ(body["response_format"]["type"], "json_object");
    EXPECT_EQ(body["messages"].back()["content"], "Intel");

    LlmRequest plain{fixture::prompts().get(task::classify), "q", {}};
    EXPECT_FALSE(backend.request_body(plain).contains("response_format"));
}

TEST(Scripted, FirstMatchingRuleWins) {
    auto llm = fixture::scripted(json::array({
        {{"task", "classify"}, {"equals", "Where was she born?"}, {"output", "Dependent"}},
        {{"task", "classify"}, {"contains", json::array({"INTEL", "found"})}, {"output", "SelfContained"}},
        {{"task", "rephrase"}, {"field", "context"}, {"contains", "Rowling"}, {"output", "ok"}},
    }));
    PromptSpec classify{"classify", "x", PromptStrategy::zero_shot, {}, OutputContract::label};
    PromptSpec rephrase{"rephrase", "x", PromptStrategy::zero_shot, {}, OutputContract::free_text};
    EXPECT_EQ(llm->complete({classify, " Where was she born? ", {}}).raw_text, "Dependent");
    EXPECT_EQ(llm->complete({classify, "who founded intel", {}}).raw_text, "SelfContained");
    EXPECT_EQ(llm->complete({rephrase, "q", {{"context", "A1: J. K. Rowling"}}}).raw_text, "ok");
    try {
        llm->complete({rephrase, "q", {{"context", "nothing"}}});
        FAIL();
    } catch (const LlmError& e) {
        EXPECT_FALSE(e.retriable());
    }
    EXPECT_EQ(llm->calls(), 4u);
    EXPECT_EQ(llm->calls_for("classify"), 2u);
}

TEST(Scripted, FailFirstThenSucceed) {
    auto llm = fixture::scripted(json::array({
        {{"task", "a"}, {"output", "good"}, {"fail_first", 2}, {"fail_output", "bad"}},
        {{"task", "b"}, {"output", "fine"}, {"fail_first", 1}},
    }));
    PromptSpec a{"a", "x", PromptStrategy::zero_shot, {}, OutputContract::free_text};
    PromptSpec b{"b", "x", PromptStrategy::zero_shot, {}, OutputContract::free_text};
    EXPECT_EQ(llm->complete({a, "", {}}).raw_text, "bad");
    EXPECT_EQ(llm->complete({a, "", {}}).raw_text, "bad");
    EXPECT_EQ(llm->complete({a, "", {}}).raw_text, "good");
    EXPECT_THROW(llm->complete({b, "", {}}), LlmError);
    EXPECT_EQ(llm->complete({b, "", {}}).raw_text, "fine");
    llm->reset();
    EXPECT_EQ(llm->calls(), 0u);
    EXPECT_EQ(llm->complete({a, "", {}}).raw_text, "bad");
}

TEST(Scripted, RejectsEmptyRules) {
    EXPECT_THROW(ScriptedBackend({}), std::invalid_argument);
    EXPECT_THROW(ScriptedBackend::from_json(json::object()), std::invalid_argument);
}

TEST(JsonFinder, WholeFencedAndTrailing) {
    EXPECT_EQ((*find_json_object(R"({"a":1})"))["a"], 1);
    EXPECT_EQ((*find_json_object("Sure:\n```json\n{\"a\": 2}\n```\n"))["a"], 2);
    auto cot = find_json_object("We compare {founder} and {location}.\nSo: {\"predicates\": [\"x\"]}");
    ASSERT_TRUE(cot);
    EXPECT_TRUE(cot->contains("predicates"));
    EXPECT_FALSE(find_json_object("no object here"));
    EXPECT_FALSE(find_json_object("[1,2,3]"));
    EXPECT_FALSE(find_json_object("{{{{"));
}

TEST(Retry, BoundedAttempts) {
    std::size_t calls = 0;
    auto r = retry_bounded<int>(3, [&](std::string& why) -> std::optional<int> {
        ++calls;
        why = "nope";
        return std::nullopt;
    });
    EXPECT_FALSE(r.value);
    EXPECT_EQ(r.attempts, 3u);
    EXPECT_EQ(calls, 3u);
    EXPECT_EQ(r.last_failure, "nope");

    calls = 0;
    auto t = retry_bounded<int>(3, [&](std::string&) -> std::optional<int> {
        if (++calls < 2) throw LlmError("flaky", true, "x");
        return 7;
    });
    EXPECT_EQ(*t.value, 7);
    EXPECT_EQ(t.attempts, 2u);

    EXPECT_THROW(retry_bounded<int>(3, [](std::string&) -> std::optional<int> { throw LlmError("auth", false, "x"); }),
                 LlmError);
}
