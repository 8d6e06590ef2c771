#include <sstream>

#include <gtest/gtest.h>

#include "convkg/model.hpp"

using namespace convkg;

TEST(Answer, KindInvariants) {
    EXPECT_FALSE(answer_violation(Answer::entity("http://example.org/kg/Intel")));
    EXPECT_TRUE(answer_violation(Answer::entity("Intel")));
    EXPECT_FALSE(answer_violation(Answer::count(3)));
    EXPECT_TRUE(answer_violation(Answer{AnswerKind::count, "-1", std::nullopt}));
    EXPECT_TRUE(answer_violation(Answer{AnswerKind::count, "three", std::nullopt}));
    EXPECT_FALSE(answer_violation(Answer::boolean(false)));
    EXPECT_TRUE(answer_violation(Answer{AnswerKind::boolean, "True", std::nullopt}));
    EXPECT_EQ(Answer::boolean(true).value, "true");
}

TEST(Answer, EqualityIgnoresLabel) {
    EXPECT_EQ(Answer::entity("http://x/a", "A"), Answer::entity("http://x/a"));
    EXPECT_NE(Answer::literal("3"), Answer::count(3));
}

TEST(Dialogue, AppendIsPersistent) {
    Dialogue d0;
    auto d1 = append_turn(d0, "q1", {Answer::literal("a")});
    auto d2 = append_turn(d1, "q2", {});
    EXPECT_TRUE(d0.empty());
    ASSERT_EQ(d1.size(), 1u);
    ASSERT_EQ(d2.size(), 2u);
    EXPECT_EQ(d2.turns()[0].question, "q1");
    EXPECT_LT(d2.turns()[0].asked_at, d2.turns()[1].asked_at);
    EXPECT_THROW(append_turn(d2, "  ", {}), std::invalid_argument);
}

TEST(Context, PrefixOfEachTurn) {
    Dialogue d;
    std::vector<Answer> many;
    for (int i = 0; i < 7; ++i) many.push_back(Answer::literal(std::to_string(i)));
    d = append_turn(d, "first", many);
    d = append_turn(d, "second", {Answer::literal("x")});
    auto ctx = build_context(d, 3);
    ASSERT_EQ(ctx.pairs.size(), 2u);
    ASSERT_EQ(ctx.pairs[0].truncated_answers.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ctx.pairs[0].truncated_answers[i], many[i]);
    EXPECT_EQ(ctx.pairs[1].truncated_answers.size(), 1u);

    auto text = ctx.render();
    EXPECT_NE(text.find("Q1: first"), std::string::npos);
    EXPECT_NE(text.find("A1: 0; 1; 2"), std::string::npos);
    EXPECT_EQ(text.find("; 3"), std::string::npos);
}

TEST(Context, EmptyAnswersRenderPlaceholder) {
    auto d = append_turn(Dialogue{}, "q", {});
    EXPECT_NE(build_context(d, 100).render().find("(no answer)"), std::string::npos);
    EXPECT_TRUE(build_context(Dialogue{}, 100).empty());
}

TEST(Qir, DerivedSetsAndTarget) {
    auto qir = make_qir({{QirTerm::variable("?who"), "founded", QirTerm::known("Intel")}}, QuestionForm::list);
    EXPECT_EQ(qir.entities, std::set<std::string>{"Intel"});
    EXPECT_EQ(qir.variables, std::set<std::string>{"?who"});
    EXPECT_EQ(qir.relations, std::set<std::string>{"founded"});
    EXPECT_EQ(qir.target, "?who");
    EXPECT_FALSE(qir_violation(qir));

    auto two = make_qir({{QirTerm::known("A"), "r", QirTerm::variable("?x")},
                         {QirTerm::variable("?x"), "s", QirTerm::variable("?y")}},
                        QuestionForm::list, "?y");
    EXPECT_EQ(two.target, "?y");
    auto fallback = make_qir(two.facts, QuestionForm::list, "?nope");
    EXPECT_EQ(fallback.target, "?x");
}

TEST(Qir, Violations) {
    auto boolean = make_qir({{QirTerm::known("A"), "r", QirTerm::known("B")}}, QuestionForm::boolean);
    EXPECT_FALSE(qir_violation(boolean));
    EXPECT_TRUE(boolean.target.empty());

    auto no_var = make_qir({{QirTerm::known("A"), "r", QirTerm::known("B")}}, QuestionForm::list);
    EXPECT_TRUE(qir_violation(no_var));

    auto no_entity = make_qir({{QirTerm::variable("?a"), "r", QirTerm::variable("?b")}}, QuestionForm::list);
    EXPECT_TRUE(qir_violation(no_entity));

    auto bad_name = make_qir({{QirTerm::known("A"), "r", QirTerm::variable("?a-b")}}, QuestionForm::list);
    EXPECT_TRUE(qir_violation(bad_name));

    auto empty_rel = make_qir({{QirTerm::known("A"), "", QirTerm::variable("?a")}}, QuestionForm::list);
    EXPECT_TRUE(qir_violation(empty_rel));
}

TEST(Config, DefaultsMatchPublishedSettings) {
    EngineConfig c;
    EXPECT_EQ(c.theta, 3u);
    EXPECT_EQ(c.context_limit, 100u);
    EXPECT_EQ(c.vertex_limit, 600u);
    EXPECT_EQ(c.query_num, 40u);
    EXPECT_EQ(c.system_mode, SystemMode::multi_turn);
    EXPECT_FALSE(c.translation_enabled);
    EXPECT_FALSE(c.reformulation_enabled);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParseKeyValueFile) {
    std::istringstream in(R"(# desk
[engine]
theta = 2
l = 5
mode = single_turn
label_predicates = http://www.w3.org/2000/01/rdf-schema#label, http://schema.org/name   # two
translation_enabled = true
)");
    auto c = EngineConfig::parse(in);
    EXPECT_EQ(c.theta, 2u);
    EXPECT_EQ(c.context_limit, 5u);
    EXPECT_EQ(c.system_mode, SystemMode::single_turn);
    ASSERT_EQ(c.label_predicates.size(), 2u);
    EXPECT_EQ(c.label_predicates[0], "http://www.w3.org/2000/01/rdf-schema#label");
    EXPECT_TRUE(c.translation_enabled);
}

TEST(Config, RejectsBadValues) {
    EngineConfig c;
    EXPECT_THROW(c.set("no_such_key", "1"), ConfigError);
    EXPECT_THROW(c.set("system_mode", "sideways"), ConfigError);
    EXPECT_THROW(c.set("theta", "abc"), ConfigError);
    std::istringstream zero("theta = 0\n");
    EXPECT_THROW(EngineConfig::parse(zero), ConfigError);
    std::istringstream no_eq("theta 3\n");
    EXPECT_THROW(EngineConfig::parse(no_eq), ConfigError);
}

TEST(Route, Names) {
    EXPECT_EQ(to_string(Route::end), "END");
    EXPECT_EQ(to_string(Route::matching_agent), "matching_agent");
}
