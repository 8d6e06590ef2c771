// Acceptance runner: one PASS/FAIL/SKIP line per gating criterion.
// Exit status is non-zero when any gating criterion fails.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "convkg/eval.hpp"
#include "convkg/matching.hpp"
#include "convkg/orchestrator.hpp"
#include "convkg/planning.hpp"
#include "convkg/understanding.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace convkg;
using nlohmann::json;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    if (!ok) ++failures;
}

void skip(const std::string& name, const std::string& detail) { std::cout << "SKIP " << name << ": " << detail << "\n"; }

template <typename Fn>
void criterion(const std::string& name, Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

std::vector<eval::BenchmarkItem> bench(const std::string& file) {
    return eval::load_benchmark(fixture::source_path("data/desk/" + file));
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

void desk_suite() {
    criterion("desk-end-to-end", [] {
        auto t0 = std::chrono::steady_clock::now();
        auto engine = Engine::from_config(EngineConfig::load(fixture::desk_conf()));
        auto single = eval::run_benchmark(*engine, bench("desk-single.json"), eval::RunMode::single);
        auto dialogue = eval::run_benchmark(*engine, bench("desk-dialogues.json"), eval::RunMode::dialogue);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::size_t n = single.items.size() + dialogue.items.size();
        double f1 = 0, p1 = 0;
        for (const auto* r : {&single, &dialogue}) {
            for (const auto& item : r->items) {
                f1 += item.set.f1;
                p1 += item.ranked.p_at_1;
            }
        }
        f1 /= static_cast<double>(n);
        p1 /= static_cast<double>(n);
        report("desk-end-to-end", n == 12 && f1 == 1.0 && p1 == 1.0 && secs < 5.0,
               std::to_string(n) + " questions, F1=" + fmt(f1) + " P@1=" + fmt(p1) + " in " + fmt(secs) + " s");
    });
}

void retention() {
    criterion("retention", [] {
        auto engine = fixture::desk_engine();
        auto items = bench("desk-dialogues.json");
        auto dialogue = eval::run_benchmark(*engine, items, eval::RunMode::dialogue);
        auto standalone = eval::run_benchmark(*engine, items, eval::RunMode::single);
        std::size_t equal = 0;
        for (std::size_t i = 0; i < items.size(); ++i) {
            equal += dialogue.items[i].predicted == standalone.items[i].predicted && !dialogue.items[i].predicted.empty();
        }
        double pct = eval::retention_percent(dialogue, standalone);
        report("retention", equal == items.size() && pct == 100.0,
               std::to_string(equal) + "/" + std::to_string(items.size()) + " turns equal, retention " + fmt(pct) + "%");
    });
}

void metric_oracle() {
    criterion("metric-oracle", [] {
        auto cases = oracle::metric_cases();
        std::size_t ok = 0;
        for (const auto& c : cases) ok += oracle::metric_case_holds(c);
        report("metric-oracle", cases.size() >= 10 && ok == cases.size(),
               std::to_string(ok) + "/" + std::to_string(cases.size()) + " hand-computed cases within 1e-9");
    });
}

void generation_oracle() {
    criterion("generation-oracle", [] {
        std::mt19937 rng(20240611);
        std::size_t gen_ok = 0, trunc_ok = 0;
        for (int i = 0; i < 200; ++i) {
            auto plan = oracle::random_plan(rng);
            gen_ok += oracle::generation_matches(plan);
            auto all = generate(plan.qir, plan.maps).candidates;
            trunc_ok += oracle::truncation_minimal(all, 1 + rng() % 8);
        }
        report("generation-oracle", gen_ok == 200 && trunc_ok == 200,
               "generate " + std::to_string(gen_ok) + "/200, truncate minimal " + std::to_string(trunc_ok) + "/200");
    });
}

void query_budget() {
    criterion("query-budget", [] {
        auto engine = fixture::desk_engine();
        std::size_t worst = 0;
        for (auto file : {"desk-single.json", "desk-absent.json"}) {
            auto r = eval::run_benchmark(*engine, bench(file), eval::RunMode::single);
            worst = std::max(worst, r.max_executed_queries);
        }
        auto d = eval::run_benchmark(*engine, bench("desk-dialogues.json"), eval::RunMode::dialogue);
        worst = std::max(worst, d.max_executed_queries);

        SessionState s;
        auto intel = engine->process_turn(s, "Who founded Intel?");
        bool pruned = intel.executed_queries < intel.candidate_queries;
        report("query-budget", worst <= engine->config().query_num && pruned,
               "max executed " + std::to_string(worst) + " <= " + std::to_string(engine->config().query_num) +
                   ", Intel |Q'|=" + std::to_string(intel.executed_queries) +
                   " < |Q|=" + std::to_string(intel.candidate_queries));
    });
}

std::string random_input(std::mt19937& rng, int i) {
    static const std::vector<std::string> seeds{
        R"({"triples":[["?x","founded","Intel"]],"form":"list","target":"?x"})",
        R"({"label":"Koto"})",
        R"({"predicates":["founder","http://x/location"]})",
        R"({"triples":[{"subject":"A","relation":"r","object":"?b"}],"variables":["b"],"form":"boolean"})"};
    if (i % 2 == 0) {
        std::string s(rng() % 96, '\0');
        for (auto& c : s) c = static_cast<char>(rng() % 256);
        return s;
    }
    auto s = seeds[rng() % seeds.size()];
    for (int k = 0, edits = 1 + static_cast<int>(rng() % 4); k < edits && !s.empty(); ++k) {
        auto pos = rng() % s.size();
        switch (rng() % 3) {
            case 0: s[pos] = static_cast<char>(rng() % 256); break;
            case 1: s.erase(pos, 1); break;
            default: s.insert(pos, 1, "{}[]\",:?"[rng() % 8]); break;
        }
    }
    return s;
}

void robustness() {
    criterion("validator-robustness", [] {
        std::mt19937 rng(77);
        std::vector<kg::VertexHit> cands{{"http://x/Koto", "Koto"}, {"http://x/Biwa", "Biwa"}};
        std::vector<std::string> preds{"http://x/founder", "http://x/location"};
        std::size_t classified = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            auto input = random_input(rng, i);
            bool ok = true;
            try {
                auto t = validate_triples({input});
                if (auto* q = std::get_if<QIR>(&t)) ok = ok && !qir_violation(*q);
                auto v = validate_vertex(input, cands);
                if (auto* iri = std::get_if<std::string>(&v)) ok = ok && (*iri == cands[0].iri || *iri == cands[1].iri);
                auto p = validate_predicate_selection(input, preds);
                if (auto* kept = std::get_if<std::vector<std::string>>(&p)) ok = ok && !kept->empty();
            } catch (...) {
                ok = false;
            }
            classified += ok;
        }

        std::size_t failk_ok = 0, failk_total = 0;
        const std::string good = R"({"triples":[["?who","founded","Intel"]],"target":"?who"})";
        for (std::size_t theta = 1; theta <= 3; ++theta) {
            for (std::size_t k = 1; k <= 4; ++k) {
                ++failk_total;
                auto llm = fixture::scripted(json::array(
                    {{{"task", "extract_triples"}, {"output", good}, {"fail_first", k - 1}, {"fail_output", "nope"}}}));
                bool succeeded = false;
                std::size_t attempts = 0;
                try {
                    build_qir(*llm, fixture::prompts(), "Who founded Intel?", theta, &attempts);
                    succeeded = true;
                } catch (const PipelineError&) {
                }
                bool expected = k <= theta;
                failk_ok += succeeded == expected && llm->calls() == std::min(k, theta) && (!succeeded || attempts == k);
            }
        }
        report("validator-robustness", classified == n && failk_ok == failk_total,
               std::to_string(classified) + "/" + std::to_string(n) + " fuzz inputs classified, fail-k " +
                   std::to_string(failk_ok) + "/" + std::to_string(failk_total) + " for theta 1..3");
    });
}

void sparql_correctness() {
    criterion("embedded-sparql", [] {
        std::mt19937 rng(4242);
        std::size_t ok = 0, total = 0;
        for (int g = 0; g < 100; ++g) {
            auto graph = oracle::random_graph(rng);
            auto store = oracle::store_of(graph);
            for (int k = 0; k < 10; ++k) {
                ++total;
                ok += oracle::agrees(store, graph, oracle::random_bgp(rng));
            }
        }
        report("embedded-sparql", ok == total,
               std::to_string(ok) + "/" + std::to_string(total) + " queries over 100 graphs match the nested-loop oracle");
    });
}

void no_hallucination() {
    criterion("no-hallucination", [] {
        auto engine = fixture::desk_engine();
        auto r = eval::run_benchmark(*engine, bench("desk-absent.json"), eval::RunMode::single);
        std::size_t empty = 0;
        for (const auto& item : r.items) empty += item.predicted.empty();
        report("no-hallucination", r.items.size() == 5 && empty == 5,
               std::to_string(empty) + "/" + std::to_string(r.items.size()) + " absent-fact questions answered empty");
    });
}

void live_qald() {
    const char* key_env = std::getenv("CONVKG_API_KEY_ENV");
    std::string key_name = key_env && *key_env ? key_env : "OPENAI_API_KEY";
    const char* key = std::getenv(key_name.c_str());
    const char* file = std::getenv("CONVKG_QALD_FILE");
    if (!key || !*key) {
        skip("live-qald", key_name + " is not set");
        return;
    }
    if (!file || !std::filesystem::exists(file)) {
        skip("live-qald", "CONVKG_QALD_FILE does not name a benchmark file");
        return;
    }
    try {
        EngineConfig cfg;
        const char* endpoint = std::getenv("CONVKG_QALD_ENDPOINT");
        cfg.endpoint_url = endpoint && *endpoint ? endpoint : "https://dbpedia.org/sparql";
        cfg.llm.api_key_env = key_name;
        cfg.system_mode = SystemMode::single_turn;
        auto engine = Engine::from_config(cfg);
        auto r = eval::run_benchmark(*engine, eval::load_benchmark(file), eval::RunMode::single);
        std::size_t errors = 0;
        for (const auto& item : r.items) errors += item.error.has_value();
        std::cout << "INFO live-qald: F1=" << fmt(r.mean_set.f1) << " P@1=" << fmt(r.mean_ranked.p_at_1) << " over "
                  << r.items.size() << " questions, " << errors << " pipeline errors\n";
        skip("live-qald", "non-gating; accuracy reported above");
    } catch (const std::exception& e) {
        skip("live-qald", std::string("non-gating run aborted: ") + e.what());
    }
}

}  // namespace

int main() {
    desk_suite();
    retention();
    metric_oracle();
    generation_oracle();
    query_budget();
    robustness();
    sparql_correctness();
    no_hallucination();
    live_qald();
    std::cout << (failures == 0 ? "ALL GATING CRITERIA PASS" : std::to_string(failures) + " GATING CRITERIA FAIL") << "\n";
    return failures == 0 ? 0 : 1;
}
