#pragma once
// Benchmark loading, answer normalization, metrics and benchmark replay.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convkg/model.hpp"

namespace convkg {

class Engine;

namespace eval {

struct BenchmarkItem {
    std::string id;
    std::string question;
    std::optional<std::string> standalone_question;
    std::vector<Answer> gold_answers;
    std::optional<std::string> dialogue_id;
    std::optional<std::size_t> turn_index;  // 0-based within the dialogue
};

// Gold strings that look like absolute IRIs become entity answers, the rest
// literals; objects {kind, value} are taken as given.
Answer gold_answer_from_json(const nlohmann::json& node);

// Single-turn: [{id, question, answers[]}] or {"questions": [...]}.
// Dialogue: [{dialogue_id, turns: [{question, standalone, answers[]}]}] or {"dialogues": [...]}.
// Detects the shape. Throws std::invalid_argument on malformed input.
std::vector<BenchmarkItem> parse_benchmark(const nlohmann::json& doc);
std::vector<BenchmarkItem> load_benchmark(const std::string& path);

// IRIs exact; numerics by value; other literals case-folded after trimming.
std::string normalize(const Answer& answer);

struct SetScores {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct RankScores {
    double p_at_1 = 0;
    double mrr = 0;
    double hit_at_5 = 0;
};

// Set semantics after normalization. Both empty: all 1. One side empty: all 0.
SetScores score_set(const std::vector<Answer>& predicted, const std::vector<Answer>& gold);

// Ranked by position in `predicted`. Both empty: all 1. Empty gold otherwise: all 0.
RankScores score_ranked(const std::vector<Answer>& predicted, const std::vector<Answer>& gold);

enum class RunMode { single, dialogue };

std::optional<RunMode> run_mode_from_string(std::string_view text);

struct ItemReport {
    BenchmarkItem item;
    std::string asked;                    // the text actually sent to the engine
    std::vector<Answer> predicted;
    SetScores set;
    RankScores ranked;
    bool failed = false;                  // recall 0 or pipeline error
    std::optional<std::string> failure;   // qu | linking | selection | execution
    std::optional<std::string> error;
    std::size_t executed_queries = 0;
    std::size_t candidate_queries = 0;
    std::size_t llm_calls = 0;
    std::map<std::string, double> stage_seconds;
};

struct MetricReport {
    std::vector<ItemReport> items;
    SetScores mean_set;
    RankScores mean_ranked;
    std::size_t failed = 0;
    std::map<std::string, std::size_t> failures_by_stage;
    double total_seconds = 0;
    double mean_executed_queries = 0;
    std::size_t max_executed_queries = 0;
};

// Maps a pipeline stage to its failure bucket.
std::string failure_bucket(Stage stage);

// single: every item in a fresh single-turn session, asking the standalone
// form when present. dialogue: one multi-turn session per dialogue, turns in
// order. Item errors count as failures; the run continues.
MetricReport run_benchmark(const Engine& engine, const std::vector<BenchmarkItem>& items, RunMode mode,
                           const std::string& trace_dir = {});

// F1_dialogue / F1_standalone * 100; 100 when both are 0.
double retention_percent(const MetricReport& dialogue, const MetricReport& standalone);

nlohmann::json to_json(const MetricReport& report);
std::string render_table(const MetricReport& report);

}  // namespace eval
}  // namespace convkg
