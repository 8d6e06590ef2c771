#include "convkg/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "convkg/orchestrator.hpp"
#include "convkg/planning.hpp"
#include "convkg/text.hpp"

namespace convkg::eval {

using json = nlohmann::json;

namespace {

bool looks_like_iri(std::string_view s) {
    auto colon = s.find("://");
    if (colon == std::string_view::npos || colon == 0) return false;
    return std::none_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::optional<double> as_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<Answer> answers_from(const json& node, const std::string& where) {
    if (!node.is_array()) throw std::invalid_argument(where + ": answers must be an array");
    std::vector<Answer> out;
    for (const auto& a : node) out.push_back(gold_answer_from_json(a));
    return out;
}

std::string item_id(const json& node, const std::string& fallback) {
    auto it = node.find("id");
    if (it == node.end()) return fallback;
    return it->is_string() ? it->get<std::string>() : it->dump();
}

}  // namespace

Answer gold_answer_from_json(const json& node) {
    if (node.is_boolean()) return Answer::boolean(node.get<bool>());
    if (node.is_number_integer() && node.get<std::int64_t>() >= 0) return Answer::count(node.get<std::uint64_t>());
    if (node.is_number()) return Answer::literal(node.dump());
    if (node.is_string()) {
        auto s = node.get<std::string>();
        if (looks_like_iri(s)) return Answer::entity(s);
        return Answer::literal(s);
    }
    if (node.is_object() && node.contains("value")) {
        const auto& v = node["value"];
        auto value = v.is_string() ? v.get<std::string>() : v.dump();
        auto kind = answer_kind_from_string(node.value("kind", looks_like_iri(value) ? "entity" : "literal"));
        if (!kind) throw std::invalid_argument("unknown answer kind in " + node.dump());
        Answer a;
        a.kind = *kind;
        a.value = value;
        return a;
    }
    throw std::invalid_argument("unsupported gold answer " + node.dump());
}

std::vector<BenchmarkItem> parse_benchmark(const json& doc) {
    const json* list = &doc;
    if (doc.is_object()) {
        if (doc.contains("dialogues")) {
            list = &doc["dialogues"];
        } else if (doc.contains("questions")) {
            list = &doc["questions"];
        } else {
            throw std::invalid_argument("benchmark object needs a 'questions' or 'dialogues' array");
        }
    }
    if (!list->is_array()) throw std::invalid_argument("benchmark must be an array");

    std::vector<BenchmarkItem> items;
    std::size_t n = 0;
    for (const auto& entry : *list) {
        ++n;
        if (!entry.is_object()) throw std::invalid_argument("benchmark entry " + std::to_string(n) + " is not an object");
        if (entry.contains("turns")) {
            auto did = entry.contains("dialogue_id") ? (entry["dialogue_id"].is_string()
                                                            ? entry["dialogue_id"].get<std::string>()
                                                            : entry["dialogue_id"].dump())
                                                     : "d" + std::to_string(n);
            const auto& turns = entry["turns"];
            if (!turns.is_array()) throw std::invalid_argument("dialogue " + did + ": turns must be an array");
            for (std::size_t t = 0; t < turns.size(); ++t) {
                const auto& turn = turns[t];
                BenchmarkItem item;
                item.dialogue_id = did;
                item.turn_index = t;
                item.id = item_id(turn, did + "." + std::to_string(t + 1));
                item.question = turn.value("question", "");
                if (auto s = turn.find("standalone"); s != turn.end() && s->is_string()) {
                    item.standalone_question = s->get<std::string>();
                }
                if (item.question.empty()) throw std::invalid_argument("item " + item.id + " has no question");
                item.gold_answers = answers_from(turn.value("answers", json::array()), item.id);
                items.push_back(std::move(item));
            }
        } else {
            BenchmarkItem item;
            item.id = item_id(entry, std::to_string(n));
            item.question = entry.value("question", "");
            if (item.question.empty()) throw std::invalid_argument("item " + item.id + " has no question");
            if (auto s = entry.find("standalone"); s != entry.end() && s->is_string()) {
                item.standalone_question = s->get<std::string>();
            }
            item.gold_answers = answers_from(entry.value("answers", json::array()), item.id);
            items.push_back(std::move(item));
        }
    }
    return items;
}

std::vector<BenchmarkItem> load_benchmark(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open benchmark " + path);
    auto doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw std::invalid_argument("benchmark " + path + " is not valid JSON");
    return parse_benchmark(doc);
}

std::string normalize(const Answer& answer) {
    if (answer.kind == AnswerKind::entity) return "iri:" + answer.value;
    auto t = text::trim(answer.value);
    if (looks_like_iri(t)) return "iri:" + t;
    if (auto v = as_number(t)) {
        std::ostringstream os;
        os << std::setprecision(15) << *v;
        return "num:" + os.str();
    }
    return "lit:" + text::to_lower(t);
}

SetScores score_set(const std::vector<Answer>& predicted, const std::vector<Answer>& gold) {
    std::set<std::string> p, g;
    for (const auto& a : predicted) p.insert(normalize(a));
    for (const auto& a : gold) g.insert(normalize(a));
    if (p.empty() && g.empty()) return {1, 1, 1};
    if (p.empty() || g.empty()) return {0, 0, 0};
    std::size_t hit = 0;
    for (const auto& x : p) hit += g.count(x);
    SetScores s;
    s.precision = static_cast<double>(hit) / static_cast<double>(p.size());
    s.recall = static_cast<double>(hit) / static_cast<double>(g.size());
    s.f1 = (s.precision + s.recall) == 0 ? 0 : 2 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

RankScores score_ranked(const std::vector<Answer>& predicted, const std::vector<Answer>& gold) {
    if (predicted.empty() && gold.empty()) return {1, 1, 1};
    std::set<std::string> g;
    for (const auto& a : gold) g.insert(normalize(a));
    RankScores r;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!g.count(normalize(predicted[i]))) continue;
        if (i == 0) r.p_at_1 = 1;
        r.mrr = 1.0 / static_cast<double>(i + 1);
        if (i < 5) r.hit_at_5 = 1;
        break;
    }
    return r;
}

std::optional<RunMode> run_mode_from_string(std::string_view t) {
    auto s = text::to_lower(text::trim(t));
    if (s == "single" || s == "single_turn" || s == "standalone") return RunMode::single;
    if (s == "dialogue" || s == "multi_turn" || s == "multi") return RunMode::dialogue;
    return std::nullopt;
}

std::string failure_bucket(Stage stage) {
    switch (stage) {
        case Stage::translation:
        case Stage::classification:
        case Stage::rephrasing:
        case Stage::understanding: return "qu";
        case Stage::linking: return "linking";
        case Stage::selection: return "selection";
        case Stage::execution:
        case Stage::reformulation: return "execution";
    }
    return "execution";
}

MetricReport run_benchmark(const Engine& engine, const std::vector<BenchmarkItem>& items, RunMode mode,
                           const std::string& trace_dir) {
    MetricReport report;
    auto t0 = std::chrono::steady_clock::now();
    EngineConfig config = engine.config();
    config.system_mode = mode == RunMode::single ? SystemMode::single_turn : SystemMode::multi_turn;
    if (!trace_dir.empty()) config.trace_dir = trace_dir;

    std::map<std::string, SessionState> sessions;
    std::size_t fresh = 0;
    for (const auto& item : items) {
        SessionState scratch;
        SessionState* state = &scratch;
        if (mode == RunMode::dialogue && item.dialogue_id) {
            state = &sessions[*item.dialogue_id];
            state->session_id = "dialogue-" + *item.dialogue_id;
        } else {
            scratch.session_id = "item-" + std::to_string(++fresh);
        }

        ItemReport r;
        r.item = item;
        r.asked = mode == RunMode::single && item.standalone_question ? *item.standalone_question : item.question;
        try {
            auto turn = engine.process_turn(*state, r.asked, config);
            r.predicted = turn.answers;
            r.executed_queries = turn.executed_queries;
            r.candidate_queries = turn.candidate_queries;
            r.llm_calls = turn.llm_calls;
            r.stage_seconds = turn.stage_seconds;
            if (turn.error_stage) {
                r.error = turn.error_message;
                r.failure = failure_bucket(*turn.error_stage);
            }
        } catch (const std::exception& e) {
            r.error = e.what();
            r.failure = "execution";
        }
        r.set = score_set(r.predicted, item.gold_answers);
        r.ranked = score_ranked(r.predicted, item.gold_answers);
        r.failed = r.error.has_value() || r.set.recall == 0;
        if (r.failed && !r.failure) r.failure = "execution";
        if (!r.failed) r.failure.reset();
        report.items.push_back(std::move(r));
    }

    for (const auto& r : report.items) {
        report.mean_set.precision += r.set.precision;
        report.mean_set.recall += r.set.recall;
        report.mean_set.f1 += r.set.f1;
        report.mean_ranked.p_at_1 += r.ranked.p_at_1;
        report.mean_ranked.mrr += r.ranked.mrr;
        report.mean_ranked.hit_at_5 += r.ranked.hit_at_5;
        report.mean_executed_queries += static_cast<double>(r.executed_queries);
        report.max_executed_queries = std::max(report.max_executed_queries, r.executed_queries);
        if (r.failed) {
            ++report.failed;
            ++report.failures_by_stage[*r.failure];
        }
    }
    if (!report.items.empty()) {
        auto n = static_cast<double>(report.items.size());
        report.mean_set.precision /= n;
        report.mean_set.recall /= n;
        report.mean_set.f1 /= n;
        report.mean_ranked.p_at_1 /= n;
        report.mean_ranked.mrr /= n;
        report.mean_ranked.hit_at_5 /= n;
        report.mean_executed_queries /= n;
    }
    report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

double retention_percent(const MetricReport& dialogue, const MetricReport& standalone) {
    if (standalone.mean_set.f1 == 0) return dialogue.mean_set.f1 == 0 ? 100.0 : 0.0;
    return dialogue.mean_set.f1 / standalone.mean_set.f1 * 100.0;
}

json to_json(const MetricReport& report) {
    json items = json::array();
    for (const auto& r : report.items) {
        json predicted = json::array();
        for (const auto& a : r.predicted) predicted.push_back(convkg::to_json(a));
        json gold = json::array();
        for (const auto& a : r.item.gold_answers) gold.push_back(convkg::to_json(a));
        json j = {{"id", r.item.id},
                  {"question", r.asked},
                  {"predicted", predicted},
                  {"gold", gold},
                  {"precision", r.set.precision},
                  {"recall", r.set.recall},
                  {"f1", r.set.f1},
                  {"p_at_1", r.ranked.p_at_1},
                  {"mrr", r.ranked.mrr},
                  {"hit_at_5", r.ranked.hit_at_5},
                  {"failed", r.failed},
                  {"executed_queries", r.executed_queries},
                  {"candidate_queries", r.candidate_queries},
                  {"llm_calls", r.llm_calls},
                  {"stage_seconds", r.stage_seconds}};
        if (r.item.dialogue_id) j["dialogue_id"] = *r.item.dialogue_id;
        if (r.item.turn_index) j["turn_index"] = *r.item.turn_index;
        j["failure"] = r.failure ? json(*r.failure) : json(nullptr);
        j["error"] = r.error ? json(*r.error) : json(nullptr);
        items.push_back(std::move(j));
    }
    return {{"items", items},
            {"aggregate",
             {{"count", report.items.size()},
              {"precision", report.mean_set.precision},
              {"recall", report.mean_set.recall},
              {"f1", report.mean_set.f1},
              {"p_at_1", report.mean_ranked.p_at_1},
              {"mrr", report.mean_ranked.mrr},
              {"hit_at_5", report.mean_ranked.hit_at_5},
              {"failed", report.failed},
              {"failures_by_stage", report.failures_by_stage},
              {"mean_executed_queries", report.mean_executed_queries},
              {"max_executed_queries", report.max_executed_queries},
              {"total_seconds", report.total_seconds}}}};
}

std::string render_table(const MetricReport& report) {
    std::ostringstream os;
    auto row = [&](const std::string& id, double p, double r, double f1, double p1, double mrr, double h5,
                   const std::string& q, const std::string& fail) {
        os << std::left << std::setw(12) << id << std::right << std::fixed << std::setprecision(4) << std::setw(8) << p
           << std::setw(8) << r << std::setw(8) << f1 << std::setw(8) << p1 << std::setw(8) << mrr << std::setw(8)
           << h5 << std::setw(8) << q << "  " << fail << "\n";
    };
    os << std::left << std::setw(12) << "item" << std::right << std::setw(8) << "P" << std::setw(8) << "R"
       << std::setw(8) << "F1" << std::setw(8) << "P@1" << std::setw(8) << "MRR" << std::setw(8) << "Hit@5"
       << std::setw(8) << "#Q" << "  failure\n";
    for (const auto& r : report.items) {
        row(r.item.id, r.set.precision, r.set.recall, r.set.f1, r.ranked.p_at_1, r.ranked.mrr, r.ranked.hit_at_5,
            std::to_string(r.executed_queries), r.failure.value_or(""));
    }
    char mean_q[32];
    std::snprintf(mean_q, sizeof mean_q, "%.2f", report.mean_executed_queries);
    row("mean", report.mean_set.precision, report.mean_set.recall, report.mean_set.f1, report.mean_ranked.p_at_1,
        report.mean_ranked.mrr, report.mean_ranked.hit_at_5, mean_q, "");
    os << "failed " << report.failed << "/" << report.items.size();
    for (const auto& [stage, n] : report.failures_by_stage) os << "  " << stage << "=" << n;
    os << "  time " << std::setprecision(3) << report.total_seconds << "s\n";
    return os.str();
}

}  // namespace convkg::eval
