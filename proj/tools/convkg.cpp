// convkg: ask, repl, serve and eval front-ends over the engine.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convkg/eval.hpp"
#include "convkg/orchestrator.hpp"
#include "convkg/service.hpp"

using namespace convkg;

namespace {

struct CommonOptions {
    std::string config_file;
    std::string endpoint;
    std::string store_file;
    std::string script;
    std::string mode;
    std::string trace_dir;
    std::vector<std::string> settings;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config_file, "key = value config file");
    app->add_option("--endpoint", o.endpoint, "SPARQL endpoint URL");
    app->add_option("--store-file", o.store_file, "N-Triples file for the embedded store");
    app->add_option("--script", o.script, "scripted LLM rules (offline runs)");
    app->add_option("--mode", o.mode, "multi_turn or single_turn");
    app->add_option("--trace", o.trace_dir, "directory for per-turn JSON traces");
    app->add_option("--set", o.settings, "extra key=value setting (repeatable)");
}

EngineConfig build_config(const CommonOptions& o) {
    EngineConfig cfg = o.config_file.empty() ? EngineConfig{} : EngineConfig::load(o.config_file);
    if (!o.endpoint.empty()) {
        cfg.endpoint_url = o.endpoint;
        cfg.store_file.clear();
    }
    if (!o.store_file.empty()) cfg.store_file = o.store_file;
    if (!o.script.empty()) cfg.llm.script_file = o.script;
    if (!o.mode.empty()) cfg.set("system_mode", o.mode);
    if (!o.trace_dir.empty()) cfg.trace_dir = o.trace_dir;
    for (const auto& kv : o.settings) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

std::string render_answers(const TurnResult& r) {
    if (r.final_text) return *r.final_text;
    if (r.answers.empty()) return kNotFoundSentence;
    std::string out;
    for (const auto& a : r.answers) {
        if (!out.empty()) out += "\n";
        out += a.display_label ? *a.display_label + "  <" + a.value + ">" : a.value;
    }
    return out;
}

void print_turn(const TurnResult& r, bool as_json) {
    if (as_json) {
        std::cout << to_json(r).dump(2) << "\n";
        return;
    }
    std::cout << render_answers(r) << "\n";
    if (r.error_stage) std::cerr << "error (" << to_string(*r.error_stage) << "): " << r.error_message << "\n";
    if (!r.degraded_flags.empty()) {
        std::cerr << "degraded:";
        for (const auto& f : r.degraded_flags) std::cerr << " " << f;
        std::cerr << "\n";
    }
    if (r.trace_ref) std::cerr << "trace: " << *r.trace_ref << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conversational question answering over knowledge graphs"};
    app.require_subcommand(1);

    CommonOptions ask_opts, repl_opts, serve_opts, eval_opts;

    auto* ask = app.add_subcommand("ask", "answer one question");
    add_common(ask, ask_opts);
    std::string question;
    bool ask_json = false;
    ask->add_option("question", question, "the question")->required();
    ask->add_flag("--json", ask_json, "print the full turn result as JSON");

    auto* repl = app.add_subcommand("repl", "interactive multi-turn session");
    add_common(repl, repl_opts);

    auto* serve = app.add_subcommand("serve", "start the HTTP session API");
    add_common(serve, serve_opts);
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string persist_dir;
    std::string cors = "*";
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--persist", persist_dir, "append session logs as JSON lines under this directory");
    serve->add_option("--cors-origin", cors);

    auto* ev = app.add_subcommand("eval", "replay a benchmark and score it");
    add_common(ev, eval_opts);
    std::string bench, out_file, eval_mode = "single", eval_trace;
    ev->add_option("--bench", bench, "benchmark JSON")->required();
    ev->add_option("--out", out_file, "write the JSON report here");
    ev->add_option("--trace-dir", eval_trace, "per-turn traces");
    // --mode on eval selects the replay mode, not the engine mode
    ev->get_option("--mode")->description("single or dialogue");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ask) {
            auto engine = Engine::from_config(build_config(ask_opts));
            SessionState state;
            state.session_id = "cli";
            print_turn(engine->process_turn(state, question), ask_json);
            return 0;
        }
        if (*repl) {
            auto engine = Engine::from_config(build_config(repl_opts));
            SessionState state;
            state.session_id = "repl";
            std::string line;
            std::cout << "> " << std::flush;
            while (std::getline(std::cin, line)) {
                if (line == ":quit" || line == ":q") break;
                if (!line.empty()) print_turn(engine->process_turn(state, line), false);
                std::cout << "> " << std::flush;
            }
            return 0;
        }
        if (*serve) {
            auto engine = Engine::from_config(build_config(serve_opts));
            service::SessionService svc(engine, persist_dir);
            std::cerr << "listening on " << host << ":" << port << "\n";
            return service::serve(svc, host, port, cors) ? 0 : 1;
        }
        if (*ev) {
            auto run_mode = eval::run_mode_from_string(eval_opts.mode.empty() ? eval_mode : eval_opts.mode);
            if (!run_mode) {
                std::cerr << "--mode must be single or dialogue\n";
                return 2;
            }
            auto opts = eval_opts;
            opts.mode.clear();
            auto engine = Engine::from_config(build_config(opts));
            auto items = eval::load_benchmark(bench);
            auto report = eval::run_benchmark(*engine, items, *run_mode, eval_trace);
            std::cout << eval::render_table(report);
            if (!out_file.empty()) {
                std::ofstream out(out_file);
                out << eval::to_json(report).dump(2) << "\n";
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
