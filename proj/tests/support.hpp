#pragma once
// Shared helpers for the test suites: desk fixture paths and engine builders.

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "convkg/kg.hpp"
#include "convkg/llm.hpp"
#include "convkg/matching.hpp"
#include "convkg/orchestrator.hpp"

namespace convkg::fixture {

inline std::string source_path(const std::string& rel) { return std::string(CONVKG_SOURCE_DIR) + "/" + rel; }

inline std::string desk_kg() { return source_path("data/desk/desk-kg.nt"); }
inline std::string desk_script() { return source_path("data/desk/desk-script.json"); }
inline std::string desk_conf() { return source_path("data/desk/desk.conf"); }

inline std::shared_ptr<const kg::TripleStore> desk_store() {
    static auto store = std::make_shared<const kg::TripleStore>(kg::TripleStore::from_file(desk_kg()));
    return store;
}

inline std::shared_ptr<kg::EmbeddedTarget> desk_target() { return std::make_shared<kg::EmbeddedTarget>(desk_store()); }

inline const PromptLibrary& prompts() {
    static auto lib = PromptLibrary::load(source_path("data/prompts"));
    return lib;
}

inline std::shared_ptr<ScriptedBackend> desk_backend() {
    return std::shared_ptr<ScriptedBackend>(ScriptedBackend::from_file(desk_script()));
}

inline std::shared_ptr<ScriptedBackend> scripted(const nlohmann::json& rules) {
    return std::shared_ptr<ScriptedBackend>(ScriptedBackend::from_json(rules));
}

inline std::shared_ptr<Engine> desk_engine(std::shared_ptr<LlmBackend> llm = nullptr, EngineConfig config = {}) {
    if (!llm) llm = desk_backend();
    return std::make_shared<Engine>(config, llm, desk_target(), std::make_shared<TrigramEmbedder>(), prompts());
}

inline constexpr const char* kKg = "http://example.org/kg/";
inline constexpr const char* kOnt = "http://example.org/ontology/";

inline std::string kg_iri(const std::string& local) { return kKg + local; }
inline std::string ont(const std::string& local) { return kOnt + local; }

}  // namespace convkg::fixture
