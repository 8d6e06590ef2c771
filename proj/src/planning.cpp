#include "convkg/planning.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "convkg/retry.hpp"
#include "convkg/text.hpp"

namespace convkg {

using json = nlohmann::json;

namespace {

struct Option {
    std::string iri;
    EdgeDirection direction;
    std::size_t rank;
};

std::string local_name(std::string_view iri) {
    auto cut = iri.find_last_of("/#");
    return std::string(cut == std::string_view::npos ? iri : iri.substr(cut + 1));
}

std::string bare(std::string_view variable) {
    return std::string(!variable.empty() && variable.front() == '?' ? variable.substr(1) : variable);
}

kg::RdfTerm to_rdf(const QirTerm& term, const LinkingMaps& maps) {
    if (term.is_variable()) return kg::RdfTerm::variable(term.text);
    auto it = maps.ent_to_vertex.find(term.text);
    if (it == maps.ent_to_vertex.end()) {
        throw PipelineError(Stage::selection, "entity '" + term.text + "' is not linked");
    }
    return kg::RdfTerm::iri(it->second);
}

bool mentions(const QirTriple& fact, const std::string& variable) {
    return (fact.subject.is_variable() && fact.subject.text == variable) ||
           (fact.object.is_variable() && fact.object.text == variable);
}

}  // namespace

bool candidate_less(const CandidateQuery& a, const CandidateQuery& b) {
    if (a.rank_cost != b.rank_cost) return a.rank_cost < b.rank_cost;
    if (a.origin != b.origin) return a.origin < b.origin;
    return a.direction < b.direction;
}

Generated generate(const QIR& qir, const LinkingMaps& maps) {
    Generated out;
    std::vector<std::size_t> active;
    std::vector<std::vector<Option>> options;
    for (std::size_t i = 0; i < qir.facts.size(); ++i) {
        auto it = maps.rel_to_pred.find(qir.facts[i].relation);
        if (it == maps.rel_to_pred.end() || it->second.empty()) {
            out.skipped_facts.push_back(i);
            continue;
        }
        std::vector<Option> opts;
        for (std::size_t r = 0; r < it->second.size(); ++r) {
            opts.push_back({it->second[r].iri, it->second[r].direction, r});
        }
        active.push_back(i);
        options.push_back(std::move(opts));
    }
    if (active.empty()) throw PipelineError(Stage::selection, "no executable facts");
    if (qir.form != QuestionForm::boolean &&
        std::none_of(active.begin(), active.end(), [&](std::size_t i) { return mentions(qir.facts[i], qir.target); })) {
        throw PipelineError(Stage::selection, "no executable facts bind the answer variable " + qir.target);
    }

    std::vector<std::pair<kg::RdfTerm, kg::RdfTerm>> ends;
    for (auto i : active) ends.emplace_back(to_rdf(qir.facts[i].subject, maps), to_rdf(qir.facts[i].object, maps));

    std::vector<const Option*> chosen(active.size());
    auto emit = [&] {
        CandidateQuery c;
        switch (qir.form) {
            case QuestionForm::list:
                c.query.form = kg::QueryForm::select;
                c.query.distinct = true;
                c.query.projection = {bare(qir.target)};
                break;
            case QuestionForm::count:
                c.query.form = kg::QueryForm::select_count;
                c.query.projection = {bare(qir.target)};
                break;
            case QuestionForm::boolean:
                c.query.form = kg::QueryForm::ask;
                break;
        }
        for (std::size_t k = 0; k < active.size(); ++k) {
            const auto& [s, o] = ends[k];
            auto p = kg::RdfTerm::iri(chosen[k]->iri);
            if (chosen[k]->direction == EdgeDirection::forward) {
                c.query.patterns.push_back({s, p, o});
            } else {
                c.query.patterns.push_back({o, p, s});
            }
            c.predicate_set.insert(chosen[k]->iri);
            c.rank_cost += chosen[k]->rank;
            c.origin[active[k]] = chosen[k]->iri;
            c.direction[active[k]] = chosen[k]->direction;
        }
        out.candidates.push_back(std::move(c));
    };
    auto expand = [&](auto& self, std::size_t k) -> void {
        if (k == active.size()) {
            emit();
            return;
        }
        for (const auto& opt : options[k]) {
            chosen[k] = &opt;
            self(self, k + 1);
        }
    };
    expand(expand, 0);
    return out;
}

std::vector<CandidateQuery> truncate(std::vector<CandidateQuery> candidates, std::size_t query_num) {
    if (candidates.size() <= query_num) return candidates;
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return candidate_less(candidates[a], candidates[b]);
    });
    order.resize(query_num);
    std::sort(order.begin(), order.end());
    std::vector<CandidateQuery> kept;
    kept.reserve(query_num);
    for (auto i : order) kept.push_back(std::move(candidates[i]));
    return kept;
}

PredicateIndex build_index(const std::vector<CandidateQuery>& candidates) {
    PredicateIndex index;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        // first-seen order follows the pattern order inside each query
        for (const auto& pattern : candidates[i].query.patterns) {
            const auto& p = pattern.predicate.value;
            auto [it, fresh] = index.pred_to_query.try_emplace(p);
            if (fresh) index.all_predicates.push_back(p);
            it->second.insert(i);
        }
    }
    return index;
}

std::string_view to_string(SelectionFailure failure) {
    return failure == SelectionFailure::malformed_json ? "malformed_json" : "empty_selection";
}

SelectionValidation validate_predicate_selection(std::string_view raw, const std::vector<std::string>& all) {
    auto obj = find_json_object(raw);
    if (!obj) return SelectionFailure::malformed_json;
    auto it = obj->find("predicates");
    if (it == obj->end() || !it->is_array()) return SelectionFailure::malformed_json;

    std::map<std::string, std::vector<std::string>> by_local;
    for (const auto& p : all) by_local[local_name(p)].push_back(p);

    std::set<std::string> picked;
    for (const auto& item : *it) {
        if (!item.is_string()) continue;
        auto name = text::trim(item.get<std::string>());
        if (name.size() > 2 && name.front() == '<' && name.back() == '>') name = name.substr(1, name.size() - 2);
        if (std::find(all.begin(), all.end(), name) != all.end()) {
            picked.insert(name);
        } else if (auto l = by_local.find(name); l != by_local.end() && l->second.size() == 1) {
            picked.insert(l->second.front());
        }
    }
    std::vector<std::string> kept;
    for (const auto& p : all) {
        if (picked.count(p)) kept.push_back(p);
    }
    if (kept.empty()) return SelectionFailure::empty_selection;
    return kept;
}

PredicateFilter filter_predicates(LlmBackend& llm, const PromptSpec& prompt, const std::string& question,
                                  const PredicateIndex& index, std::size_t theta) {
    if (index.all_predicates.empty()) throw std::invalid_argument("predicate filter needs a non-empty predicate list");
    std::string listing;
    for (const auto& p : index.all_predicates) listing += p + "\n";
    LlmRequest req{prompt, question, {{"question", question}, {"predicates", listing}}};

    PredicateFilter out;
    Attempted<std::vector<std::string>> result;
    try {
        result = retry_bounded<std::vector<std::string>>(
            theta, [&](std::string& why) -> std::optional<std::vector<std::string>> {
                auto checked = validate_predicate_selection(llm.complete(req).raw_text, index.all_predicates);
                if (auto* f = std::get_if<SelectionFailure>(&checked)) {
                    why = std::string(to_string(*f));
                    return std::nullopt;
                }
                return std::get<std::vector<std::string>>(std::move(checked));
            });
    } catch (const LlmError&) {
        // a hard backend failure degrades the same way as exhausted retries
        out.degraded = true;
        out.attempts = 1;
        out.kept = index.all_predicates;
        return out;
    }
    out.attempts = result.attempts;
    if (result.value) {
        out.kept = std::move(*result.value);
    } else {
        out.degraded = true;
        out.kept = index.all_predicates;
    }
    return out;
}

std::vector<std::size_t> select_queries(const PredicateIndex& index, const std::vector<std::string>& kept,
                                        std::size_t candidate_count) {
    std::vector<bool> take(candidate_count, false);
    for (const auto& p : kept) {
        auto it = index.pred_to_query.find(p);
        if (it == index.pred_to_query.end()) continue;
        for (auto i : it->second) {
            if (i < candidate_count) take[i] = true;
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < candidate_count; ++i) {
        if (take[i]) out.push_back(i);
    }
    return out;
}

json to_json(const Answer& answer) {
    json j = {{"kind", to_string(answer.kind)}, {"value", answer.value}};
    if (answer.display_label) j["label"] = *answer.display_label;
    return j;
}

json to_json(const QIR& qir) {
    json facts = json::array();
    for (const auto& f : qir.facts) facts.push_back({f.subject.text, f.relation, f.object.text});
    json j = {{"entities", qir.entities}, {"variables", qir.variables}, {"relations", qir.relations},
              {"triples", facts}, {"form", to_string(qir.form)}};
    if (!qir.target.empty()) j["target"] = qir.target;
    return j;
}

json to_json(const LinkingMaps& maps) {
    json rel = json::object();
    for (const auto& [phrase, preds] : maps.rel_to_pred) {
        json list = json::array();
        for (const auto& p : preds) {
            list.push_back({{"iri", p.iri},
                            {"score", p.score},
                            {"direction", p.direction == EdgeDirection::forward ? "forward" : "reverse"}});
        }
        rel[phrase] = list;
    }
    return {{"entities", maps.ent_to_vertex}, {"relations", rel}};
}

PlanOutcome plan_and_execute(LlmBackend& llm, const PromptLibrary& prompts, const std::string& question,
                             const QIR& qir, const LinkingMaps& maps, const EngineConfig& config,
                             kg::KgTarget& target) {
    PlanOutcome out;
    auto generated = generate(qir, maps);
    if (!generated.skipped_facts.empty()) out.degraded.insert("skipped_fact");
    out.generated = generated.candidates.size();
    auto candidates = truncate(std::move(generated.candidates), config.query_num);
    out.truncated = candidates.size();

    auto index = build_index(candidates);
    auto filter = filter_predicates(llm, prompts.get(task::select_predicates), question, index, config.theta);
    out.llm_calls += filter.attempts;
    if (filter.degraded) out.degraded.insert("predicate_filter_fallback");
    auto selected = select_queries(index, filter.kept, candidates.size());

    json cand_trace = json::array();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        cand_trace.push_back({{"index", i},
                              {"sparql", kg::serialize(candidates[i].query)},
                              {"predicates", candidates[i].predicate_set},
                              {"rank_cost", candidates[i].rank_cost}});
    }
    std::vector<std::string> pruned;
    for (const auto& p : index.all_predicates) {
        if (std::find(filter.kept.begin(), filter.kept.end(), p) == filter.kept.end()) pruned.push_back(p);
    }

    std::string target_var = bare(qir.target);
    std::vector<Answer> answers;
    auto add = [&](Answer a) {
        if (std::find(answers.begin(), answers.end(), a) == answers.end()) answers.push_back(std::move(a));
    };
    bool any_ok = false;
    bool ask_true = false;
    json exec_trace = json::array();
    for (auto i : selected) {
        const auto& c = candidates[i];
        json entry = {{"index", i}, {"sparql", kg::serialize(c.query)}};
        ++out.executed;
        kg::ResultSet rs;
        try {
            rs = target.execute(c.query);
        } catch (const kg::KgError& e) {
            entry["status"] = "error";
            entry["error"] = e.what();
            out.degraded.insert("query_failed");
            exec_trace.push_back(std::move(entry));
            continue;
        }
        any_ok = true;
        entry["status"] = "ok";
        switch (rs.form) {
            case kg::QueryForm::ask:
                entry["boolean"] = rs.boolean;
                ask_true = ask_true || rs.boolean;
                break;
            case kg::QueryForm::select_count:
                entry["count"] = rs.count;
                // a zero count witnesses nothing
                if (rs.count > 0) add(Answer::count(rs.count));
                break;
            case kg::QueryForm::select:
                entry["rows"] = rs.rows.size();
                for (const auto& row : rs.rows) {
                    auto it = row.find(target_var);
                    if (it == row.end()) continue;
                    if (it->second.is_iri()) {
                        add(Answer::entity(it->second.value, target.label_of(it->second.value)));
                    } else {
                        add(Answer::literal(it->second.value));
                    }
                }
                break;
        }
        exec_trace.push_back(std::move(entry));
    }
    if (!selected.empty() && !any_ok) {
        throw PipelineError(Stage::execution, "all " + std::to_string(selected.size()) + " selected queries failed");
    }
    if (qir.form == QuestionForm::boolean && any_ok) answers = {Answer::boolean(ask_true)};
    out.answers = std::move(answers);

    json answer_trace = json::array();
    for (const auto& a : out.answers) answer_trace.push_back(to_json(a));
    out.trace = {{"question", question},
                 {"qir", to_json(qir)},
                 {"linking", to_json(maps)},
                 {"generated", out.generated},
                 {"skipped_facts", generated.skipped_facts},
                 {"candidates", cand_trace},
                 {"all_predicates", index.all_predicates},
                 {"kept_predicates", filter.kept},
                 {"pruned_predicates", pruned},
                 {"filter_attempts", filter.attempts},
                 {"executed", exec_trace},
                 {"answers", answer_trace},
                 {"degraded", out.degraded}};
    return out;
}

}  // namespace convkg
