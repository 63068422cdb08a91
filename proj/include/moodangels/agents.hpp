#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/corpus.hpp"
#include "moodangels/prompts.hpp"
#include "moodangels/provider.hpp"
#include "moodangels/records.hpp"
#include "moodangels/retrieval.hpp"
#include "moodangels/scales.hpp"
#include "moodangels/util.hpp"

namespace moodangels::agents {

using json = nlohmann::json;
using corpus::CaseRecord;

enum class ActionName {
    toggle_visitor_record,
    get_scale_performances,
    previous_cases_display,
    previous_scales_display,
    previous_cases_analysis,
    previous_scales_analysis,
    finish,
};

inline std::string to_string(ActionName a) {
    switch (a) {
        case ActionName::toggle_visitor_record: return "toggle_visitor_record";
        case ActionName::get_scale_performances: return "get_scale_performances";
        case ActionName::previous_cases_display: return "previous_cases_display";
        case ActionName::previous_scales_display: return "previous_scales_display";
        case ActionName::previous_cases_analysis: return "previous_cases_analysis";
        case ActionName::previous_scales_analysis: return "previous_scales_analysis";
        default: return "finish";
    }
}

inline std::optional<ActionName> action_from(std::string name) {
    name = lower(trim(name));
    if (name == "toggle_visitor_record") return ActionName::toggle_visitor_record;
    if (name == "get_scale_performances") return ActionName::get_scale_performances;
    if (name == "previous_cases_display") return ActionName::previous_cases_display;
    if (name == "previous_scales_display") return ActionName::previous_scales_display;
    if (name == "previous_cases_analysis") return ActionName::previous_cases_analysis;
    if (name == "previous_scales_analysis") return ActionName::previous_scales_analysis;
    if (name == "finish") return ActionName::finish;
    return std::nullopt;
}

struct Thoughts {
    std::string plan, criticism, observation, reasoning;
};

struct AgentAction {
    ActionName name = ActionName::finish;
    json args = json::object();
    Thoughts thoughts;
    std::string raw; // verbatim provider output that parsed into this action

    bool is_finish() const { return name == ActionName::finish; }

    std::string answer() const { return lower(trim(args.value("answer", ""))); }
    std::string reasons() const { return args.value("reasons", ""); }

    json to_json() const {
        return json{{"action", {{"name", to_string(name)}, {"args", args}}},
                    {"thoughts",
                     {{"plan", thoughts.plan},
                      {"criticism", thoughts.criticism},
                      {"observation", thoughts.observation},
                      {"reasoning", thoughts.reasoning}}}};
    }
};

// Strict parse of the action protocol; error text is fed back verbatim in the
// single repair re-prompt.
inline AgentAction parse_action(const std::string& raw) {
    json j;
    try {
        j = json::parse(raw);
    } catch (const json::exception& e) {
        throw Error(std::string("action is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("action"))
        throw Error("action JSON must be an object with an \"action\" field");
    const auto& aj = j["action"];
    auto name = action_from(aj.value("name", ""));
    if (!name) throw Error("unknown action name: " + aj.value("name", "<missing>"));
    AgentAction out;
    out.name = *name;
    out.raw = raw;
    if (aj.contains("args") && aj["args"].is_object()) out.args = aj["args"];
    if (j.contains("thoughts") && j["thoughts"].is_object()) {
        const auto& t = j["thoughts"];
        out.thoughts = {t.value("plan", ""), t.value("criticism", ""), t.value("observation", ""),
                        t.value("reasoning", "")};
    }
    if (out.is_finish()) {
        auto ans = out.answer();
        if (ans != "yes" && ans != "no")
            throw Error("finish action requires answer 'yes' or 'no'");
        if (trim(out.reasons()).empty())
            throw Error("finish action requires non-empty reasons");
    } else if (!out.args.contains("digit_id")) {
        throw Error("action " + to_string(out.name) + " requires a digit_id argument");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Agent variants
// ---------------------------------------------------------------------------

enum class Variant { R, D, C };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::R: return "angel_r";
        case Variant::D: return "angel_d";
        default: return "angel_c";
    }
}

inline const std::set<ActionName>& allowed_actions(Variant v) {
    static const std::set<ActionName> base = {ActionName::toggle_visitor_record,
                                              ActionName::get_scale_performances, ActionName::finish};
    static const std::set<ActionName> d = [] {
        auto s = base;
        s.insert(ActionName::previous_cases_display);
        s.insert(ActionName::previous_scales_display);
        return s;
    }();
    static const std::set<ActionName> c = [] {
        auto s = base;
        s.insert(ActionName::previous_cases_analysis);
        s.insert(ActionName::previous_scales_analysis);
        return s;
    }();
    switch (v) {
        case Variant::R: return base;
        case Variant::D: return d;
        default: return c;
    }
}

inline std::string system_prompt(Variant v, const std::string& digit_id) {
    std::string p = replace_all(std::string(prompts::kAngelRole), "{digit_id}", digit_id);
    p += "\nAvailable Actions:\n";
    p += prompts::kActionRecord;
    p += prompts::kActionScales;
    if (v == Variant::D) {
        p += prompts::kActionCasesDisplay;
        p += prompts::kActionScalesDisplay;
    } else if (v == Variant::C) {
        p += prompts::kActionCasesAnalysis;
        p += prompts::kActionScalesAnalysis;
    }
    p += prompts::kActionFinish;
    p += prompts::kAngelTail;
    return p;
}

// ---------------------------------------------------------------------------
// Tool context and dispatch
// ---------------------------------------------------------------------------

enum class RecordFormat { unstructured, structured };
enum class ScaleMode { selected, unselected_totals };

struct ToolContext {
    const scales::ScaleCatalog* catalog = nullptr;
    const scales::SelectedItemSet* selected = nullptr;
    const retrieval::VectorStore* kb_store = nullptr;     // criteria store
    const retrieval::VectorStore* record_store = nullptr; // similar medical records
    const retrieval::VectorStore* scale_store = nullptr;  // similar scale performances
    retrieval::Embedder* embedder = nullptr;
    llm::Provider* analysis_provider = nullptr; // used by the analysis tools
    std::string model = "default";
    size_t top_k = 5;
    RecordFormat matching_format = RecordFormat::unstructured; // symptom matching input
    RecordFormat agent_format = RecordFormat::unstructured;    // record text shown to the agent
    ScaleMode scale_mode = ScaleMode::selected;
};

struct Diagnosis {
    bool answer = false;
    std::string reasons;
    std::vector<std::pair<AgentAction, std::string>> transcript; // (action, observation)
    std::set<std::string> flags;
    bool failed = false;
    std::string failure;

    json to_json() const {
        json steps = json::array();
        for (const auto& [action, obs] : transcript)
            steps.push_back({{"action", action.to_json()}, {"observation", obs}});
        return json{{"answer", answer ? "yes" : "no"},
                    {"reasons", reasons},
                    {"transcript", steps},
                    {"flags", std::vector<std::string>(flags.begin(), flags.end())},
                    {"failed", failed},
                    {"failure", failure}};
    }
};

namespace detail {

inline std::string record_text_for(const CaseRecord& rec, RecordFormat fmt) {
    if (fmt == RecordFormat::structured && !rec.structured_items.empty())
        return records::structured_text(rec);
    return records::combine_key_elements(rec).text;
}

inline std::string scale_observation(const CaseRecord& rec, const ToolContext& ctx) {
    if (ctx.scale_mode == ScaleMode::unselected_totals)
        return scales::render_totals(rec.scale_scores, *ctx.catalog);
    return scales::render_performance(rec.scale_scores, *ctx.selected, *ctx.catalog);
}

// Marks whether every clinician-rated selected item the case was scored on
// indicates zero symptoms: questions at their minimum option, totals inside
// their lowest interpretation band.
inline bool clinician_scales_all_minimal(const CaseRecord& rec, const ToolContext& ctx) {
    if (!ctx.selected) return false;
    bool any = false;
    for (const auto& id : ctx.selected->items) {
        const auto& item = ctx.catalog->item(id);
        if (item.rater != scales::Rater::clinician) continue;
        auto it = rec.scale_scores.find(id);
        if (it == rec.scale_scores.end()) continue;
        any = true;
        if (item.kind == scales::ItemKind::total && !item.bands.empty()) {
            if (it->second > item.bands.front().hi) return false;
        } else {
            int min_score = item.options.empty() ? item.range->first : item.options.front().score;
            if (it->second != min_score) return false;
        }
    }
    return any;
}

} // namespace detail

struct RunLimits {
    int step_cap = 8;
    std::string model = "default";
};

// The single-agent diagnostic loop: prompt -> parsed action -> tool dispatch
// -> observation, until Finish or the step cap. Tool observations are exactly
// the retrieval/scales/records module outputs.
inline Diagnosis run_angel(Variant variant, const CaseRecord& rec, const ToolContext& ctx,
                           llm::Provider& provider, RunLimits limits = {}) {
    if (!ctx.catalog) throw Error("run_angel: tool context missing the scale catalog");
    if (ctx.scale_mode == ScaleMode::selected && !ctx.selected)
        throw Error("run_angel: tool context missing the selected item set");
    if (!ctx.kb_store || !ctx.embedder)
        throw Error("run_angel: tool context missing the criteria store or embedder");
    if (variant != Variant::R && (!ctx.record_store || !ctx.scale_store))
        throw Error("run_angel: variant " + to_string(variant) + " requires case stores");

    Diagnosis diag;
    const auto& allowed = allowed_actions(variant);
    bool matched_mood_criterion = false;
    bool rejected_once = false;

    std::vector<llm::ChatMessage> messages;
    messages.push_back({"system", system_prompt(variant, rec.case_id)});
    messages.push_back({"user", "Begin the diagnosis for visitor " + rec.case_id + "."});

    auto fail = [&](const std::string& why) {
        diag.failed = true;
        diag.failure = why;
        return diag;
    };

    for (int step = 0; step < limits.step_cap; ++step) {
        llm::ProviderRequest req;
        req.model = limits.model;
        req.messages = messages;
        auto raw = provider.complete(req);

        AgentAction action;
        try {
            action = parse_action(raw);
        } catch (const Error& e) {
            // one repair re-prompt embedding the parser error
            auto repair = messages;
            repair.push_back({"assistant", raw});
            repair.push_back({"user", std::string("Your previous response could not be parsed: ") +
                                          e.what() + " Respond again with exactly the JSON format "
                                          "described above."});
            llm::ProviderRequest retry;
            retry.model = limits.model;
            retry.messages = repair;
            raw = provider.complete(retry);
            try {
                action = parse_action(raw);
            } catch (const Error& e2) {
                return fail(std::string("unparseable action after repair: ") + e2.what());
            }
        }

        if (!allowed.count(action.name)) {
            std::string obs = "Action " + to_string(action.name) +
                              " is not available for this agent. Choose one of the listed actions.";
            diag.transcript.emplace_back(action, obs);
            if (rejected_once)
                return fail("agent repeated a disallowed action: " + to_string(action.name));
            rejected_once = true;
            messages.push_back({"assistant", raw});
            messages.push_back({"user", "Observation: " + obs});
            continue;
        }

        if (action.is_finish()) {
            diag.answer = action.answer() == "yes";
            diag.reasons = action.reasons();
            diag.transcript.emplace_back(action, "diagnosis recorded");
            if (matched_mood_criterion && detail::clinician_scales_all_minimal(rec, ctx))
                diag.flags.insert("record_scale_conflict");
            return diag;
        }

        std::string obs;
        try {
            switch (action.name) {
                case ActionName::toggle_visitor_record: {
                    if (!rec.has_record()) {
                        obs = "The visitor has no medical record available.";
                        break;
                    }
                    auto shown = detail::record_text_for(rec, ctx.agent_format);
                    auto match_input = detail::record_text_for(rec, ctx.matching_format);
                    auto matches =
                        retrieval::match_symptoms(match_input, *ctx.kb_store, *ctx.embedder, ctx.top_k);
                    for (const auto& h : matches.hits) {
                        auto cls = h.payload.at("disorder_class").get<std::string>();
                        if (cls == "Bipolar and Related Disorders" || cls == "Depressive Disorders")
                            matched_mood_criterion = true;
                    }
                    obs = "Medical record:\n" + shown + "\n\n" +
                          retrieval::format_symptom_matches(matches);
                    break;
                }
                case ActionName::get_scale_performances:
                    obs = detail::scale_observation(rec, ctx);
                    break;
                case ActionName::previous_cases_display:
                case ActionName::previous_cases_analysis: {
                    auto mode = action.name == ActionName::previous_cases_display
                                    ? retrieval::RetrievalMode::display
                                    : retrieval::RetrievalMode::analysis;
                    auto res = retrieval::retrieve_similar_records(
                        rec, *ctx.record_store, *ctx.embedder, ctx.top_k, mode,
                        ctx.analysis_provider, ctx.model,
                        ctx.matching_format == RecordFormat::structured);
                    obs = res.text;
                    break;
                }
                case ActionName::previous_scales_display:
                case ActionName::previous_scales_analysis: {
                    auto mode = action.name == ActionName::previous_scales_display
                                    ? retrieval::RetrievalMode::display
                                    : retrieval::RetrievalMode::analysis;
                    auto res = retrieval::retrieve_similar_scales(
                        rec, *ctx.scale_store, *ctx.embedder, *ctx.selected, *ctx.catalog, ctx.top_k,
                        mode, ctx.analysis_provider, ctx.model);
                    obs = res.text;
                    break;
                }
                default: break;
            }
        } catch (const Error& e) {
            return fail(std::string("tool dispatch failed: ") + e.what());
        }

        diag.transcript.emplace_back(action, obs);
        messages.push_back({"assistant", raw});
        messages.push_back({"user", "Observation: " + obs});
    }
    return fail("step cap reached without a Finish action");
}

// ---------------------------------------------------------------------------
// Bare-LLM baseline
// ---------------------------------------------------------------------------

// Single prompt: combined medical record plus all-scale totals with their
// interpretation bands; scales without a computable total are simply absent.
inline std::string build_baseline_prompt(const CaseRecord& rec, const scales::ScaleCatalog& catalog) {
    std::string p = std::string(prompts::kBaselineRole) + "\nMedical record:\n";
    if (rec.has_record() && rec.record_stage != corpus::RecordStage::raw)
        p += records::combine_key_elements(rec).text + "\n";
    else
        p += "The visitor has no medical record available.\n";
    p += "\n" + scales::render_totals(rec.scale_scores, catalog);
    return p;
}

inline Diagnosis run_baseline(const CaseRecord& rec, const scales::ScaleCatalog& catalog,
                              llm::Provider& provider, const std::string& model = "default") {
    auto prompt = build_baseline_prompt(rec, catalog);
    auto ask = [&](const std::string& extra) {
        llm::ProviderRequest req;
        req.model = model;
        req.messages.push_back({"user", extra.empty() ? prompt : prompt + "\n" + extra});
        return provider.complete(req);
    };
    auto parse = [](const std::string& raw) {
        auto j = json::parse(raw);
        auto d = lower(trim(j.at("diagnosis").get<std::string>()));
        if (d != "yes" && d != "no")
            throw json::other_error::create(501, "diagnosis must be yes or no", nullptr);
        return std::pair<bool, std::string>{d == "yes", j.value("reasons", "")};
    };

    Diagnosis diag;
    auto raw = ask("");
    try {
        auto [ans, reasons] = parse(raw);
        diag.answer = ans;
        diag.reasons = reasons;
    } catch (const json::exception& e) {
        raw = ask(std::string("Your previous response was not valid JSON (") + e.what() +
                  "). Respond only with the JSON object described above.");
        try {
            auto [ans, reasons] = parse(raw);
            diag.answer = ans;
            diag.reasons = reasons;
        } catch (const json::exception& e2) {
            diag.failed = true;
            diag.failure = std::string("baseline output unparseable after repair: ") + e2.what();
            return diag;
        }
    }
    AgentAction finish;
    finish.name = ActionName::finish;
    finish.args = {{"answer", diag.answer ? "yes" : "no"}, {"reasons", diag.reasons}};
    finish.raw = raw;
    diag.transcript.emplace_back(finish, "diagnosis recorded");
    return diag;
}

} // namespace moodangels::agents
