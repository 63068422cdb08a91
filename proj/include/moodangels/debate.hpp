#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/agents.hpp"
#include "moodangels/prompts.hpp"
#include "moodangels/provider.hpp"

namespace moodangels::debate {

using json = nlohmann::json;
using agents::Diagnosis;
using agents::ToolContext;
using agents::Variant;
using corpus::CaseRecord;

struct JudgeDecision {
    bool end_debate = false;
    bool diagnose = false;
    std::string judge_reasons;
    std::string reasoning;

    json to_json() const {
        return json{{"judge", end_debate ? "yes" : "no"},
                    {"diagnose", diagnose ? "yes" : "no"},
                    {"judge_reasons", judge_reasons},
                    {"reasoning", reasoning}};
    }
};

struct DebateRound {
    std::string positive_text;
    std::string negative_text;
    JudgeDecision judge;
};

struct DebateTranscript {
    std::array<std::pair<Variant, Diagnosis>, 3> angel_inputs;
    std::vector<DebateRound> rounds;
    Diagnosis final;
    bool consensus = false;

    json to_json() const {
        json angels = json::array();
        for (const auto& [v, d] : angel_inputs)
            angels.push_back({{"variant", agents::to_string(v)}, {"diagnosis", d.to_json()}});
        json rounds_j = json::array();
        for (const auto& r : rounds)
            rounds_j.push_back({{"positive", r.positive_text},
                                {"negative", r.negative_text},
                                {"judge", r.judge.to_json()}});
        return json{{"angels", angels},
                    {"rounds", rounds_j},
                    {"final", final.to_json()},
                    {"consensus", consensus}};
    }
};

struct DebateLimits {
    int max_rounds = 3;
    std::string model = "default";
    bool degrade_to_majority = false; // on single-angel failure
};

namespace detail {

inline std::string angel_statement(const std::string& description, const Diagnosis& d) {
    return description + " believes the visitor " + (d.answer ? "is" : "isn't") +
           " diagnosed with a mood disorder. Their reasoning: " + d.reasons + "\n";
}

// Shared context block: the three Angels' opinions plus the original case
// information (record, scale performances, retrieved references).
inline std::string case_context(const CaseRecord& rec, const ToolContext& ctx,
                                const std::array<std::pair<Variant, Diagnosis>, 3>& angels) {
    std::string out = "Visitor Information:\n"
                      "This is a challenging case, and three agents have already provided their "
                      "diagnoses:\n";
    out += angel_statement("Agent without prior case retrieval", angels[0].second);
    out += angel_statement("Agent who retrieved past cases but did not analyze them",
                           angels[1].second);
    out += angel_statement("Agent who retrieved and analyzed past cases", angels[2].second);

    out += "\nOriginal Case Information:\n";
    out += "Visitor's Medical Record: ";
    if (rec.has_record())
        out += records::combine_key_elements(rec).text + "\n";
    else
        out += "The visitor has no medical record available.\n";

    out += "Visitor's Scale Performances:\n" + agents::detail::scale_observation(rec, ctx);

    if (rec.has_record() && ctx.kb_store) {
        auto match_input = agents::detail::record_text_for(rec, ctx.matching_format);
        auto matches = retrieval::match_symptoms(match_input, *ctx.kb_store, *ctx.embedder, ctx.top_k);
        out += "\nSymptom Matching Results:\n" + retrieval::format_symptom_matches(matches);
    }
    if (ctx.record_store) {
        auto res = retrieval::retrieve_similar_records(
            rec, *ctx.record_store, *ctx.embedder, ctx.top_k, retrieval::RetrievalMode::display,
            nullptr, ctx.model, ctx.matching_format == agents::RecordFormat::structured);
        out += "\nReference from Past Medical Records:\n" + res.text;
    }
    if (ctx.scale_store && ctx.selected) {
        auto res = retrieval::retrieve_similar_scales(rec, *ctx.scale_store, *ctx.embedder,
                                                      *ctx.selected, *ctx.catalog, ctx.top_k,
                                                      retrieval::RetrievalMode::display);
        out += "\nReference from Past Scale Performances:\n" + res.text;
    }
    return out;
}

inline std::string round_history(const std::vector<DebateRound>& rounds) {
    if (rounds.empty()) return "";
    std::string out = "\nDebate so far:\n";
    for (size_t i = 0; i < rounds.size(); ++i) {
        out += "Round " + std::to_string(i + 1) + " positive: " + rounds[i].positive_text + "\n";
        out += "Round " + std::to_string(i + 1) + " negative: " + rounds[i].negative_text + "\n";
    }
    return out;
}

// JSON field extraction with a single repair re-prompt, mirroring the agents'
// repair policy.
template <typename Parse>
auto ask_json(llm::Provider& provider, const std::string& model, const std::string& system,
              const std::string& user, Parse parse) {
    auto ask = [&](const std::string& extra) {
        llm::ProviderRequest req;
        req.model = model;
        req.messages.push_back({"system", system});
        req.messages.push_back({"user", extra.empty() ? user : user + "\n" + extra});
        return provider.complete(req);
    };
    auto raw = ask("");
    try {
        return parse(raw);
    } catch (const json::exception& e) {
        raw = ask(std::string("Your previous response was not valid JSON (") + e.what() +
                  "). Respond only with the JSON object described above.");
        return parse(raw); // a second parse failure propagates
    }
}

inline std::string debater_turn(bool positive, llm::Provider& provider, const std::string& model,
                                const std::string& context, const std::string& history) {
    auto system = std::string(positive ? prompts::kDebateRolePositive : prompts::kDebateRoleNegative);
    auto parse = [](const std::string& raw) {
        auto j = json::parse(raw);
        return j.at("response").get<std::string>();
    };
    try {
        return ask_json(provider, model, system + "\n" + context + history +
                                             std::string(prompts::kDebateTail),
                        positive ? "Present the opening argument for your stance."
                                 : "Respond to the positive side and present your stance.",
                        parse);
    } catch (const json::exception& e) {
        throw Error(std::string("debate agent output unparseable after repair: ") + e.what());
    }
}

inline JudgeDecision judge_turn(llm::Provider& provider, const std::string& model,
                                const std::string& context, const std::string& history,
                                const std::string& instruction) {
    auto system = std::string(prompts::kJudgeRole) + "\n" + context + history +
                  std::string(prompts::kJudgeTail);
    auto parse = [](const std::string& raw) {
        auto j = json::parse(raw);
        auto yn = [&](const std::string& key) {
            auto v = lower(trim(j.at(key).get<std::string>()));
            if (v != "yes" && v != "no")
                throw json::other_error::create(501, key + " must be yes or no", nullptr);
            return v == "yes";
        };
        JudgeDecision d;
        d.end_debate = yn("judge");
        d.diagnose = yn("diagnose");
        if (j.contains("thoughts")) {
            d.judge_reasons = j["thoughts"].value("judge_reasons", "");
            d.reasoning = j["thoughts"].value("reasoning", "");
        }
        return d;
    };
    try {
        return ask_json(provider, model, system, instruction, parse);
    } catch (const json::exception& e) {
        throw Error(std::string("judge output unparseable after repair: ") + e.what());
    }
}

} // namespace detail

// Consensus-or-debate aggregation of the three Angel variants. Consensus is
// binding; otherwise positive and negative debaters alternate (positive first)
// until the judge concludes or the round cap forces a verdict.
inline DebateTranscript multi_angels(const CaseRecord& rec, const ToolContext& ctx,
                                     llm::Provider& provider, DebateLimits limits = {},
                                     agents::RunLimits angel_limits = {}) {
    DebateTranscript t;
    const Variant variants[3] = {Variant::R, Variant::D, Variant::C};
    for (int i = 0; i < 3; ++i) {
        auto d = agents::run_angel(variants[i], rec, ctx, provider, angel_limits);
        if (d.failed && !limits.degrade_to_majority)
            throw Error("multi_angels: " + agents::to_string(variants[i]) +
                        " failed for case " + rec.case_id + ": " + d.failure);
        t.angel_inputs[i] = {variants[i], std::move(d)};
    }

    int yes = 0, valid = 0;
    for (const auto& [v, d] : t.angel_inputs) {
        if (d.failed) continue;
        ++valid;
        if (d.answer) ++yes;
    }
    if (valid == 0) throw Error("multi_angels: all angel runs failed for case " + rec.case_id);

    auto context = detail::case_context(rec, ctx, t.angel_inputs);
    t.consensus = (yes == valid) || (yes == 0);

    if (t.consensus) {
        // the judge consolidates the reasoning; the consensus answer is binding
        auto decision = detail::judge_turn(
            provider, limits.model, context, "",
            "All three agents agree. Conclude the consultation with the final diagnosis.");
        t.final.answer = yes > 0;
        t.final.reasons = decision.reasoning.empty()
                              ? t.angel_inputs[0].second.reasons
                              : decision.reasoning;
        if (decision.diagnose != t.final.answer)
            t.final.flags.insert("judge_disagreed_with_consensus");
        return t;
    }

    for (int round = 0; round < limits.max_rounds; ++round) {
        DebateRound r;
        auto history = detail::round_history(t.rounds);
        r.positive_text = detail::debater_turn(true, provider, limits.model, context, history);
        auto with_positive = history + "\nPositive side this round: " + r.positive_text + "\n";
        r.negative_text = detail::debater_turn(false, provider, limits.model, context, with_positive);
        auto full = history + "\nRound " + std::to_string(round + 1) +
                    " positive: " + r.positive_text + "\nRound " + std::to_string(round + 1) +
                    " negative: " + r.negative_text + "\n";
        r.judge = detail::judge_turn(provider, limits.model, context, full,
                                     "Evaluate this round and decide whether the debate should "
                                     "conclude.");
        t.rounds.push_back(r);
        if (r.judge.end_debate) break;
    }

    const auto& last = t.rounds.back().judge;
    t.final.answer = last.diagnose;
    t.final.reasons = last.reasoning;
    return t;
}

} // namespace moodangels::debate
