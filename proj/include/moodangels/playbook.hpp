#pragma once

#include <regex>
#include <string>

#include "moodangels/agents.hpp"
#include "moodangels/provider.hpp"
#include "moodangels/records.hpp"

// A deterministic answering policy for the scripted provider: enough clinical
// common sense to drive full offline pipeline runs (agents, debate, baseline,
// record processing) with reproducible outputs. It is a test double, not a
// diagnostic model.

namespace moodangels::playbook {

namespace detail {

inline size_t count_occurrences(const std::string& hay, const std::string& needle) {
    size_t n = 0, pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

inline int severity_score(const std::string& text) {
    int score = 0;
    if (contains(text, "severe depression") || contains(text, "must have depression")) score += 2;
    else if (contains(text, "moderate depression")) score += 1;
    if (contains(text, "may have depression")) score += 1;
    if (contains(text, "Ideas or gestures of suicide") || contains(text, "Attempts at suicide"))
        score += 1;
    // self-reported suicidal ideation on most days
    if (contains(text, "thoughts of death or self-harm: Nearly every day") ||
        contains(text, "thoughts of death or self-harm: More than half the days"))
        score += 1;
    return score;
}

inline std::string first_case_id(const std::string& text) {
    static const std::regex re(R"(Case (\d+))");
    std::smatch m;
    if (std::regex_search(text, m, re)) return m[1];
    return "";
}

inline std::string angel_answer(const std::string& convo) {
    int score = severity_score(convo);
    // neighbour vote from similar-case observations, when present
    size_t yes = count_occurrences(convo, "(mood disorder: yes");
    size_t no = count_occurrences(convo, "(mood disorder: no");
    if (yes + no >= 5) {
        if (yes >= 4) score += 1;
        else if (yes <= 1) score -= 1;
    }
    return score >= 2 ? "yes" : "no";
}

} // namespace detail

inline llm::ScriptedProvider::Playbook make() {
    return [](const llm::ProviderRequest& req) -> std::optional<std::string> {
        const auto convo = req.concat_text();

        // debate agents
        if (contains(convo, "You believe the current visitor has a mood disorder")) {
            return nlohmann::json{
                {"response",
                 "The grouped scale performances and the matched criteria indicate clinically "
                 "significant depressive symptoms; the burden of evidence supports a mood disorder."},
                {"thoughts", {{"plan", "argue the affirmative"}, {"criticism", "none"}}}}
                .dump();
        }
        if (contains(convo, "You believe the current visitor does not have a mood disorder")) {
            return nlohmann::json{
                {"response",
                 "Clinician-rated scales show little or no depressive signal and the reported "
                 "symptoms are better explained by another condition; a mood disorder is not "
                 "established."},
                {"thoughts", {{"plan", "argue the negative"}, {"criticism", "none"}}}}
                .dump();
        }

        // judge: end after the first round, diagnose with the angel majority
        if (contains(convo, "acting as the judge")) {
            size_t yes = detail::count_occurrences(convo, "believes the visitor is diagnosed");
            size_t no = detail::count_occurrences(convo, "believes the visitor isn't diagnosed");
            return nlohmann::json{
                {"judge", "yes"},
                {"diagnose", yes >= no ? "yes" : "no"},
                {"thoughts",
                 {{"plan", "conclude"},
                  {"criticism", "none"},
                  {"judge_reasons", "both sides have presented their core arguments"},
                  {"reasoning", "the majority position is consistent with the scale evidence"}}}}
                .dump();
        }

        // bare-LLM baseline
        if (contains(convo, "\"diagnosis\"")) {
            bool yes = contains(convo, "must have depression") || contains(convo, "severe depression");
            return nlohmann::json{
                {"diagnosis", yes ? "yes" : "no"},
                {"reasons", yes ? "scale totals fall in depression ranges"
                                : "scale totals do not reach depression ranges"}}
                .dump();
        }

        // angel action loop
        if (contains(convo, "Available Actions:")) {
            size_t steps = 0;
            for (const auto& m : req.messages)
                if (m.role == "assistant") ++steps;
            std::string digit_id = "0";
            {
                static const std::regex re(R"(visitor (\d+))");
                std::smatch m;
                if (std::regex_search(convo, m, re)) digit_id = m[1];
            }
            bool is_d = contains(convo, "previous_cases_display");
            bool is_c = contains(convo, "previous_cases_analysis");
            std::string action;
            if (steps == 0) action = "toggle_visitor_record";
            else if (steps == 1) action = "get_scale_performances";
            else if (steps == 2 && is_d) action = "previous_scales_display";
            else if (steps == 2 && is_c) action = "previous_scales_analysis";
            else action = "finish";

            nlohmann::json j;
            if (action == "finish") {
                auto ans = detail::angel_answer(convo);
                j = {{"action",
                      {{"name", "finish"},
                       {"args",
                        {{"answer", ans},
                         {"reasons", ans == "yes"
                                         ? "grouped scale performances show clinically relevant "
                                           "depressive severity"
                                         : "grouped scale performances show no clinically relevant "
                                           "depressive severity"}}}}},
                     {"thoughts",
                      {{"plan", "conclude the diagnosis"},
                       {"criticism", "none"},
                       {"observation", "all evidence gathered"},
                       {"reasoning", "decision follows the grouped severity bands"}}}};
            } else {
                j = {{"action", {{"name", action}, {"args", {{"digit_id", digit_id}}}}},
                     {"thoughts",
                      {{"plan", "gather evidence step by step"},
                       {"criticism", "none"},
                       {"observation", "proceeding"},
                       {"reasoning", "collect the next evidence source"}}}};
            }
            return j.dump();
        }

        // comparative analysis of retrieved cases
        if (contains(convo, "Retrieved cases:")) {
            auto id = detail::first_case_id(convo);
            return "Compared with Case " + (id.empty() ? std::string("?") : id) +
                   " and the other retrieved cases, the visitor shows a similar grouped-scale "
                   "pattern; the retrieved diagnoses are split and serve as reference only.";
        }

        // record processing: date relativization
        if (contains(convo, "Replace specific dates")) {
            static const std::regex re(
                R"(Present illness history: ([\s\S]*))");
            std::smatch m;
            std::string text = std::regex_search(convo, m, re) ? std::string(m[1]) : convo;
            for (const auto& pat : records::default_date_patterns())
                text = std::regex_replace(text, pat, "some time ago");
            return trim(text);
        }

        // record processing: structurization
        if (contains(convo, "List each item separately")) {
            static const std::regex re(R"(Present illness: ([\s\S]*))");
            std::smatch m;
            std::string text = std::regex_search(convo, m, re) ? std::string(m[1]) : convo;
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& sentence : split(text, '.')) {
                auto s = trim(sentence);
                if (!s.empty()) arr.push_back("- " + s);
            }
            return arr.dump();
        }

        return std::nullopt;
    };
}

// A ready-to-use scripted provider with the playbook installed.
inline llm::ScriptedProvider make_provider() {
    llm::ScriptedProvider p;
    p.set_playbook(make());
    return p;
}

} // namespace moodangels::playbook
