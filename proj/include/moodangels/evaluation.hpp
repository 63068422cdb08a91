#pragma once

#include <atomic>
#include <cmath>
#include <thread>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/agents.hpp"
#include "moodangels/debate.hpp"
#include "moodangels/util.hpp"

namespace moodangels::evaluation {

using json = nlohmann::json;
using corpus::CaseRecord;
using corpus::LabeledPrediction;

struct ConfusionCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;

    long total() const { return tp + fp + fn + tn; }

    static ConfusionCounts from(const std::vector<LabeledPrediction>& preds) {
        ConfusionCounts c;
        for (const auto& p : preds) {
            if (p.predicted && p.gold) c.tp++;
            else if (p.predicted && !p.gold) c.fp++;
            else if (!p.predicted && p.gold) c.fn++;
            else c.tn++;
        }
        return c;
    }
};

struct Metrics {
    double recall = 0;   // positive-class recall; reported as Sensitivity as well
    double accuracy = 0;
    double mcc = 0;
    double macro_f1 = 0;
    bool degenerate_mcc = false; // an MCC denominator factor was 0

    json to_json() const {
        return json{{"recall", recall},
                    {"accuracy", accuracy},
                    {"mcc", mcc},
                    {"macro_f1", macro_f1},
                    {"degenerate_mcc", degenerate_mcc}};
    }
};

inline Metrics metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw Error("metrics: no predictions");
    Metrics m;
    double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
    m.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    m.accuracy = (tp + tn) / static_cast<double>(c.total());

    double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom == 0) {
        m.mcc = 0.0;
        m.degenerate_mcc = true;
    } else {
        m.mcc = (tp * tn - fp * fn) / std::sqrt(denom);
    }

    auto f1 = [](double tp_, double fp_, double fn_) {
        double denom_ = 2 * tp_ + fp_ + fn_;
        return denom_ > 0 ? 2 * tp_ / denom_ : 0.0;
    };
    m.macro_f1 = 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
    return m;
}

inline Metrics metrics(const std::vector<LabeledPrediction>& preds) {
    if (preds.empty()) throw Error("metrics: empty prediction list");
    return metrics(ConfusionCounts::from(preds));
}

// ---------------------------------------------------------------------------
// Ablation settings
// ---------------------------------------------------------------------------

// The four published configurations: (symptom-matching format, record format
// returned to the agent, scale selection mode).
struct AblationSetting {
    int number = 1;
    agents::RecordFormat record_format_matching = agents::RecordFormat::unstructured;
    agents::RecordFormat record_format_agent = agents::RecordFormat::unstructured;
    agents::ScaleMode scale_mode = agents::ScaleMode::selected;

    static AblationSetting get(int n) {
        using RF = agents::RecordFormat;
        using SM = agents::ScaleMode;
        switch (n) {
            case 1: return {1, RF::unstructured, RF::unstructured, SM::selected};
            case 2: return {2, RF::structured, RF::unstructured, SM::selected};
            case 3: return {3, RF::structured, RF::structured, SM::selected};
            case 4: return {4, RF::unstructured, RF::unstructured, SM::unselected_totals};
            default: throw Error("ablation setting must be 1..4, got " + std::to_string(n));
        }
    }

    json to_json() const {
        auto rf = [](agents::RecordFormat f) {
            return f == agents::RecordFormat::structured ? "structured" : "unstructured";
        };
        return json{{"setting", number},
                    {"record_format_matching", rf(record_format_matching)},
                    {"record_format_agent", rf(record_format_agent)},
                    {"scale_mode", scale_mode == agents::ScaleMode::selected ? "selected"
                                                                             : "unselected_totals"}};
    }
};

// ---------------------------------------------------------------------------
// Run harness
// ---------------------------------------------------------------------------

enum class Method { baseline, angel_r, angel_d, angel_c, multi };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::baseline: return "baseline";
        case Method::angel_r: return "angel_r";
        case Method::angel_d: return "angel_d";
        case Method::angel_c: return "angel_c";
        default: return "multi";
    }
}

inline Method method_from(const std::string& s) {
    if (s == "baseline") return Method::baseline;
    if (s == "angel_r") return Method::angel_r;
    if (s == "angel_d") return Method::angel_d;
    if (s == "angel_c") return Method::angel_c;
    if (s == "multi") return Method::multi;
    throw Error("unknown method: " + s);
}

struct CaseResult {
    std::string case_id;
    bool predicted = false;
    bool gold = false;
    bool failed = false;
    std::string failure;
    std::string reasons;
    std::vector<std::string> flags;
    json transcript; // full diagnosis or debate transcript
};

struct RunReport {
    std::string method;
    corpus::LabelCounts label_counts;
    Metrics scores;
    size_t evaluated = 0;
    size_t failures = 0;
    bool count_failures_as_wrong = true;
    std::vector<CaseResult> ledger;
    json config = json::object();
    json cache_stats = json::object();
    std::vector<std::string> audit_overlap; // test ids found inside the candidate stores

    json to_json() const {
        json cases = json::array();
        for (const auto& r : ledger) {
            cases.push_back({{"case_id", r.case_id},
                             {"predicted", r.predicted ? "yes" : "no"},
                             {"gold", r.gold ? "mood_disorder" : "not_mood_disorder"},
                             {"failed", r.failed},
                             {"failure", r.failure},
                             {"reasons", r.reasons},
                             {"flags", r.flags}});
        }
        return json{{"method", method},
                    {"labels",
                     {{"normal", label_counts.normal},
                      {"mood_disorder", label_counts.mood},
                      {"other_disease", label_counts.other}}},
                    {"metrics", scores.to_json()},
                    {"evaluated", evaluated},
                    {"failures", failures},
                    {"count_failures_as_wrong", count_failures_as_wrong},
                    {"cases", cases},
                    {"config", config},
                    {"cache", cache_stats},
                    {"audit_overlap", audit_overlap}};
    }

    std::string to_markdown() const {
        char buf[256];
        std::string out = "| Model | Sensitivity | Accuracy | MCC | Macro F1 |\n";
        out += "| --- | --- | --- | --- | --- |\n";
        std::snprintf(buf, sizeof buf, "| %s | %.3f | %.3f | %.3f | %.3f |\n", method.c_str(),
                      scores.recall, scores.accuracy, scores.mcc, scores.macro_f1);
        out += buf;
        std::snprintf(buf, sizeof buf,
                      "\nEvaluated %zu cases (%zu failures, counted as %s). Labels: %zu normal, "
                      "%zu mood disorder, %zu other.\n",
                      evaluated, failures, count_failures_as_wrong ? "wrong" : "excluded",
                      label_counts.normal, label_counts.mood, label_counts.other);
        out += buf;
        return out;
    }
};

struct RunOptions {
    Method method = Method::angel_r;
    AblationSetting setting = AblationSetting::get(1);
    bool count_failures_as_wrong = true;
    agents::RunLimits angel_limits = {};
    debate::DebateLimits debate_limits = {};
    size_t jobs = 1; // concurrent cases (providers and the cache are shared)
};

inline bool is_positive(corpus::GoldLabel l) { return l == corpus::GoldLabel::mood_disorder; }

// Runs one method over a labeled test split and aggregates the metric report
// plus a per-case ledger. Tool configuration comes from the ablation setting.
inline RunReport evaluate_run(const std::vector<CaseRecord>& test_cases, agents::ToolContext ctx,
                              llm::Provider& provider, const RunOptions& opts) {
    if (test_cases.empty()) throw Error("evaluate_run: empty test split");
    for (const auto& rec : test_cases)
        if (!rec.gold_label)
            throw Error("evaluate_run: case " + rec.case_id + " is missing its gold label");

    ctx.matching_format = opts.setting.record_format_matching;
    ctx.agent_format = opts.setting.record_format_agent;
    ctx.scale_mode = opts.setting.scale_mode;

    RunReport report;
    report.method = to_string(opts.method);
    report.label_counts = corpus::count_labels(test_cases);
    report.count_failures_as_wrong = opts.count_failures_as_wrong;
    report.config["ablation"] = opts.setting.to_json();

    // split audit: test ids must never sit inside the retrieval candidate set
    for (const auto* store : {ctx.record_store, ctx.scale_store}) {
        if (!store) continue;
        auto ids = store->ids();
        for (const auto& rec : test_cases)
            if (std::find(ids.begin(), ids.end(), rec.case_id) != ids.end())
                report.audit_overlap.push_back(rec.case_id);
    }

    auto run_case = [&](const CaseRecord& rec) {
        CaseResult result;
        result.case_id = rec.case_id;
        result.gold = is_positive(*rec.gold_label);
        try {
            if (opts.method == Method::baseline) {
                auto d = agents::run_baseline(rec, *ctx.catalog, provider, opts.angel_limits.model);
                result.predicted = d.answer;
                result.reasons = d.reasons;
                result.failed = d.failed;
                result.failure = d.failure;
                result.flags.assign(d.flags.begin(), d.flags.end());
                result.transcript = d.to_json();
            } else if (opts.method == Method::multi) {
                auto t = debate::multi_angels(rec, ctx, provider, opts.debate_limits,
                                              opts.angel_limits);
                result.predicted = t.final.answer;
                result.reasons = t.final.reasons;
                result.flags.assign(t.final.flags.begin(), t.final.flags.end());
                result.transcript = t.to_json();
            } else {
                auto variant = opts.method == Method::angel_r   ? agents::Variant::R
                               : opts.method == Method::angel_d ? agents::Variant::D
                                                                : agents::Variant::C;
                auto d = agents::run_angel(variant, rec, ctx, provider, opts.angel_limits);
                result.predicted = d.answer;
                result.reasons = d.reasons;
                result.failed = d.failed;
                result.failure = d.failure;
                result.flags.assign(d.flags.begin(), d.flags.end());
                result.transcript = d.to_json();
            }
        } catch (const Error& e) {
            result.failed = true;
            result.failure = e.what();
        }
        return result;
    };

    // cases run independently up to the jobs bound; aggregation stays in
    // input order so reports are identical for any bound
    std::vector<CaseResult> results(test_cases.size());
    size_t jobs = std::max<size_t>(1, opts.jobs);
    if (jobs == 1) {
        for (size_t i = 0; i < test_cases.size(); ++i) results[i] = run_case(test_cases[i]);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= test_cases.size()) break;
                results[i] = run_case(test_cases[i]);
            }
        };
        std::vector<std::thread> pool;
        for (size_t t = 0; t < std::min(jobs, test_cases.size()); ++t)
            pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<LabeledPrediction> preds;
    for (auto& result : results) {
        if (result.failed) {
            report.failures++;
            if (opts.count_failures_as_wrong) {
                result.predicted = !result.gold; // score the failure as a miss
                preds.push_back({result.case_id, result.predicted, result.reasons, result.gold});
            }
        } else {
            preds.push_back({result.case_id, result.predicted, result.reasons, result.gold});
        }
        report.ledger.push_back(std::move(result));
    }

    report.evaluated = preds.size();
    if (preds.empty()) throw Error("evaluate_run: no scoreable predictions");
    report.scores = metrics(preds);
    return report;
}

} // namespace moodangels::evaluation
