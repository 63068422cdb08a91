#pragma once

#include <regex>
#include <string>
#include <vector>

#include "moodangels/corpus.hpp"
#include "moodangels/kb.hpp"
#include "moodangels/provider.hpp"
#include "moodangels/util.hpp"

namespace moodangels::records {

using corpus::CaseRecord;
using corpus::RecordStage;

enum class Provenance { source, provider_generated, human_revised };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::source: return "source";
        case Provenance::provider_generated: return "provider_generated";
        default: return "human_revised";
    }
}

struct RecordStagePayload {
    RecordStage stage = RecordStage::raw;
    std::string text;                    // raw / relativized / combined stages
    std::vector<std::string> items;      // structured stage
    Provenance provenance = Provenance::source;
};

// ---------------------------------------------------------------------------
// Absolute-date detection
// ---------------------------------------------------------------------------

// Default patterns: ISO-style numeric dates, CJK year-month forms, and
// English month names next to a day or year.
inline const std::vector<std::regex>& default_date_patterns() {
    static const std::vector<std::regex> patterns = [] {
        std::vector<std::regex> p;
        p.emplace_back(R"((19|20)\d{2}[-/]\d{1,2}([-/]\d{1,2})?)");
        p.emplace_back(R"((19|20)\d{2}年(\d{1,2}月)?(\d{1,2}日)?)");
        p.emplace_back(
            R"((January|February|March|April|May|June|July|August|September|October|November|December)\s+\d{1,2}(st|nd|rd|th)?,?\s+(19|20)\d{2})");
        p.emplace_back(
            R"(\d{1,2}\s+(January|February|March|April|May|June|July|August|September|October|November|December)\s+(19|20)\d{2})");
        return p;
    }();
    return patterns;
}

inline std::vector<std::string> find_absolute_dates(
    const std::string& text, const std::vector<std::regex>& patterns = default_date_patterns()) {
    std::vector<std::string> found;
    for (const auto& re : patterns) {
        auto begin = std::sregex_iterator(text.begin(), text.end(), re);
        for (auto it = begin; it != std::sregex_iterator(); ++it)
            found.push_back(it->str());
    }
    return found;
}

// ---------------------------------------------------------------------------
// Disorder-label leakage guard
// ---------------------------------------------------------------------------

// The 18 disorder class names plus the three labels most likely to leak.
inline const std::vector<std::string>& disorder_blocklist() {
    static const std::vector<std::string> terms = [] {
        std::vector<std::string> t = kb::disorder_classes();
        t.insert(t.end(), {"depression", "bipolar", "schizophrenia"});
        return t;
    }();
    return terms;
}

inline bool contains_blocked_term(const std::string& text) {
    auto low = lower(text);
    for (const auto& term : disorder_blocklist())
        if (contains(low, lower(term))) return true;
    return false;
}

// Remove every blocklisted term (case-insensitive) and tidy whitespace.
inline std::string strip_disorder_labels(std::string text) {
    for (const auto& term : disorder_blocklist()) {
        auto low_term = lower(term);
        for (;;) {
            auto low = lower(text);
            auto pos = low.find(low_term);
            if (pos == std::string::npos) break;
            text.erase(pos, low_term.size());
        }
    }
    // collapse doubled spaces left by removals
    std::string out;
    for (char c : text) {
        if (c == ' ' && !out.empty() && out.back() == ' ') continue;
        out += c;
    }
    return trim(out);
}

// ---------------------------------------------------------------------------
// Stage transforms
// ---------------------------------------------------------------------------

inline constexpr std::string_view kRelativizePrompt =
    "Replace specific dates in the present illness history with relative time expressions "
    "based on the patient's admission date. Avoid using exact dates after the replacement. "
    "Respond with the rewritten present illness text only.";

inline constexpr std::string_view kStructurizePrompt =
    "Structure the medical record by extracting and summarizing the patient's symptoms and "
    "background. List each item separately, using \"-\" as a delimiter. Respond only in JSON "
    "format as an array of strings.";

// Provider-assisted date relativization with a machine validator: any residual
// absolute date triggers one corrective re-prompt, then a hard error.
inline RecordStagePayload relativize_dates(const CaseRecord& rec, llm::Provider& provider,
                                           const std::string& model = "default") {
    if (trim(rec.present_illness).empty())
        throw Error("relativize_dates: case " + rec.case_id + " has no present illness text");
    if (trim(rec.visit_date).empty())
        throw Error("relativize_dates: case " + rec.case_id + " has no visit date");

    auto ask = [&](const std::string& extra) {
        llm::ProviderRequest req;
        req.model = model;
        req.messages.push_back({"system", std::string(kRelativizePrompt)});
        std::string user = "Admission date: " + rec.visit_date + "\nPresent illness history: " +
                           rec.present_illness;
        if (!extra.empty()) user += "\n" + extra;
        req.messages.push_back({"user", user});
        return provider.complete(req);
    };

    auto text = ask("");
    auto residual = find_absolute_dates(text);
    if (!residual.empty()) {
        text = ask("Your previous rewrite still contained these exact dates: " +
                   join(residual, ", ") + ". Replace every one of them with a relative expression.");
        residual = find_absolute_dates(text);
        if (!residual.empty())
            throw Error("relativize_dates: absolute dates remain after retry: " + join(residual, ", "));
    }
    return {RecordStage::relativized, trim(text), {}, Provenance::provider_generated};
}

// Deterministic single-paragraph assembly: demographics sentence, chief
// complaint, then the present illness verbatim. No provider involved.
inline RecordStagePayload combine_key_elements(const CaseRecord& rec) {
    if (!rec.has_record())
        throw Error("combine_key_elements: case " + rec.case_id + " has no medical record");
    if (rec.record_stage == RecordStage::raw)
        throw Error("combine_key_elements: case " + rec.case_id + " is still at the raw stage");
    if (trim(rec.present_illness).empty())
        throw Error("combine_key_elements: case " + rec.case_id + " is missing present illness");
    if (trim(rec.visit_date).empty())
        throw Error("combine_key_elements: case " + rec.case_id + " is missing visit date");

    std::string para = "The visitor is a ";
    para += rec.gender == corpus::Gender::unspecified ? "client" : corpus::to_string(rec.gender) + " client";
    para += ", " + std::to_string(rec.age) + " years old";
    if (!trim(rec.occupation).empty()) para += ", working as " + trim(rec.occupation);
    para += ". Visit date: " + rec.visit_date + ".";
    if (!trim(rec.chief_complaint).empty()) para += " Chief complaint: " + trim(rec.chief_complaint) + ".";
    para += " Present illness: " + rec.present_illness;
    return {RecordStage::combined, para, {}, Provenance::source};
}

// Provider-assisted structurization into "-"-prefixed items, with one JSON
// repair re-prompt and the disorder-label leakage guard applied to the output.
inline RecordStagePayload structurize(const CaseRecord& rec, llm::Provider& provider,
                                      const std::string& model = "default") {
    if (rec.record_stage != RecordStage::combined && rec.record_stage != RecordStage::structured)
        throw Error("structurize: case " + rec.case_id + " must reach the combined stage first");
    auto combined = combine_key_elements(rec);

    auto ask = [&](const std::string& extra) {
        llm::ProviderRequest req;
        req.model = model;
        req.messages.push_back({"system", std::string(kStructurizePrompt)});
        std::string user = "Medical record: " + combined.text;
        if (!extra.empty()) user += "\n" + extra;
        req.messages.push_back({"user", user});
        return provider.complete(req);
    };

    auto parse_items = [](const std::string& raw) {
        auto j = nlohmann::json::parse(raw);
        if (j.is_object()) {
            // accept a single-key object wrapping the array
            if (j.size() == 1 && j.begin()->is_array()) j = *j.begin();
            else throw nlohmann::json::other_error::create(501, "expected a JSON array of strings", nullptr);
        }
        if (!j.is_array()) throw nlohmann::json::other_error::create(501, "expected a JSON array", nullptr);
        std::vector<std::string> items;
        for (const auto& e : j) items.push_back(e.get<std::string>());
        return items;
    };

    std::vector<std::string> items;
    auto raw = ask("");
    try {
        items = parse_items(raw);
    } catch (const nlohmann::json::exception& e) {
        raw = ask(std::string("Your previous response was not valid JSON (") + e.what() +
                  "). Respond only with a JSON array of strings.");
        try {
            items = parse_items(raw);
        } catch (const nlohmann::json::exception& e2) {
            throw Error(std::string("structurize: provider output unparseable after repair: ") + e2.what());
        }
    }

    std::vector<std::string> cleaned;
    for (auto& item : items) {
        auto s = trim(item);
        while (!s.empty() && (s.front() == '-' || s.front() == ' ')) s.erase(s.begin());
        s = strip_disorder_labels(s);
        if (!s.empty()) cleaned.push_back("- " + s);
    }
    if (cleaned.empty()) throw Error("structurize: provider returned no usable items");
    return {RecordStage::structured, "", cleaned, Provenance::provider_generated};
}

inline CaseRecord apply_payload(const CaseRecord& rec, const RecordStagePayload& payload) {
    CaseRecord out = rec;
    out.record_stage = payload.stage;
    if (payload.stage == RecordStage::structured) out.structured_items = payload.items;
    else if (payload.stage == RecordStage::relativized) out.present_illness = payload.text;
    return out;
}

// Structured record rendered as one item per line (tool observation form).
inline std::string structured_text(const CaseRecord& rec) {
    return join(rec.structured_items, "\n");
}

// ---------------------------------------------------------------------------
// Human revision round-trip
// ---------------------------------------------------------------------------

inline std::string export_revision_jsonl(const std::vector<CaseRecord>& cases) {
    std::string out;
    for (const auto& rec : cases) {
        if (!rec.has_record()) continue;
        nlohmann::json j{{"case_id", rec.case_id},
                         {"stage", corpus::to_string(rec.record_stage)},
                         {"text", rec.record_stage == RecordStage::structured
                                      ? structured_text(rec)
                                      : rec.present_illness}};
        out += j.dump() + "\n";
    }
    return out;
}

inline void import_revision_jsonl(std::vector<CaseRecord>& cases, const std::string& content) {
    for (const auto& line : split(content, '\n')) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        std::string id = j.at("case_id");
        auto stage = corpus::stage_from(j.at("stage"));
        std::string text = j.at("text");
        for (auto& rec : cases) {
            if (rec.case_id != id) continue;
            rec.record_stage = stage;
            if (stage == RecordStage::structured) {
                rec.structured_items.clear();
                for (const auto& l : split(text, '\n'))
                    if (!trim(l).empty()) rec.structured_items.push_back(trim(l));
            } else {
                rec.present_illness = text;
            }
        }
    }
}

} // namespace moodangels::records
