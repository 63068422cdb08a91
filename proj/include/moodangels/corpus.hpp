#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/scales.hpp"
#include "moodangels/sha256.hpp"
#include "moodangels/util.hpp"

namespace moodangels::corpus {

using json = nlohmann::json;

enum class Gender { male, female, unspecified };
enum class RecordStage { raw, relativized, combined, structured, absent };
enum class GoldLabel { mood_disorder, other_disease, normal };

inline std::string to_string(Gender g) {
    switch (g) {
        case Gender::male: return "male";
        case Gender::female: return "female";
        default: return "unspecified";
    }
}

inline Gender gender_from(const std::string& s) {
    if (s == "male") return Gender::male;
    if (s == "female") return Gender::female;
    if (s == "unspecified" || s.empty()) return Gender::unspecified;
    throw Error("invalid gender: " + s);
}

inline std::string to_string(RecordStage s) {
    switch (s) {
        case RecordStage::raw: return "raw";
        case RecordStage::relativized: return "relativized";
        case RecordStage::combined: return "combined";
        case RecordStage::structured: return "structured";
        default: return "absent";
    }
}

inline RecordStage stage_from(const std::string& s) {
    if (s == "raw") return RecordStage::raw;
    if (s == "relativized") return RecordStage::relativized;
    if (s == "combined") return RecordStage::combined;
    if (s == "structured") return RecordStage::structured;
    if (s == "absent") return RecordStage::absent;
    throw Error("invalid record_stage: " + s);
}

inline std::string to_string(GoldLabel l) {
    switch (l) {
        case GoldLabel::mood_disorder: return "mood_disorder";
        case GoldLabel::other_disease: return "other_disease";
        default: return "normal";
    }
}

inline GoldLabel gold_from(const std::string& s) {
    if (s == "mood_disorder") return GoldLabel::mood_disorder;
    if (s == "other_disease") return GoldLabel::other_disease;
    if (s == "normal") return GoldLabel::normal;
    throw Error("invalid gold_label: " + s);
}

struct CaseRecord {
    std::string case_id;
    Gender gender = Gender::unspecified;
    int age = 0;
    std::string occupation;
    std::string visit_date;
    std::string chief_complaint;
    std::string present_illness;
    RecordStage record_stage = RecordStage::absent;
    std::vector<std::string> structured_items;
    std::map<std::string, int> scale_scores;
    std::optional<GoldLabel> gold_label;

    bool has_record() const { return record_stage != RecordStage::absent; }

    json to_json() const {
        json j{{"case_id", case_id},
               {"gender", to_string(gender)},
               {"age", age},
               {"occupation", occupation},
               {"visit_date", visit_date},
               {"chief_complaint", chief_complaint},
               {"present_illness", present_illness},
               {"record_stage", to_string(record_stage)},
               {"scale_scores", scale_scores}};
        if (!structured_items.empty()) j["structured_items"] = structured_items;
        if (gold_label) j["gold_label"] = to_string(*gold_label);
        return j;
    }
};

struct LabeledPrediction {
    std::string case_id;
    bool predicted = false;
    std::string reasons;
    bool gold = false;
};

struct LabelCounts {
    size_t normal = 0, mood = 0, other = 0;
    size_t total() const { return normal + mood + other; }
};

inline LabelCounts count_labels(const std::vector<CaseRecord>& cases) {
    LabelCounts c;
    for (const auto& rec : cases) {
        if (!rec.gold_label) continue;
        switch (*rec.gold_label) {
            case GoldLabel::normal: c.normal++; break;
            case GoldLabel::mood_disorder: c.mood++; break;
            case GoldLabel::other_disease: c.other++; break;
        }
    }
    return c;
}

namespace detail {

inline void validate_case(const CaseRecord& rec, const scales::ScaleCatalog* catalog, size_t row) {
    auto where = "case row " + std::to_string(row) + " (" + rec.case_id + ")";
    if (rec.age < 0) throw Error(where + ": age must be >= 0");
    bool narrative_empty = trim(rec.chief_complaint).empty() && trim(rec.present_illness).empty() &&
                           rec.structured_items.empty();
    if ((rec.record_stage == RecordStage::absent) != narrative_empty)
        throw Error(where + ": record_stage=absent must match empty narrative fields");
    if (!rec.structured_items.empty() && rec.record_stage != RecordStage::structured)
        throw Error(where + ": structured_items present but stage is not structured");
    if (catalog) {
        for (const auto& [id, score] : rec.scale_scores) {
            if (!catalog->has(id)) throw Error(where + ": unknown item_id " + id);
            if (!catalog->item(id).valid_score(score))
                throw Error(where + ": score " + std::to_string(score) +
                            " outside the valid range of " + id);
        }
    }
}

inline CaseRecord case_from_json(const json& j, size_t row) {
    CaseRecord rec;
    try {
        rec.case_id = j.at("case_id");
        rec.gender = gender_from(j.value("gender", "unspecified"));
        rec.age = j.value("age", 0);
        rec.occupation = j.value("occupation", "");
        rec.visit_date = j.value("visit_date", "");
        rec.chief_complaint = j.value("chief_complaint", "");
        rec.present_illness = j.value("present_illness", "");
        rec.record_stage = stage_from(j.value("record_stage", "absent"));
        if (j.contains("structured_items"))
            for (const auto& it : j["structured_items"])
                rec.structured_items.push_back(it.get<std::string>());
        if (j.contains("scale_scores"))
            for (const auto& [id, v] : j["scale_scores"].items()) {
                if (!v.is_number_integer())
                    throw Error("field scale_scores." + id + ": score must be an integer");
                rec.scale_scores[id] = v.get<int>();
            }
        if (j.contains("gold_label") && !j["gold_label"].is_null())
            rec.gold_label = gold_from(j["gold_label"].get<std::string>());
    } catch (const json::exception& e) {
        throw Error("malformed case at row " + std::to_string(row) + ": " + e.what());
    }
    return rec;
}

} // namespace detail

// JSON-lines loader: one case object per line, file order preserved.
inline std::vector<CaseRecord> load_cases_jsonl(const std::filesystem::path& path,
                                                const scales::ScaleCatalog* catalog = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open case file: " + path.string());
    std::vector<CaseRecord> out;
    std::string line;
    size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error("malformed case at row " + std::to_string(row) + ": " + e.what());
        }
        auto rec = detail::case_from_json(j, row);
        detail::validate_case(rec, catalog, row);
        out.push_back(std::move(rec));
    }
    return out;
}

// Column mapping for scale-score-only CSV tables. Maps a CSV header to a
// catalog item id, to the gold label, or to nothing (skipped with a note).
struct CsvColumnMap {
    std::map<std::string, std::string> item_for_column;
    std::string label_column;
    std::vector<std::string> skip_columns;
};

// The bundled tabular layout: 24 numeric features plus a binary label.
// PSQI and SSRS totals have no counterpart among the 13 catalog scales and
// are skipped on ingestion.
inline CsvColumnMap moodsyn_column_map() {
    CsvColumnMap m;
    m.item_for_column = {
        {"HAMA Q4 Score", "hama_Q4"},        {"HAMA Q6 Score", "hama_Q6"},
        {"HAMA Total Score", "hama_total_score"}, {"GAD7 Total Score", "gad7_total_score"},
        {"PHQ9 Q1 Score", "phq9_Q1"},        {"PHQ9 Q2 Score", "phq9_Q2"},
        {"PHQ9 Q4 Score", "phq9_Q4"},        {"PHQ9 Q9 Score", "phq9_Q9"},
        {"PHQ9 Total Score", "phq9_total_score"}, {"HAMD Q1 Score", "hamd_Q1"},
        {"HAMD Q3 Score", "hamd_Q3"},        {"HAMD Q4 Score", "hamd_Q4"},
        {"HAMD Q7 Score", "hamd_Q7"},        {"HAMD Q22 Score", "hamd_Q22"},
        {"HAMD Total Score", "hamd_total_score"}, {"BPRS Q9 Score", "bprs_Q9"},
        {"SHAPS Total Score", "shaps_total_score"}, {"HCL32 Total Score", "hcl32_total_score"},
        {"DAS Total Score", "das_total_score"}, {"MDQ Total Score", "mdq_total_score"},
        {"BPRS Total Score", "bprs_total_score"}, {"YMRS Total Score", "ymrs_total_score"},
    };
    m.label_column = "Mood Disorder";
    m.skip_columns = {"PSQI Total Score", "SSRS Total Score"};
    return m;
}

inline std::vector<CaseRecord> load_cases_csv(const std::filesystem::path& path,
                                              const CsvColumnMap& colmap,
                                              const scales::ScaleCatalog* catalog = nullptr,
                                              int id_start = 5001) {
    auto csv = read_csv(path);
    for (const auto& h : csv.header) {
        if (colmap.item_for_column.count(h) || h == colmap.label_column) continue;
        if (std::find(colmap.skip_columns.begin(), colmap.skip_columns.end(), h) !=
            colmap.skip_columns.end())
            continue;
        throw Error("csv column not covered by the column map: " + h);
    }
    std::vector<CaseRecord> out;
    for (size_t r = 0; r < csv.rows.size(); ++r) {
        CaseRecord rec;
        rec.case_id = std::to_string(id_start + static_cast<int>(r));
        rec.record_stage = RecordStage::absent;
        for (size_t cidx = 0; cidx < csv.header.size(); ++cidx) {
            const auto& h = csv.header[cidx];
            const auto& cell = csv.rows[r].at(cidx);
            int v;
            try {
                v = std::stoi(cell);
            } catch (const std::exception&) {
                throw Error("malformed csv row " + std::to_string(r + 2) + ", field " + h +
                            ": not an integer");
            }
            if (h == colmap.label_column) {
                rec.gold_label = v ? GoldLabel::mood_disorder : GoldLabel::normal;
            } else if (auto it = colmap.item_for_column.find(h); it != colmap.item_for_column.end()) {
                rec.scale_scores[it->second] = v;
            }
        }
        detail::validate_case(rec, catalog, r + 2);
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::vector<CaseRecord> load_cases(const std::filesystem::path& path, const std::string& format,
                                          const scales::ScaleCatalog* catalog = nullptr) {
    if (format == "jsonl") return load_cases_jsonl(path, catalog);
    if (format == "csv") return load_cases_csv(path, moodsyn_column_map(), catalog);
    throw Error("unknown case file format: " + format);
}

inline void save_cases_jsonl(const std::filesystem::path& path, const std::vector<CaseRecord>& cases) {
    std::string out;
    for (const auto& rec : cases) out += rec.to_json().dump() + "\n";
    write_file(path, out);
}

// ---------------------------------------------------------------------------
// Deterministic provider cache
// ---------------------------------------------------------------------------

// Content-addressed response store under <root>/<sha256>.json. First call
// stores, identical later calls replay the stored bytes; storing a different
// value under an existing key trips the determinism guard.
class ProviderCache {
public:
    explicit ProviderCache(std::filesystem::path root) : root_(std::move(root)) {
        std::filesystem::create_directories(root_);
    }

    static std::filesystem::path default_root() {
        if (const char* env = std::getenv("MOODANGELS_CACHE")) return env;
        return "cache";
    }

    static std::string key(std::string_view provider_id, std::string_view model_id,
                           std::string_view payload) {
        Sha256 h;
        h.update(provider_id);
        h.update("\x1f", 1);
        h.update(model_id);
        h.update("\x1f", 1);
        h.update(payload);
        auto d = h.digest();
        static const char* k = "0123456789abcdef";
        std::string out;
        for (uint8_t b : d) {
            out += k[b >> 4];
            out += k[b & 0xf];
        }
        return out;
    }

    std::optional<std::string> lookup(const std::string& key_hash) const {
        std::lock_guard lock(mu_);
        auto path = root_ / (key_hash + ".json");
        if (!std::filesystem::exists(path)) {
            ++misses_;
            return std::nullopt;
        }
        json j = json::parse(read_file(path));
        ++hits_;
        return j.at("response").get<std::string>();
    }

    void store(const std::string& key_hash, std::string_view provider_id, std::string_view model_id,
               std::string_view response) {
        std::lock_guard lock(mu_);
        auto path = root_ / (key_hash + ".json");
        if (std::filesystem::exists(path)) {
            json j = json::parse(read_file(path));
            if (j.at("response").get<std::string>() != response)
                throw Error("cache determinism guard: key " + key_hash +
                            " already holds a different response");
            return;
        }
        json j{{"provider", std::string(provider_id)},
               {"model", std::string(model_id)},
               {"response", std::string(response)},
               {"created_at", now_iso()}};
        write_file_atomic(path, j.dump());
    }

    // First call invokes and stores; later identical calls replay the stored
    // bytes. Provider failures retry up to `retries` extra attempts.
    std::string lookup_or_call(std::string_view provider_id, std::string_view model_id,
                               std::string_view payload,
                               const std::function<std::string()>& call, int retries = 2) {
        auto k = key(provider_id, model_id, payload);
        if (auto hit = lookup(k)) return *hit;
        std::string last_error;
        for (int attempt = 0; attempt <= retries; ++attempt) {
            try {
                auto response = call();
                store(k, provider_id, model_id, response);
                return response;
            } catch (const Error& e) {
                last_error = e.what();
            }
        }
        throw Error("provider call failed after " + std::to_string(retries + 1) +
                    " attempts with no cached value: " + last_error);
    }

    size_t hits() const { return hits_; }
    size_t misses() const { return misses_; }
    const std::filesystem::path& root() const { return root_; }

private:
    static std::string now_iso() {
        auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
        return buf;
    }

    std::filesystem::path root_;
    mutable std::mutex mu_;
    mutable size_t hits_ = 0, misses_ = 0;
};

} // namespace moodangels::corpus
