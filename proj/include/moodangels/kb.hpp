#pragma once

#include <map>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/provider.hpp"
#include "moodangels/sha256.hpp"
#include "moodangels/util.hpp"

namespace moodangels::kb {

using json = nlohmann::json;

// The fixed taxonomy of disorder classes the criteria store is closed over.
inline const std::vector<std::string>& disorder_classes() {
    static const std::vector<std::string> classes = {
        "Neurodevelopmental Disorders",
        "Schizophrenia Spectrum and Other Psychotic Disorders",
        "Bipolar and Related Disorders",
        "Depressive Disorders",
        "Anxiety Disorders",
        "Obsessive-Compulsive and Related Disorders",
        "Trauma- and Stressor-Related Disorders",
        "Dissociative Disorders",
        "Somatic Symptom and Related Disorders",
        "Feeding and Eating Disorders",
        "Elimination Disorders",
        "Sleep-Wake Disorders",
        "Sexual Dysfunctions",
        "Gender Dysphoria",
        "Disruptive, Impulse-Control, and Conduct Disorders",
        "Substance-Related and Addictive Disorders",
        "Neurocognitive Disorders",
        "Personality Disorders",
    };
    return classes;
}

inline bool is_disorder_class(const std::string& name) {
    for (const auto& c : disorder_classes())
        if (c == name) return true;
    return false;
}

enum class CriterionKind { diagnostic, differential };

inline std::string to_string(CriterionKind k) {
    return k == CriterionKind::diagnostic ? "diagnostic" : "differential";
}

inline CriterionKind kind_from(const std::string& s) {
    if (s == "diagnostic") return CriterionKind::diagnostic;
    if (s == "differential") return CriterionKind::differential;
    throw Error("invalid criterion kind: " + s);
}

struct CriterionEntry {
    std::string entry_id;
    std::string disorder_class;
    std::string disorder_name;
    CriterionKind kind = CriterionKind::diagnostic;
    std::string text;
    std::string source_note;

    // Content-derived id, stable under whitespace/case noise in the text.
    static std::string derive_id(const std::string& disorder_name, CriterionKind kind,
                                 const std::string& text) {
        std::string material = disorder_name + "\x1f" + to_string(kind) + "\x1f" + normalize_text(text);
        return Sha256::hex(material).substr(0, 16);
    }

    json to_json() const {
        return json{{"entry_id", entry_id},     {"disorder_class", disorder_class},
                    {"disorder_name", disorder_name}, {"kind", to_string(kind)},
                    {"text", text},             {"source_note", source_note}};
    }
};

// Criterion sentences must stand alone: no "see above"-style cross references.
inline void check_self_contained(const std::string& text, const std::string& where) {
    if (trim(text).empty()) throw Error(where + ": criterion text is empty");
    static const std::vector<std::string> refs = {"see above",    "see below",    "as above",
                                                  "as described above", "the above criteria",
                                                  "mentioned above"};
    auto low = lower(text);
    for (const auto& r : refs)
        if (contains(low, r)) throw Error(where + ": criterion text contains a cross-reference: " + r);
}

class KnowledgeBase {
public:
    void add(CriterionEntry entry) {
        if (!is_disorder_class(entry.disorder_class))
            throw Error("kb: unknown disorder_class: " + entry.disorder_class);
        check_self_contained(entry.text, "kb entry " + entry.disorder_name);
        auto derived = CriterionEntry::derive_id(entry.disorder_name, entry.kind, entry.text);
        if (entry.entry_id.empty()) entry.entry_id = derived;
        if (by_id_.count(entry.entry_id))
            throw Error("kb: duplicate entry_id " + entry.entry_id);
        by_id_[entry.entry_id] = entries_.size();
        entries_.push_back(std::move(entry));
    }

    static KnowledgeBase load(const std::filesystem::path& path) {
        KnowledgeBase kb;
        json doc = json::parse(read_file(path));
        for (const auto& e : doc) {
            CriterionEntry entry;
            entry.entry_id = e.value("entry_id", "");
            entry.disorder_class = e.at("disorder_class");
            entry.disorder_name = e.at("disorder_name");
            entry.kind = kind_from(e.at("kind"));
            entry.text = e.at("text");
            entry.source_note = e.value("source_note", "");
            kb.add(std::move(entry));
        }
        return kb;
    }

    void save(const std::filesystem::path& path) const {
        json arr = json::array();
        for (const auto& e : entries_) arr.push_back(e.to_json());
        write_file(path, arr.dump(1));
    }

    // Tab-separated review form, one entry per line.
    std::string export_for_review() const {
        std::string out = "entry_id\tdisorder_class\tdisorder_name\tkind\ttext\tsource_note\n";
        for (const auto& e : entries_) {
            out += e.entry_id + "\t" + e.disorder_class + "\t" + e.disorder_name + "\t" +
                   to_string(e.kind) + "\t" + e.text + "\t" + e.source_note + "\n";
        }
        return out;
    }

    static KnowledgeBase import_from_review(const std::string& tsv) {
        KnowledgeBase kb;
        auto lines = split(tsv, '\n');
        for (size_t i = 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            auto cells = split(lines[i], '\t');
            if (cells.size() < 6) throw Error("review import: malformed line " + std::to_string(i + 1));
            CriterionEntry e;
            e.entry_id = cells[0];
            e.disorder_class = cells[1];
            e.disorder_name = cells[2];
            e.kind = kind_from(cells[3]);
            e.text = cells[4];
            e.source_note = cells[5];
            kb.add(std::move(e));
        }
        return kb;
    }

    const std::vector<CriterionEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

    std::map<std::string, size_t> counts_by_class() const {
        std::map<std::string, size_t> out;
        for (const auto& e : entries_) out[e.disorder_class]++;
        return out;
    }

    // Diagnosis runs require criteria for both mood-disorder classes.
    bool covers_mood_disorders() const {
        auto counts = counts_by_class();
        return counts.count("Bipolar and Related Disorders") && counts.count("Depressive Disorders");
    }

private:
    std::vector<CriterionEntry> entries_;
    std::map<std::string, size_t> by_id_;
};

// ---------------------------------------------------------------------------
// Provider-assisted extraction
// ---------------------------------------------------------------------------

inline constexpr std::string_view kExtractPrompt =
    "To facilitate comparison between diagnostic criteria and medical records, please summarize "
    "the criteria for {disease} from the diagnostic manual in a point-by-point format. Each point "
    "should fully describe a symptom, explicitly include reference information where necessary, "
    "and retain age or other relevant restrictions. Respond only in JSON format as an array of "
    "strings.";

inline constexpr std::string_view kSplitDifferentialPrompt =
    "Please split the following differential criteria into two separate diagnostic criteria. Each "
    "point should fully describe a symptom, explicitly include reference information where "
    "necessary, and retain age or other relevant restrictions. Each criterion must begin with the "
    "disorder it belongs to, followed by a colon. Respond only in JSON format as an array of "
    "exactly two strings.";

// Age qualifiers appearing in the source that every extraction must keep.
inline std::vector<std::string> age_tokens(const std::string& text) {
    static const std::vector<std::regex> patterns = [] {
        std::vector<std::regex> p;
        p.emplace_back(R"(at least \d+ (?:week|month|year|day)s?)", std::regex::icase);
        p.emplace_back(R"(in (?:adults|adolescents|children|adolescents and children|the elderly))",
                       std::regex::icase);
        p.emplace_back(R"((?:before|after) age \d+)", std::regex::icase);
        p.emplace_back(R"(\d+ years? of age)", std::regex::icase);
        return p;
    }();
    std::vector<std::string> out;
    for (const auto& re : patterns) {
        auto begin = std::sregex_iterator(text.begin(), text.end(), re);
        for (auto it = begin; it != std::sregex_iterator(); ++it)
            out.push_back(it->str());
    }
    return out;
}

namespace detail {

inline std::vector<std::string> ask_for_string_array(llm::Provider& provider, const std::string& model,
                                                     const std::string& system, const std::string& user) {
    auto ask = [&](const std::string& extra) {
        llm::ProviderRequest req;
        req.model = model;
        req.messages.push_back({"system", system});
        req.messages.push_back({"user", extra.empty() ? user : user + "\n" + extra});
        return provider.complete(req);
    };
    auto parse = [](const std::string& raw) {
        auto j = json::parse(raw);
        if (j.is_object() && j.size() == 1 && j.begin()->is_array()) j = *j.begin();
        if (!j.is_array()) throw json::other_error::create(501, "expected a JSON array", nullptr);
        std::vector<std::string> out;
        for (const auto& e : j) out.push_back(e.get<std::string>());
        return out;
    };
    auto raw = ask("");
    try {
        return parse(raw);
    } catch (const json::exception& e) {
        raw = ask(std::string("Your previous response was not valid JSON (") + e.what() +
                  "). Respond only with a JSON array of strings.");
        try {
            return parse(raw);
        } catch (const json::exception& e2) {
            throw Error(std::string("kb extraction: provider output unparseable after repair: ") +
                        e2.what());
        }
    }
}

} // namespace detail

inline std::vector<CriterionEntry> extract_diagnostic(const std::string& raw_text,
                                                      const std::string& disorder_name,
                                                      const std::string& disorder_class,
                                                      llm::Provider& provider,
                                                      const std::string& model = "default") {
    if (trim(raw_text).empty()) throw Error("extract_diagnostic: empty source text");
    if (!is_disorder_class(disorder_class))
        throw Error("extract_diagnostic: unknown disorder_class " + disorder_class);

    auto system = replace_all(std::string(kExtractPrompt), "{disease}", disorder_name);
    auto items = detail::ask_for_string_array(
        provider, model, system,
        "Below is the description of the diagnostic criteria for " + disorder_name + ": " + raw_text);
    if (items.empty()) throw Error("extract_diagnostic: provider returned no criteria");

    std::string all;
    std::vector<CriterionEntry> out;
    for (const auto& text : items) {
        check_self_contained(text, "extract_diagnostic(" + disorder_name + ")");
        CriterionEntry e;
        e.disorder_class = disorder_class;
        e.disorder_name = disorder_name;
        e.kind = CriterionKind::diagnostic;
        e.text = trim(text);
        e.source_note = "extracted";
        e.entry_id = CriterionEntry::derive_id(e.disorder_name, e.kind, e.text);
        all += lower(e.text) + "\n";
        out.push_back(std::move(e));
    }
    for (const auto& token : age_tokens(raw_text))
        if (!contains(all, lower(token)))
            throw Error("extract_diagnostic: age restriction lost in extraction: " + token);
    return out;
}

inline std::pair<CriterionEntry, CriterionEntry> split_differential(
    const std::string& raw_text, const std::map<std::string, std::string>& class_by_disorder,
    llm::Provider& provider, const std::string& model = "default") {
    if (trim(raw_text).empty()) throw Error("split_differential: empty source text");

    auto items = detail::ask_for_string_array(
        provider, model, std::string(kSplitDifferentialPrompt),
        "Below are the differential criteria to be split: " + raw_text);
    if (items.size() != 2) {
        // one corrective round for the wrong cardinality
        items = detail::ask_for_string_array(
            provider, model, std::string(kSplitDifferentialPrompt),
            "Below are the differential criteria to be split: " + raw_text +
                "\nYour previous response held " + std::to_string(items.size()) +
                " entries; respond with exactly two.");
        if (items.size() != 2)
            throw Error("split_differential: provider did not return exactly 2 entries");
    }

    auto make = [&](const std::string& text) {
        auto colon = text.find(':');
        if (colon == std::string::npos)
            throw Error("split_differential: entry does not start with a disorder name: " + text);
        std::string name = trim(text.substr(0, colon));
        auto cls = class_by_disorder.find(name);
        if (cls == class_by_disorder.end())
            throw Error("split_differential: no disorder class configured for: " + name);
        check_self_contained(text, "split_differential");
        CriterionEntry e;
        e.disorder_class = cls->second;
        e.disorder_name = name;
        e.kind = CriterionKind::differential;
        e.text = trim(text);
        e.source_note = "extracted";
        e.entry_id = CriterionEntry::derive_id(e.disorder_name, e.kind, e.text);
        return e;
    };
    auto a = make(items[0]);
    auto b = make(items[1]);
    if (a.disorder_name == b.disorder_name)
        throw Error("split_differential: both entries name the same disorder: " + a.disorder_name);
    return {a, b};
}

} // namespace moodangels::kb
