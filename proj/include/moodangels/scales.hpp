#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/stats.hpp"
#include "moodangels/util.hpp"

namespace moodangels::scales {

using json = nlohmann::json;

enum class Rater { self_reported, clinician };
enum class ItemKind { question, total };

inline std::string rater_text(Rater r) {
    return r == Rater::self_reported ? "self-reported" : "clinician-rated";
}

struct ScaleOption {
    int score;
    std::string text;
};

struct ScaleBand {
    int lo, hi;
    std::string text;
};

struct ScaleItem {
    std::string item_id;
    std::string scale_id;
    std::string scale_display;
    ItemKind kind = ItemKind::question;
    Rater rater = Rater::self_reported;
    std::string text;
    std::string summary;                  // short label used in rendered lines
    std::vector<ScaleOption> options;     // enumerated items
    std::optional<std::pair<int, int>> range; // continuous / total items
    std::vector<ScaleBand> bands;         // interpretation bands for totals

    bool valid_score(int v) const {
        if (!options.empty()) {
            for (const auto& o : options)
                if (o.score == v) return true;
            return false;
        }
        if (range) return v >= range->first && v <= range->second;
        return false;
    }

    const ScaleOption* option_for(int v) const {
        for (const auto& o : options)
            if (o.score == v) return &o;
        return nullptr;
    }

    const ScaleBand* band_for(int v) const {
        for (const auto& b : bands)
            if (v >= b.lo && v <= b.hi) return &b;
        return nullptr;
    }
};

struct ScaleInfo {
    std::string scale_id;
    std::string display;
    Rater rater;
    std::vector<std::string> item_ids;
};

class ScaleCatalog {
public:
    static ScaleCatalog load(const std::filesystem::path& path) {
        ScaleCatalog cat;
        json doc = json::parse(read_file(path));
        for (const auto& s : doc.at("scales")) {
            ScaleInfo info;
            info.scale_id = s.at("scale_id");
            info.display = s.at("display");
            info.rater = s.at("rater") == "clinician" ? Rater::clinician : Rater::self_reported;
            for (const auto& it : s.at("items")) {
                ScaleItem item;
                item.item_id = it.at("item_id");
                item.scale_id = info.scale_id;
                item.scale_display = info.display;
                item.rater = info.rater;
                item.kind = it.at("kind") == "total" ? ItemKind::total : ItemKind::question;
                item.text = it.at("text");
                item.summary = it.value("summary", "");
                if (it.contains("options")) {
                    int prev = INT32_MIN;
                    for (const auto& o : it["options"]) {
                        int score = o.at(0);
                        if (score <= prev)
                            throw Error("catalog: option scores not strictly increasing for " + item.item_id);
                        prev = score;
                        item.options.push_back({score, o.at(1)});
                    }
                }
                if (it.contains("range"))
                    item.range = {it["range"].at(0), it["range"].at(1)};
                if (it.contains("bands")) {
                    for (const auto& b : it["bands"])
                        item.bands.push_back({b.at(0), b.at(1), b.at(2)});
                    validate_bands(item);
                }
                info.item_ids.push_back(item.item_id);
                if (!cat.items_.emplace(item.item_id, std::move(item)).second)
                    throw Error("catalog: duplicate item_id " + std::string(it.at("item_id")));
            }
            cat.scales_.push_back(std::move(info));
        }
        return cat;
    }

    bool has(const std::string& id) const { return items_.count(id) != 0; }

    const ScaleItem& item(const std::string& id) const {
        auto it = items_.find(id);
        if (it == items_.end()) throw Error("unknown item_id: " + id);
        return it->second;
    }

    const std::vector<ScaleInfo>& scales() const { return scales_; }
    size_t item_count() const { return items_.size(); }

private:
    static void validate_bands(const ScaleItem& item) {
        if (!item.range) throw Error("catalog: bands without range for " + item.item_id);
        int expect = item.range->first;
        for (const auto& b : item.bands) {
            if (b.lo != expect)
                throw Error("catalog: bands not contiguous for " + item.item_id);
            if (b.hi < b.lo) throw Error("catalog: empty band for " + item.item_id);
            expect = b.hi + 1;
        }
        if (expect != item.range->second + 1)
            throw Error("catalog: bands do not cover range for " + item.item_id);
    }

    std::map<std::string, ScaleItem> items_;
    std::vector<ScaleInfo> scales_;
};

// ---------------------------------------------------------------------------
// Correlation table and item selection
// ---------------------------------------------------------------------------

struct Correlation {
    double r = 0;
    double p = 0;
};

class CorrelationTable {
public:
    static CorrelationTable load_csv(const std::filesystem::path& path) {
        CorrelationTable t;
        auto csv = read_csv(path);
        int ci = csv.column("item_id"), cr = csv.column("r"), cp = csv.column("p");
        if (ci < 0 || cr < 0 || cp < 0)
            throw Error("correlation csv must have item_id,r,p columns: " + path.string());
        for (size_t row = 0; row < csv.rows.size(); ++row) {
            const auto& cells = csv.rows[row];
            Correlation c;
            try {
                c.r = std::stod(cells.at(cr));
                c.p = std::stod(cells.at(cp));
            } catch (const std::exception&) {
                throw Error("correlation csv row " + std::to_string(row + 2) + ": bad numeric value");
            }
            if (std::abs(c.r) > 1.0 || c.p < 0.0 || c.p > 1.0)
                throw Error("correlation csv row " + std::to_string(row + 2) + ": out-of-range r or p");
            t.add(cells.at(ci), c);
        }
        return t;
    }

    void add(const std::string& id, Correlation c) {
        if (index_.count(id)) throw Error("correlation table: duplicate item " + id);
        index_[id] = entries_.size();
        entries_.emplace_back(id, c);
    }

    bool has(const std::string& id) const { return index_.count(id) != 0; }

    Correlation get(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw Error("correlation table: unknown item " + id);
        return entries_[it->second].second;
    }

    const std::vector<std::pair<std::string, Correlation>>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }

private:
    std::vector<std::pair<std::string, Correlation>> entries_;
    std::map<std::string, size_t> index_;
};

// Product-moment coefficient with the preconditions of the analysis pipeline:
// equal lengths >= 2 and no constant series (constant input is an error, never 0).
inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error("pearson: series length mismatch");
    if (x.size() < 2) throw Error("pearson: need at least 2 observations");
    auto r = stats::pearson_raw(x, y);
    if (!r) throw Error("pearson: correlation undefined for constant series");
    return *r;
}

enum class SymptomGroup { depression, suicide, energy_interest, anxiety, insomnia };

inline const std::vector<std::pair<SymptomGroup, std::string>>& group_order() {
    static const std::vector<std::pair<SymptomGroup, std::string>> order = {
        {SymptomGroup::depression, "depression"},
        {SymptomGroup::suicide, "suicide"},
        {SymptomGroup::energy_interest, "energy_interest"},
        {SymptomGroup::anxiety, "anxiety"},
        {SymptomGroup::insomnia, "insomnia"},
    };
    return order;
}

inline std::string group_name(SymptomGroup g) {
    for (const auto& [grp, name] : group_order())
        if (grp == g) return name;
    return "?";
}

inline SymptomGroup group_from_name(const std::string& name) {
    for (const auto& [grp, n] : group_order())
        if (n == name) return grp;
    throw Error("unknown symptom group: " + name);
}

inline std::string group_heading(SymptomGroup g) {
    switch (g) {
        case SymptomGroup::depression: return "Depression-related performances";
        case SymptomGroup::suicide: return "Suicide-related performances";
        case SymptomGroup::energy_interest: return "Energy & interest-related performances";
        case SymptomGroup::anxiety: return "Anxiety-related performances";
        case SymptomGroup::insomnia: return "Insomnia-related performances";
    }
    return "?";
}

struct GroupingConfig {
    std::map<std::string, SymptomGroup> item_groups;
    std::vector<std::string> manual_includes;

    static GroupingConfig load(const std::filesystem::path& path) {
        GroupingConfig g;
        json doc = json::parse(read_file(path));
        for (const auto& [name, items] : doc.at("groups").items()) {
            auto grp = group_from_name(name);
            for (const auto& id : items)
                g.item_groups[id.get<std::string>()] = grp;
        }
        for (const auto& id : doc.at("manual_includes"))
            g.manual_includes.push_back(id.get<std::string>());
        return g;
    }
};

struct SelectedItemSet {
    double threshold = 0;
    std::vector<std::string> items; // rank order, manual includes appended
    std::map<std::string, SymptomGroup> groups;
    std::vector<std::string> manual_includes;

    std::vector<std::string> group_members(SymptomGroup g) const {
        std::vector<std::string> out;
        for (const auto& id : items)
            if (groups.at(id) == g) out.push_back(id);
        return out;
    }

    json to_json() const {
        json groups_j = json::object();
        for (const auto& [grp, name] : group_order())
            groups_j[name] = group_members(grp);
        return json{{"threshold", threshold},
                    {"items", items},
                    {"groups", groups_j},
                    {"manual_includes", manual_includes}};
    }
};

// Ranks the full coefficient list (questions and totals together) and cuts at
// the nominal top fraction, snapping the cut to the larger of the two adjacent
// coefficient gaps. The reported threshold is the midpoint of the chosen gap
// rounded to 4 decimals, so every selected item sits at or above it and the
// first excluded item sits below it. Ties at the cut are always included.
inline SelectedItemSet select_items(const CorrelationTable& table, double fraction,
                                    const std::vector<std::string>& manual,
                                    const GroupingConfig& grouping, bool use_abs = false) {
    if (table.size() == 0) throw Error("select_items: empty correlation table");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("select_items: fraction must be in (0,1]");
    const size_t n = table.size();

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    auto key = [&](size_t i) {
        double r = table.entries()[i].second.r;
        return use_abs ? std::abs(r) : r;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return key(a) > key(b); });

    size_t k = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
    k = std::clamp<size_t>(k, 1, n);

    size_t cut = k;
    if (k < n) {
        auto gap_after = [&](size_t c) { return key(order[c - 1]) - key(order[c]); };
        if (k + 1 < n && gap_after(k + 1) > gap_after(k)) cut = k + 1;
    }
    // inclusive threshold: pull in anything tied with the last selected item
    while (cut < n && key(order[cut]) == key(order[cut - 1])) ++cut;

    double threshold;
    if (cut == n) {
        threshold = key(order[n - 1]);
    } else {
        double mid = 0.5 * (key(order[cut - 1]) + key(order[cut]));
        // correctly-rounded 4-decimal form of the gap midpoint
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", mid);
        threshold = std::min(std::stod(buf), key(order[cut - 1]));
    }

    SelectedItemSet out;
    out.threshold = threshold;
    for (size_t i = 0; i < cut; ++i)
        out.items.push_back(table.entries()[order[i]].first);
    for (const auto& id : manual) {
        if (!table.has(id))
            throw Error("select_items: manual include not in correlation table: " + id);
        if (std::find(out.items.begin(), out.items.end(), id) == out.items.end()) {
            out.items.push_back(id);
            out.manual_includes.push_back(id);
        }
    }
    for (const auto& id : out.items) {
        auto it = grouping.item_groups.find(id);
        if (it == grouping.item_groups.end())
            throw Error("select_items: no symptom group configured for " + id);
        out.groups[id] = it->second;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic score -> text rendering
// ---------------------------------------------------------------------------

inline std::string render_item_line(const ScaleItem& item, std::optional<int> score) {
    std::string label = item.summary.empty() ? item.text : item.summary;
    std::string head = "- " + rater_text(item.rater) + " " + item.scale_display + " " + label + ": ";
    if (!score) return head + "not assessed";
    int v = *score;
    if (!item.valid_score(v))
        throw Error("score " + std::to_string(v) + " outside the valid range of " + item.item_id);
    if (item.kind == ItemKind::total) {
        const auto* band = item.band_for(v);
        std::string txt = band ? std::to_string(band->lo) + "-" + std::to_string(band->hi) + " = " + band->text
                               : "unclassified";
        return head + std::to_string(v) + " (" + txt + ")";
    }
    if (const auto* opt = item.option_for(v))
        return head + opt->text + " (score " + std::to_string(v) + ")";
    return head + std::to_string(v);
}

// One paragraph per symptom group; pure function of (scores, catalog, selection).
inline std::string render_performance(const std::map<std::string, int>& scores,
                                      const SelectedItemSet& selected, const ScaleCatalog& catalog) {
    bool any = false;
    for (const auto& id : selected.items)
        if (scores.count(id)) any = true;
    if (!any) throw Error("render_performance: case has no scores for any selected item");

    std::string out;
    for (const auto& [grp, name] : group_order()) {
        auto members = selected.group_members(grp);
        if (members.empty()) continue;
        if (!out.empty()) out += "\n";
        out += group_heading(grp) + ":\n";
        for (const auto& id : members) {
            const auto& item = catalog.item(id);
            std::optional<int> score;
            if (auto it = scores.find(id); it != scores.end()) score = it->second;
            out += render_item_line(item, score) + "\n";
        }
    }
    return out;
}

// All-scale totals with interpretation bands; scales without a total item or
// without a recorded total are omitted (some scales have no computable total).
inline std::string render_totals(const std::map<std::string, int>& scores, const ScaleCatalog& catalog) {
    std::string out = "Scale total scores:\n";
    bool any = false;
    for (const auto& info : catalog.scales()) {
        for (const auto& id : info.item_ids) {
            const auto& item = catalog.item(id);
            if (item.kind != ItemKind::total) continue;
            auto it = scores.find(id);
            if (it == scores.end()) continue;
            int v = it->second;
            if (!item.valid_score(v))
                throw Error("score " + std::to_string(v) + " outside the valid range of " + id);
            const auto* band = item.band_for(v);
            out += "- " + rater_text(item.rater) + " " + info.display + " total score: " +
                   std::to_string(v);
            if (band)
                out += " (" + std::to_string(band->lo) + "-" + std::to_string(band->hi) + " = " +
                       band->text + ")";
            out += "\n";
            any = true;
        }
    }
    if (!any) out += "- none available\n";
    return out;
}

} // namespace moodangels::scales
