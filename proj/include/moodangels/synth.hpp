#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/stats.hpp"
#include "moodangels/util.hpp"

namespace moodangels::synth {

using json = nlohmann::json;

struct ColumnSpec {
    std::string name;
    double min = 0, max = 0;
    bool integer = true;
    bool label = false;
};

struct SumConstraint {
    std::string name;
    std::vector<std::string> questions;
    std::string total;
};

struct FeatureSchema {
    std::vector<ColumnSpec> columns;
    std::vector<SumConstraint> constraints;

    static FeatureSchema load(const std::filesystem::path& path) {
        FeatureSchema s;
        json doc = json::parse(read_file(path));
        for (const auto& c : doc.at("columns"))
            s.columns.push_back({c.at("name"), c.at("min"), c.at("max"),
                                 c.value("integer", true), c.value("label", false)});
        for (const auto& c : doc.at("constraints")) {
            SumConstraint sc;
            sc.name = c.at("name");
            for (const auto& q : c.at("questions")) sc.questions.push_back(q.get<std::string>());
            sc.total = c.at("total");
            s.constraints.push_back(std::move(sc));
        }
        s.validate_shape();
        return s;
    }

    void validate_shape() const {
        if (columns.empty()) throw Error("schema: no columns");
        if (!columns.back().label) throw Error("schema: the label must be the last column");
        size_t labels = 0;
        for (const auto& c : columns) labels += c.label ? 1 : 0;
        if (labels != 1) throw Error("schema: exactly one label column required");
        for (const auto& c : constraints) {
            if (index_of(c.total) < 0) throw Error("schema: constraint total missing: " + c.total);
            for (const auto& q : c.questions)
                if (index_of(q) < 0) throw Error("schema: constraint question missing: " + q);
        }
    }

    int index_of(const std::string& name) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i].name == name) return static_cast<int>(i);
        return -1;
    }

    size_t label_index() const { return columns.size() - 1; }
    size_t feature_count() const { return columns.size() - 1; }
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    size_t n() const { return rows.size(); }

    std::vector<double> column(size_t j) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[j]);
        return out;
    }
};

inline Table read_table_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
    auto csv = read_csv(path);
    if (csv.header.size() != schema.columns.size())
        throw Error("table: expected " + std::to_string(schema.columns.size()) + " columns, got " +
                    std::to_string(csv.header.size()));
    for (size_t i = 0; i < csv.header.size(); ++i)
        if (csv.header[i] != schema.columns[i].name)
            throw Error("table: column " + std::to_string(i) + " is '" + csv.header[i] +
                        "', schema expects '" + schema.columns[i].name + "'");
    Table t;
    t.columns = csv.header;
    for (size_t r = 0; r < csv.rows.size(); ++r) {
        std::vector<double> row;
        for (size_t j = 0; j < csv.rows[r].size(); ++j) {
            try {
                row.push_back(std::stod(csv.rows[r][j]));
            } catch (const std::exception&) {
                throw Error("table row " + std::to_string(r + 2) + ", column " + t.columns[j] +
                            ": not numeric");
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline std::string format_value(double v, bool integer) {
    if (integer || v == std::floor(v)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(std::llround(v)));
        return buf;
    }
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_table_csv(const std::filesystem::path& path, const Table& t,
                            const FeatureSchema& schema) {
    std::string out = join(t.columns, ",") + "\n";
    for (const auto& row : t.rows) {
        std::vector<std::string> cells;
        for (size_t j = 0; j < row.size(); ++j)
            cells.push_back(format_value(row[j], schema.columns[j].integer));
        out += join(cells, ",") + "\n";
    }
    write_file(path, out);
}

// JSON export matching the published example object shape (array of objects,
// one key per column).
inline json table_to_json(const Table& t) {
    json arr = json::array();
    for (const auto& row : t.rows) {
        json obj = json::object();
        for (size_t j = 0; j < row.size(); ++j) {
            if (row[j] == std::floor(row[j])) obj[t.columns[j]] = static_cast<long long>(row[j]);
            else obj[t.columns[j]] = row[j];
        }
        arr.push_back(std::move(obj));
    }
    return arr;
}

// ---------------------------------------------------------------------------
// Per-class Gaussian copula model
// ---------------------------------------------------------------------------

// Empirical marginal CDFs plus the correlation of rank-based normal scores,
// fit separately per label class. Sampling maps correlated normals back
// through the inverse empirical CDFs.
struct SynthModel {
    struct ClassModel {
        size_t n = 0;
        std::vector<std::vector<double>> marginals; // sorted values per feature column
        std::vector<double> chol;                   // lower-triangular factor, d x d
        double ridge_epsilon = 0;
    };

    FeatureSchema schema;
    std::map<int, ClassModel> classes; // label value -> class model
    double positive_ratio = 0;
    size_t fit_rows = 0;

    json metadata() const {
        json by_class = json::object();
        for (const auto& [label, cm] : classes)
            by_class[std::to_string(label)] = {{"n", cm.n}, {"ridge_epsilon", cm.ridge_epsilon}};
        return json{{"rows", fit_rows}, {"positive_ratio", positive_ratio}, {"classes", by_class}};
    }
};

namespace detail {

// Rank-based normal scores with average ranks for ties (integer data is tie-heavy).
inline std::vector<double> normal_scores(const std::vector<double>& values) {
    size_t n = values.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> z(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && values[idx[j]] == values[idx[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + j + 1); // 1-based average rank
        double u = avg_rank / static_cast<double>(n + 1);
        double score = stats::normal_icdf(u);
        for (size_t k = i; k < j; ++k) z[idx[k]] = score;
        i = j;
    }
    return z;
}

} // namespace detail

inline SynthModel fit(const Table& t, const FeatureSchema& schema, size_t min_rows_per_class = 30) {
    SynthModel model;
    model.schema = schema;
    model.fit_rows = t.n();
    size_t label_col = schema.label_index();
    size_t d = schema.feature_count();

    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < t.n(); ++i)
        by_class[static_cast<int>(t.rows[i][label_col])].push_back(i);
    if (by_class.size() < 2)
        throw Error("fit: need both label classes, found " + std::to_string(by_class.size()));
    for (const auto& [label, rows] : by_class)
        if (rows.size() < min_rows_per_class)
            throw Error("fit: class " + std::to_string(label) + " has only " +
                        std::to_string(rows.size()) + " rows (need >= " +
                        std::to_string(min_rows_per_class) + ")");

    size_t positive = by_class.count(1) ? by_class[1].size() : 0;
    model.positive_ratio = static_cast<double>(positive) / static_cast<double>(t.n());

    for (const auto& [label, row_idx] : by_class) {
        SynthModel::ClassModel cm;
        cm.n = row_idx.size();
        cm.marginals.resize(d);
        std::vector<std::vector<double>> z_cols(d);
        for (size_t j = 0; j < d; ++j) {
            std::vector<double> vals;
            vals.reserve(row_idx.size());
            for (size_t i : row_idx) vals.push_back(t.rows[i][j]);
            z_cols[j] = detail::normal_scores(vals);
            std::sort(vals.begin(), vals.end());
            cm.marginals[j] = std::move(vals);
        }
        std::vector<double> corr(d * d, 0.0);
        for (size_t a = 0; a < d; ++a) {
            corr[a * d + a] = 1.0;
            for (size_t b = a + 1; b < d; ++b) {
                auto r = stats::pearson_raw(z_cols[a], z_cols[b]);
                double v = r.value_or(0.0); // constant column: no dependence information
                corr[a * d + b] = corr[b * d + a] = v;
            }
        }
        cm.ridge_epsilon = stats::cholesky(corr, d);
        cm.chol = std::move(corr);
        model.classes[label] = std::move(cm);
    }
    return model;
}

// n rows with the label drawn per class_ratio; per-row derived RNG streams
// keep the output identical regardless of how rows are blocked.
inline Table sample(const SynthModel& model, size_t n, double positive_ratio, uint64_t seed) {
    if (n < 1) throw Error("sample: n must be >= 1");
    const auto& schema = model.schema;
    size_t d = schema.feature_count();
    Table t;
    for (const auto& c : schema.columns) t.columns.push_back(c.name);

    Rng base(seed);
    for (size_t i = 0; i < n; ++i) {
        Rng rng = base.fork(i);
        auto uniform_open = [&] {
            return (static_cast<double>(rng.next() >> 12) + 0.5) * 0x1.0p-52;
        };
        int label = uniform_open() < positive_ratio ? 1 : 0;
        auto it = model.classes.find(label);
        if (it == model.classes.end()) it = model.classes.begin();
        const auto& cm = it->second;

        std::vector<double> normals(d);
        for (size_t j = 0; j < d; ++j) normals[j] = stats::normal_icdf(uniform_open());
        std::vector<double> row(schema.columns.size(), 0.0);
        for (size_t j = 0; j < d; ++j) {
            double y = 0;
            for (size_t k = 0; k <= j; ++k) y += cm.chol[j * d + k] * normals[k];
            double u = stats::normal_cdf(y);
            const auto& marg = cm.marginals[j];
            size_t pick = std::min(marg.size() - 1,
                                   static_cast<size_t>(u * static_cast<double>(marg.size())));
            row[j] = marg[pick];
        }
        row[schema.label_index()] = label;
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline Table sample(const SynthModel& model, size_t n, uint64_t seed) {
    return sample(model, n, model.positive_ratio, seed);
}

// ---------------------------------------------------------------------------
// Post-processing and validation
// ---------------------------------------------------------------------------

struct PostprocessReport {
    size_t rows_in = 0;
    size_t rows_out = 0;
    size_t rows_dropped = 0;
    size_t totals_raised = 0;

    json to_json() const {
        return json{{"rows_in", rows_in},
                    {"rows_out", rows_out},
                    {"rows_dropped", rows_dropped},
                    {"totals_raised", totals_raised}};
    }
};

// Value rounding, range clamping, and the logical-consistency repair: a total
// below its question sum is raised to the sum when the sum fits the total's
// range; rows that cannot be repaired are dropped (and counted).
inline Table postprocess(const Table& t, const FeatureSchema& schema, PostprocessReport* report = nullptr) {
    PostprocessReport rep;
    rep.rows_in = t.n();
    Table out;
    out.columns = t.columns;
    for (const auto& row_in : t.rows) {
        std::vector<double> row = row_in;
        for (size_t j = 0; j < schema.columns.size(); ++j) {
            const auto& c = schema.columns[j];
            if (c.integer) row[j] = static_cast<double>(std::llround(row[j]));
            row[j] = std::clamp(row[j], c.min, c.max);
        }
        bool drop = false;
        for (const auto& con : schema.constraints) {
            double qsum = 0;
            for (const auto& q : con.questions) qsum += row[static_cast<size_t>(schema.index_of(q))];
            auto total_idx = static_cast<size_t>(schema.index_of(con.total));
            if (qsum > row[total_idx]) {
                if (qsum <= schema.columns[total_idx].max) {
                    row[total_idx] = qsum;
                    rep.totals_raised++;
                } else {
                    drop = true;
                    break;
                }
            }
        }
        if (drop) {
            rep.rows_dropped++;
            continue;
        }
        out.rows.push_back(std::move(row));
    }
    rep.rows_out = out.n();
    if (report) *report = rep;
    return out;
}

struct Violation {
    size_t row = 0;
    std::string what; // column or constraint name
    std::string message;
};

inline std::vector<Violation> validate(const Table& t, const FeatureSchema& schema) {
    std::vector<Violation> out;
    if (t.columns.size() != schema.columns.size()) {
        out.push_back({0, "columns", "column count mismatch"});
        return out;
    }
    for (size_t i = 0; i < t.n(); ++i) {
        const auto& row = t.rows[i];
        for (size_t j = 0; j < schema.columns.size(); ++j) {
            const auto& c = schema.columns[j];
            if (row[j] < c.min || row[j] > c.max)
                out.push_back({i, c.name, "value " + format_value(row[j], false) + " outside [" +
                                              format_value(c.min, c.integer) + "," +
                                              format_value(c.max, c.integer) + "]"});
            if (c.integer && row[j] != std::floor(row[j]))
                out.push_back({i, c.name, "value is not an integer"});
        }
        for (const auto& con : schema.constraints) {
            double qsum = 0;
            for (const auto& q : con.questions) qsum += row[static_cast<size_t>(schema.index_of(q))];
            if (qsum > row[static_cast<size_t>(schema.index_of(con.total))])
                out.push_back({i, con.name, "question sum exceeds the scale total"});
        }
    }
    return out;
}

} // namespace moodangels::synth
