#pragma once

#include <cmath>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moodangels/stats.hpp"
#include "moodangels/synth.hpp"
#include "moodangels/util.hpp"

namespace moodangels::syneval {

using json = nlohmann::json;
using synth::FeatureSchema;
using synth::Table;

// ---------------------------------------------------------------------------
// Column-shape scores
// ---------------------------------------------------------------------------

// 1 - sup |ECDF_real - ECDF_syn|, the Kolmogorov-Smirnov complement.
inline double ks_complement(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw Error("ks_complement: empty input");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (i < a.size() && (j == b.size() || a[i] <= b[j])) x = a[i];
        else x = b[j];
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return 1.0 - d;
}

// 1 - total variation distance over the union of observed categories.
inline double tv_complement(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw Error("tv_complement: empty input");
    std::map<double, std::pair<double, double>> freq;
    for (double v : a) freq[v].first += 1.0 / static_cast<double>(a.size());
    for (double v : b) freq[v].second += 1.0 / static_cast<double>(b.size());
    double tv = 0;
    for (const auto& [cat, pq] : freq) tv += std::abs(pq.first - pq.second);
    return 1.0 - 0.5 * tv;
}

struct ColumnScores {
    std::vector<std::pair<std::string, double>> per_column;
    double mean = 0;
};

inline ColumnScores shape_score(const Table& real, const Table& syn, const FeatureSchema& schema) {
    ColumnScores out;
    double sum = 0;
    for (size_t j = 0; j < schema.columns.size(); ++j) {
        double s = schema.columns[j].label ? tv_complement(real.column(j), syn.column(j))
                                           : ks_complement(real.column(j), syn.column(j));
        out.per_column.emplace_back(schema.columns[j].name, s);
        sum += s;
    }
    out.mean = sum / static_cast<double>(out.per_column.size());
    return out;
}

// ---------------------------------------------------------------------------
// Column-pair trends
// ---------------------------------------------------------------------------

namespace detail {

// decile bin edges from the reference column, shared by both datasets
inline std::vector<double> decile_edges(const std::vector<double>& ref) {
    std::vector<double> edges;
    for (int d = 1; d < 10; ++d) edges.push_back(stats::quantile(ref, d / 10.0));
    return edges;
}

inline size_t bin_of(double v, const std::vector<double>& edges) {
    size_t b = 0;
    while (b < edges.size() && v > edges[b]) ++b;
    return b;
}

inline double contingency_similarity(const std::vector<double>& xa, const std::vector<double>& la,
                                     const std::vector<double>& xb, const std::vector<double>& lb,
                                     const std::vector<double>& edges) {
    std::map<std::pair<size_t, double>, std::pair<double, double>> cells;
    for (size_t i = 0; i < xa.size(); ++i)
        cells[{bin_of(xa[i], edges), la[i]}].first += 1.0 / static_cast<double>(xa.size());
    for (size_t i = 0; i < xb.size(); ++i)
        cells[{bin_of(xb[i], edges), lb[i]}].second += 1.0 / static_cast<double>(xb.size());
    double diff = 0;
    for (const auto& [cell, pq] : cells) diff += std::abs(pq.first - pq.second);
    return 1.0 - 0.5 * diff;
}

} // namespace detail

struct PairScores {
    std::vector<std::pair<std::string, double>> per_pair;
    double mean = 0;
};

// Numeric pairs score correlation similarity 1 - |rho_real - rho_syn| / 2;
// pairs with the categorical label score joint-frequency similarity with the
// numeric partner discretized into deciles of the real column. A correlation
// that is undefined on one side (constant column) counts as 0 on that side.
inline PairScores trend_score(const Table& real, const Table& syn, const FeatureSchema& schema) {
    PairScores out;
    size_t d = schema.feature_count();
    size_t label = schema.label_index();
    double sum = 0;

    std::vector<std::vector<double>> rc(d), sc(d);
    for (size_t j = 0; j < d; ++j) {
        rc[j] = real.column(j);
        sc[j] = syn.column(j);
    }
    auto rlab = real.column(label);
    auto slab = syn.column(label);

    for (size_t a = 0; a < d; ++a) {
        for (size_t b = a + 1; b < d; ++b) {
            double rr = stats::pearson_raw(rc[a], rc[b]).value_or(0.0);
            double rs = stats::pearson_raw(sc[a], sc[b]).value_or(0.0);
            double s = 1.0 - std::abs(rr - rs) / 2.0;
            out.per_pair.emplace_back(schema.columns[a].name + " | " + schema.columns[b].name, s);
            sum += s;
        }
    }
    for (size_t a = 0; a < d; ++a) {
        auto edges = detail::decile_edges(rc[a]);
        double s = detail::contingency_similarity(rc[a], rlab, sc[a], slab, edges);
        out.per_pair.emplace_back(schema.columns[a].name + " | " + schema.columns[label].name, s);
        sum += s;
    }
    out.mean = sum / static_cast<double>(out.per_pair.size());
    return out;
}

// Harmonic mean of the shape and trend means.
inline double density(double shape_mean, double trend_mean) {
    if (shape_mean <= 0 || trend_mean <= 0) return 0.0;
    return 2.0 * shape_mean * trend_mean / (shape_mean + trend_mean);
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

inline ColumnScores coverage(const Table& real, const Table& syn, const FeatureSchema& schema) {
    ColumnScores out;
    double sum = 0;
    for (size_t j = 0; j < schema.columns.size(); ++j) {
        auto rcol = real.column(j);
        auto scol = syn.column(j);
        if (rcol.empty() || scol.empty()) throw Error("coverage: empty column");
        double s;
        if (schema.columns[j].label) {
            std::map<double, bool> present;
            for (double v : scol) present[v] = true;
            std::map<double, bool> cats;
            for (double v : rcol) cats[v] = true;
            size_t hit = 0;
            for (const auto& [c, _] : cats) hit += present.count(c) ? 1 : 0;
            s = static_cast<double>(hit) / static_cast<double>(cats.size());
        } else {
            double rmin = *std::min_element(rcol.begin(), rcol.end());
            double rmax = *std::max_element(rcol.begin(), rcol.end());
            double smin = *std::min_element(scol.begin(), scol.end());
            double smax = *std::max_element(scol.begin(), scol.end());
            if (rmax == rmin) {
                s = (smin <= rmin && rmin <= smax) ? 1.0 : 0.0;
            } else {
                s = 1.0 - std::max(0.0, (smin - rmin) / (rmax - rmin)) -
                    std::max(0.0, (rmax - smax) / (rmax - rmin));
                s = std::clamp(s, 0.0, 1.0);
            }
        }
        out.per_column.emplace_back(schema.columns[j].name, s);
        sum += s;
    }
    out.mean = sum / static_cast<double>(out.per_column.size());
    return out;
}

// ---------------------------------------------------------------------------
// Quality: support-based alpha-precision / beta-recall
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<double>> minmax_normalize(const Table& t, const Table& ref) {
    size_t cols = t.columns.size();
    std::vector<double> lo(cols), hi(cols);
    for (size_t j = 0; j < cols; ++j) {
        auto c = ref.column(j);
        lo[j] = *std::min_element(c.begin(), c.end());
        hi[j] = *std::max_element(c.begin(), c.end());
    }
    std::vector<std::vector<double>> out;
    out.reserve(t.n());
    for (const auto& row : t.rows) {
        std::vector<double> r(cols);
        for (size_t j = 0; j < cols; ++j) {
            // a degenerate reference range keeps the raw offset so distinct
            // points stay distinct
            double denom = hi[j] - lo[j];
            r[j] = denom > 0 ? (row[j] - lo[j]) / denom : row[j] - lo[j];
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline double l2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
}

// Mean over the alpha grid of the fraction of `other` points lying inside the
// reference alpha-support: the union of balls around reference points with
// radius the alpha-quantile of reference k-NN distances.
inline double support_coverage(const Table& reference, const Table& other,
                               const std::vector<double>& alpha_grid, size_t k) {
    if (reference.n() < k + 1)
        throw Error("quality: need at least k+1 reference rows, k=" + std::to_string(k));
    auto ref = minmax_normalize(reference, reference);
    auto oth = minmax_normalize(other, reference);

    std::vector<double> knn(ref.size());
    for (size_t i = 0; i < ref.size(); ++i) {
        std::vector<double> dist;
        dist.reserve(ref.size() - 1);
        for (size_t j = 0; j < ref.size(); ++j) {
            if (j == i) continue;
            dist.push_back(l2(ref[i], ref[j]));
        }
        std::nth_element(dist.begin(), dist.begin() + static_cast<long>(k - 1), dist.end());
        knn[i] = dist[k - 1];
    }
    std::vector<double> mind(oth.size());
    for (size_t i = 0; i < oth.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : ref) best = std::min(best, l2(oth[i], r));
        mind[i] = best;
    }
    double total = 0;
    for (double alpha : alpha_grid) {
        double radius = stats::quantile(knn, alpha);
        size_t inside = 0;
        for (double d : mind)
            if (d <= radius) ++inside;
        total += static_cast<double>(inside) / static_cast<double>(mind.size());
    }
    return total / static_cast<double>(alpha_grid.size());
}

} // namespace detail

inline std::vector<double> default_alpha_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 19; ++i) g.push_back(i * 0.05);
    return g;
}

struct QualityScores {
    double alpha_precision = 0;
    double beta_recall = 0;
};

inline QualityScores quality(const Table& real, const Table& syn,
                             const std::vector<double>& alpha_grid = default_alpha_grid(),
                             size_t k = 5) {
    QualityScores q;
    q.alpha_precision = detail::support_coverage(real, syn, alpha_grid, k);
    q.beta_recall = detail::support_coverage(syn, real, alpha_grid, k);
    return q;
}

// ---------------------------------------------------------------------------
// Machine-learning efficiency (train on synthetic, test on real)
// ---------------------------------------------------------------------------

enum class Classifier { logistic, boosted_stumps, majority };

inline std::string to_string(Classifier c) {
    switch (c) {
        case Classifier::logistic: return "logistic";
        case Classifier::boosted_stumps: return "boosted_stumps";
        default: return "majority";
    }
}

struct MleScores {
    double binary_f1 = 0;
    double weighted_f1 = 0;
    double auroc = 0;
    double accuracy = 0;
    std::string classifier;

    json to_json() const {
        return json{{"binary_f1", binary_f1},
                    {"weighted_f1", weighted_f1},
                    {"auroc", auroc},
                    {"accuracy", accuracy},
                    {"classifier", classifier}};
    }
};

inline MleScores mle(const Table& syn_train, const Table& real_test, const FeatureSchema& schema,
                     Classifier classifier = Classifier::boosted_stumps) {
    size_t label = schema.label_index();
    auto split_xy = [&](const Table& t) {
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (const auto& row : t.rows) {
            std::vector<double> feats(row.begin(), row.begin() + static_cast<long>(label));
            x.push_back(std::move(feats));
            y.push_back(static_cast<int>(row[label]));
        }
        return std::pair{x, y};
    };
    auto [xtr, ytr] = split_xy(syn_train);
    auto [xte, yte] = split_xy(real_test);

    std::vector<double> proba(xte.size());
    if (classifier == Classifier::logistic) {
        stats::Logistic clf;
        clf.fit(xtr, ytr);
        for (size_t i = 0; i < xte.size(); ++i) proba[i] = clf.predict_proba(xte[i]);
    } else if (classifier == Classifier::boosted_stumps) {
        stats::BoostedStumps clf;
        clf.fit(xtr, ytr);
        for (size_t i = 0; i < xte.size(); ++i) proba[i] = clf.predict_proba(xte[i]);
    } else {
        double pos = 0;
        for (int v : ytr) pos += v;
        double p = pos / static_cast<double>(ytr.size());
        std::fill(proba.begin(), proba.end(), p >= 0.5 ? 1.0 : 0.0);
    }

    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < proba.size(); ++i) {
        bool pred = proba[i] >= 0.5;
        if (pred && yte[i] == 1) tp++;
        else if (pred && yte[i] == 0) fp++;
        else if (!pred && yte[i] == 1) fn++;
        else tn++;
    }
    auto f1 = [](long tp_, long fp_, long fn_) {
        double denom = static_cast<double>(2 * tp_ + fp_ + fn_);
        return denom > 0 ? 2.0 * static_cast<double>(tp_) / denom : 0.0;
    };
    MleScores out;
    out.classifier = to_string(classifier);
    out.binary_f1 = f1(tp, fp, fn);
    double n = static_cast<double>(proba.size());
    double pos_share = static_cast<double>(tp + fn) / n;
    out.weighted_f1 = pos_share * f1(tp, fp, fn) + (1.0 - pos_share) * f1(tn, fn, fp);
    out.accuracy = static_cast<double>(tp + tn) / n;
    if (classifier == Classifier::majority) {
        out.auroc = 0.5; // constant scores carry no ranking information
    } else {
        out.auroc = stats::roc_auc(proba, yte);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Privacy: distance to closest record
// ---------------------------------------------------------------------------

struct DcrResult {
    double proportion = 0; // closest real-train record strictly nearer than closest test record
    size_t ties = 0;       // equal minimum distances, counted 0.5 each
};

// Numeric columns normalized by the training range, the label one-hot
// encoded, L1 distances, exact double loops.
inline DcrResult dcr(const Table& syn, const Table& real_train, const Table& real_test,
                     const FeatureSchema& schema) {
    if (syn.n() == 0 || real_train.n() == 0 || real_test.n() == 0)
        throw Error("dcr: empty input table");
    size_t label = schema.label_index();
    std::vector<double> lo(label), hi(label);
    for (size_t j = 0; j < label; ++j) {
        auto c = real_train.column(j);
        lo[j] = *std::min_element(c.begin(), c.end());
        hi[j] = *std::max_element(c.begin(), c.end());
    }
    auto encode = [&](const std::vector<double>& row) {
        std::vector<double> out;
        out.reserve(label + 2);
        for (size_t j = 0; j < label; ++j)
            out.push_back(hi[j] > lo[j] ? (row[j] - lo[j]) / (hi[j] - lo[j]) : 0.0);
        out.push_back(row[label] == 0 ? 1.0 : 0.0);
        out.push_back(row[label] == 1 ? 1.0 : 0.0);
        return out;
    };
    auto encode_all = [&](const Table& t) {
        std::vector<std::vector<double>> out;
        out.reserve(t.n());
        for (const auto& r : t.rows) out.push_back(encode(r));
        return out;
    };
    auto s = encode_all(syn), tr = encode_all(real_train), te = encode_all(real_test);
    auto l1 = [](const std::vector<double>& a, const std::vector<double>& b) {
        double d = 0;
        for (size_t j = 0; j < a.size(); ++j) d += std::abs(a[j] - b[j]);
        return d;
    };

    DcrResult res;
    double score = 0;
    for (const auto& row : s) {
        double dtr = std::numeric_limits<double>::infinity();
        for (const auto& t : tr) dtr = std::min(dtr, l1(row, t));
        double dte = std::numeric_limits<double>::infinity();
        for (const auto& t : te) dte = std::min(dte, l1(row, t));
        if (dtr < dte) score += 1.0;
        else if (dtr == dte) {
            score += 0.5;
            res.ties++;
        }
    }
    res.proportion = score / static_cast<double>(s.size());
    return res;
}

// ---------------------------------------------------------------------------
// Logistic detection
// ---------------------------------------------------------------------------

// Mean cross-validated ROC-AUC of a logistic discriminator separating real
// (0) from synthetic (1); 0.5 means indistinguishable. Fold assignment hashes
// the feature vector, so byte-identical rows always share a fold: duplicate
// rows then cancel instead of leaking their counterpart's label across the
// train/test boundary and biasing the AUC.
inline double detection(const Table& real, const Table& syn, int folds = 5, uint64_t seed = 7) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const auto& r : real.rows) {
        x.push_back(r);
        y.push_back(0);
    }
    for (const auto& r : syn.rows) {
        x.push_back(r);
        y.push_back(1);
    }
    auto fold_of = [&](const std::vector<double>& row) {
        uint64_t h = 14695981039346656037ULL;
        for (double v : row) {
            uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xff;
                h *= 1099511628211ULL;
            }
        }
        h ^= seed + 0x9e3779b97f4a7c15ULL;
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
        h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
        h ^= h >> 31;
        return static_cast<int>(h % static_cast<uint64_t>(folds));
    };
    std::vector<int> fold(x.size());
    for (size_t i = 0; i < x.size(); ++i) fold[i] = fold_of(x[i]);
    double auc_sum = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<std::vector<double>> xtr, xte;
        std::vector<int> ytr, yte;
        for (size_t i = 0; i < x.size(); ++i) {
            if (fold[i] == f) {
                xte.push_back(x[i]);
                yte.push_back(y[i]);
            } else {
                xtr.push_back(x[i]);
                ytr.push_back(y[i]);
            }
        }
        stats::Logistic clf;
        clf.fit(xtr, ytr);
        std::vector<double> proba(xte.size());
        for (size_t i = 0; i < xte.size(); ++i) proba[i] = clf.predict_proba(xte[i]);
        auc_sum += stats::roc_auc(proba, yte);
    }
    return auc_sum / static_cast<double>(folds);
}

inline double fold_detection_score(double auc) { return 1.0 - 2.0 * std::abs(auc - 0.5); }

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

struct FidelityReport {
    ColumnScores shape;
    PairScores trend;
    double density_score = 0;
    ColumnScores coverage_scores;
    QualityScores quality_scores;
    std::optional<MleScores> mle_scores;
    std::optional<DcrResult> dcr_result;
    double detection_score = 0;
    double detection_folded = 0;

    json to_json() const {
        json shape_j = json::object(), cov_j = json::object(), trend_j = json::object();
        for (const auto& [name, s] : shape.per_column) shape_j[name] = s;
        for (const auto& [name, s] : coverage_scores.per_column) cov_j[name] = s;
        for (const auto& [name, s] : trend.per_pair) trend_j[name] = s;
        json out{{"shape", {{"per_column", shape_j}, {"mean", shape.mean}}},
                 {"trend", {{"per_pair", trend_j}, {"mean", trend.mean}}},
                 {"density", density_score},
                 {"coverage", {{"per_column", cov_j}, {"mean", coverage_scores.mean}}},
                 {"quality",
                  {{"alpha_precision", quality_scores.alpha_precision},
                   {"beta_recall", quality_scores.beta_recall}}},
                 {"detection", {{"auc", detection_score}, {"folded", detection_folded}}}};
        if (mle_scores) out["mle"] = mle_scores->to_json();
        if (dcr_result)
            out["dcr"] = {{"proportion", dcr_result->proportion}, {"ties", dcr_result->ties}};
        return out;
    }

    std::string to_markdown() const {
        char buf[256];
        std::string out = "## Column shapes\n\n| Column | Score |\n| --- | --- |\n";
        for (const auto& [name, s] : shape.per_column) {
            std::snprintf(buf, sizeof buf, "| %s | %.2f |\n", name.c_str(), s);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "| **Average** | **%.2f** |\n", shape.mean);
        out += buf;
        std::snprintf(buf, sizeof buf,
                      "\n## Summary\n\n| Metric | Score |\n| --- | --- |\n| Shape mean | %.4f |\n| "
                      "Trend mean | %.4f |\n| Density | %.4f |\n| Coverage mean | %.4f |\n| "
                      "Alpha precision | %.4f |\n| Beta recall | %.4f |\n| Detection AUC | %.4f |\n",
                      shape.mean, trend.mean, density_score, coverage_scores.mean,
                      quality_scores.alpha_precision, quality_scores.beta_recall, detection_score);
        out += buf;
        if (mle_scores) {
            std::snprintf(buf, sizeof buf,
                          "\n## Machine-learning efficiency (%s)\n\n| binary f1 | roc auc | "
                          "weighted f1 | accuracy |\n| --- | --- | --- | --- |\n| %.4f | %.4f | "
                          "%.4f | %.4f |\n",
                          mle_scores->classifier.c_str(), mle_scores->binary_f1, mle_scores->auroc,
                          mle_scores->weighted_f1, mle_scores->accuracy);
            out += buf;
        }
        if (dcr_result) {
            std::snprintf(buf, sizeof buf, "\n## Privacy\n\nDCR score: %.4f (%zu ties)\n",
                          dcr_result->proportion, dcr_result->ties);
            out += buf;
        }
        return out;
    }
};

struct SuiteOptions {
    const Table* real_test = nullptr; // enables DCR and MLE-on-held-out
    Classifier mle_classifier = Classifier::boosted_stumps;
    int detection_folds = 5;
    uint64_t detection_seed = 7;
    std::vector<double> alpha_grid = default_alpha_grid();
    size_t quality_k = 5;
};

inline FidelityReport evaluate_suite(const Table& real, const Table& syn, const FeatureSchema& schema,
                                     const SuiteOptions& opts = {}) {
    FidelityReport rep;
    rep.shape = shape_score(real, syn, schema);
    rep.trend = trend_score(real, syn, schema);
    rep.density_score = density(rep.shape.mean, rep.trend.mean);
    rep.coverage_scores = coverage(real, syn, schema);
    rep.quality_scores = quality(real, syn, opts.alpha_grid, opts.quality_k);
    if (opts.real_test) {
        rep.mle_scores = mle(syn, *opts.real_test, schema, opts.mle_classifier);
        rep.dcr_result = dcr(syn, real, *opts.real_test, schema);
    }
    rep.detection_score = detection(real, syn, opts.detection_folds, opts.detection_seed);
    rep.detection_folded = fold_detection_score(rep.detection_score);
    return rep;
}

} // namespace moodangels::syneval
