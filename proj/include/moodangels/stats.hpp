#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "moodangels/util.hpp"

namespace moodangels::stats {

inline double mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Product-moment correlation; nullopt when either series is constant.
inline std::optional<double> pearson_raw(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Acklam's rational approximation with one Halley refinement; good to ~1e-15.
inline double normal_icdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("normal_icdf: p must be in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    double e = normal_cdf(x) - p;
    double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw Error("quantile: empty input");
    q = std::clamp(q, 0.0, 1.0);
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    if (lo + 1 >= v.size()) return v.back();
    double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

// Lower-triangular Cholesky factor; adds ridge until the matrix is PD.
// Returns the epsilon that was needed (0 when none).
inline double cholesky(std::vector<double>& m, size_t n) {
    std::vector<double> orig = m;
    double eps = 0.0;
    for (int attempt = 0; attempt < 16; ++attempt) {
        m = orig;
        if (eps > 0)
            for (size_t i = 0; i < n; ++i) m[i * n + i] += eps;
        bool ok = true;
        for (size_t j = 0; j < n && ok; ++j) {
            double sum = m[j * n + j];
            for (size_t k = 0; k < j; ++k) sum -= m[j * n + k] * m[j * n + k];
            if (sum <= 1e-12) { ok = false; break; }
            double diag = std::sqrt(sum);
            m[j * n + j] = diag;
            for (size_t i = j + 1; i < n; ++i) {
                double s = m[i * n + j];
                for (size_t k = 0; k < j; ++k) s -= m[i * n + k] * m[j * n + k];
                m[i * n + j] = s / diag;
            }
        }
        if (ok) {
            for (size_t i = 0; i < n; ++i)
                for (size_t j = i + 1; j < n; ++j) m[i * n + j] = 0.0;
            return eps;
        }
        eps = (eps == 0.0) ? 1e-8 : eps * 10.0;
    }
    throw Error("cholesky: matrix not positive definite even after ridge regularization");
}

// Solve A x = b for symmetric positive definite A (in-place Cholesky).
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b) {
    size_t n = b.size();
    cholesky(a, n);
    // forward then backward substitution with L and L^T
    for (size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (size_t i = n; i-- > 0;) {
        double s = b[i];
        for (size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
    return b;
}

// ROC-AUC via the Mann-Whitney statistic with average ranks for ties.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    size_t n = scores.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0;
    size_t n_pos = 0, n_neg = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (size_t k = i; k < j; ++k)
            if (labels[idx[k]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    for (int l : labels) (l == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw Error("roc_auc: needs both classes");
    double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct Standardizer {
    std::vector<double> mu, sigma;

    void fit(const std::vector<std::vector<double>>& rows) {
        size_t d = rows.empty() ? 0 : rows[0].size();
        mu.assign(d, 0.0);
        sigma.assign(d, 0.0);
        for (const auto& r : rows)
            for (size_t j = 0; j < d; ++j) mu[j] += r[j];
        for (size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(rows.size());
        for (const auto& r : rows)
            for (size_t j = 0; j < d; ++j) sigma[j] += (r[j] - mu[j]) * (r[j] - mu[j]);
        for (size_t j = 0; j < d; ++j) {
            sigma[j] = std::sqrt(sigma[j] / static_cast<double>(rows.size()));
            if (sigma[j] < 1e-12) sigma[j] = 1.0;
        }
    }

    std::vector<double> apply(const std::vector<double>& r) const {
        std::vector<double> out(r.size());
        for (size_t j = 0; j < r.size(); ++j) out[j] = (r[j] - mu[j]) / sigma[j];
        return out;
    }
};

// L2-regularized logistic regression fit by IRLS; deterministic. The default
// penalty matches the common summed-loss convention (C = 1).
class Logistic {
public:
    explicit Logistic(double l2 = 1.0, int max_iter = 30) : l2_(l2), max_iter_(max_iter) {}

    void fit(const std::vector<std::vector<double>>& x_raw, const std::vector<int>& y) {
        std_.fit(x_raw);
        std::vector<std::vector<double>> x;
        x.reserve(x_raw.size());
        for (const auto& r : x_raw) x.push_back(std_.apply(r));
        size_t n = x.size(), d = x[0].size() + 1; // bias last
        w_.assign(d, 0.0);
        for (int it = 0; it < max_iter_; ++it) {
            std::vector<double> grad(d, 0.0), hess(d * d, 0.0);
            for (size_t i = 0; i < n; ++i) {
                double z = w_[d - 1];
                for (size_t j = 0; j + 1 < d; ++j) z += w_[j] * x[i][j];
                double p = 1.0 / (1.0 + std::exp(-z));
                double g = p - static_cast<double>(y[i]);
                double h = std::max(p * (1.0 - p), 1e-9);
                auto feat = [&](size_t j) { return j + 1 < d ? x[i][j] : 1.0; };
                for (size_t j = 0; j < d; ++j) {
                    grad[j] += g * feat(j);
                    for (size_t k = 0; k <= j; ++k) hess[j * d + k] += h * feat(j) * feat(k);
                }
            }
            for (size_t j = 0; j < d; ++j) {
                for (size_t k = 0; k < j; ++k) hess[k * d + j] = hess[j * d + k];
                if (j + 1 < d) {
                    grad[j] += l2_ * w_[j];
                    hess[j * d + j] += l2_;
                }
                hess[j * d + j] += 1e-9;
            }
            auto step = solve_spd(hess, grad);
            double delta = 0;
            for (size_t j = 0; j < d; ++j) {
                w_[j] -= step[j];
                delta = std::max(delta, std::abs(step[j]));
            }
            if (delta < 1e-8) break;
        }
    }

    double predict_proba(const std::vector<double>& r) const {
        auto x = std_.apply(r);
        double z = w_.back();
        for (size_t j = 0; j < x.size(); ++j) z += w_[j] * x[j];
        return 1.0 / (1.0 + std::exp(-z));
    }

private:
    double l2_;
    int max_iter_;
    std::vector<double> w_;
    Standardizer std_;
};

// Gradient-boosted depth-1 trees with logistic loss: the built-in stand-in
// for an external boosted-tree classifier.
class BoostedStumps {
public:
    explicit BoostedStumps(int rounds = 150, double learning_rate = 0.1, int max_bins = 32)
        : rounds_(rounds), lr_(learning_rate), max_bins_(max_bins) {}

    void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
        size_t n = x.size(), d = x[0].size();
        double pos = 0;
        for (int v : y) pos += v;
        double prior = std::clamp(pos / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
        bias_ = std::log(prior / (1.0 - prior));
        std::vector<double> f(n, bias_);
        // candidate thresholds per feature from value quantiles
        std::vector<std::vector<double>> cuts(d);
        for (size_t j = 0; j < d; ++j) {
            std::vector<double> vals(n);
            for (size_t i = 0; i < n; ++i) vals[i] = x[i][j];
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            if (vals.size() <= 1) continue;
            size_t bins = std::min(vals.size() - 1, static_cast<size_t>(max_bins_));
            for (size_t b = 1; b <= bins; ++b) {
                size_t at = b * (vals.size() - 1) / (bins + 1);
                cuts[j].push_back(0.5 * (vals[at] + vals[at + 1]));
            }
            std::sort(cuts[j].begin(), cuts[j].end());
            cuts[j].erase(std::unique(cuts[j].begin(), cuts[j].end()), cuts[j].end());
        }
        stumps_.clear();
        for (int t = 0; t < rounds_; ++t) {
            std::vector<double> g(n), h(n);
            for (size_t i = 0; i < n; ++i) {
                double p = 1.0 / (1.0 + std::exp(-f[i]));
                g[i] = p - static_cast<double>(y[i]);
                h[i] = std::max(p * (1.0 - p), 1e-9);
            }
            Stump best{};
            double best_gain = -1;
            for (size_t j = 0; j < d; ++j) {
                for (double cut : cuts[j]) {
                    double gl = 0, hl = 0, gr = 0, hr = 0;
                    for (size_t i = 0; i < n; ++i) {
                        if (x[i][j] <= cut) { gl += g[i]; hl += h[i]; }
                        else { gr += g[i]; hr += h[i]; }
                    }
                    if (hl < 1e-9 || hr < 1e-9) continue;
                    double gain = gl * gl / (hl + reg_) + gr * gr / (hr + reg_);
                    if (gain > best_gain) {
                        best_gain = gain;
                        best = {j, cut, -gl / (hl + reg_), -gr / (hr + reg_)};
                    }
                }
            }
            if (best_gain <= 0) break;
            best.left *= lr_;
            best.right *= lr_;
            stumps_.push_back(best);
            for (size_t i = 0; i < n; ++i)
                f[i] += (x[i][best.feature] <= best.cut) ? best.left : best.right;
        }
    }

    double predict_proba(const std::vector<double>& r) const {
        double f = bias_;
        for (const auto& s : stumps_)
            f += (r[s.feature] <= s.cut) ? s.left : s.right;
        return 1.0 / (1.0 + std::exp(-f));
    }

private:
    struct Stump {
        size_t feature;
        double cut;
        double left, right;
    };
    int rounds_;
    double lr_;
    int max_bins_;
    double reg_ = 1.0;
    double bias_ = 0.0;
    std::vector<Stump> stumps_;
};

// Stratified fold assignment: per-class shuffled round-robin.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int k, Rng& rng) {
    std::vector<int> fold(labels.size(), 0);
    for (int cls : {0, 1}) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) idx.push_back(i);
        rng.shuffle(idx);
        for (size_t i = 0; i < idx.size(); ++i)
            fold[idx[i]] = static_cast<int>(i % static_cast<size_t>(k));
    }
    return fold;
}

} // namespace moodangels::stats
