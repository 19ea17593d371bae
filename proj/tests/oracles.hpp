// Test-only oracles, coded independently of the library paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tce/eval.hpp"
#include "tce/tcemodel.hpp"

namespace oracles {

// ---- finite differences -----------------------------------------------------

struct FdReport {
    double max_err = 0.0;     // max over entries of |analytic - fd| / max(|a|, |fd|)
    double worst_analytic = 0.0;
    double worst_fd = 0.0;
    std::string worst_name;
    long entries = 0;
};

/// Central finite differences over every parameter entry exposed by
/// `params`, compared against `analytic` (same view order). `loss` must
/// re-evaluate the full objective from the current parameter values.
inline FdReport fd_check(std::vector<tce::TensorView> params, std::vector<tce::TensorView> analytic,
                         const std::function<double()>& loss, double eps = 1e-5,
                         double zero_floor = 1e-6) {
    FdReport rep;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto pspan = params[t].flat();
        auto aspan = analytic[t].flat();
        for (std::size_t i = 0; i < pspan.size(); ++i) {
            const double saved = pspan[i];
            pspan[i] = saved + eps;
            const double up = loss();
            pspan[i] = saved - eps;
            const double down = loss();
            pspan[i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double a = aspan[i];
            const double denom = std::max(std::abs(a), std::abs(fd));
            const double err = denom > zero_floor ? std::abs(a - fd) / denom : 0.0;
            if (err > rep.max_err) {
                rep.max_err = err;
                rep.worst_analytic = a;
                rep.worst_fd = fd;
                rep.worst_name = params[t].name;
            }
            ++rep.entries;
        }
    }
    return rep;
}

// ---- plain-loop network evaluation -------------------------------------------

/// Affine chain evaluated with nested-vector weights, no shared code with
/// the library's Mlp. act: 0 identity, 1 relu.
inline std::vector<double> hand_affine_chain(const std::vector<std::vector<std::vector<double>>>& weights,
                                             const std::vector<std::vector<double>>& biases,
                                             const std::vector<int>& act,
                                             const std::vector<double>& input) {
    std::vector<double> x = input;
    for (std::size_t layer = 0; layer < weights.size(); ++layer) {
        std::vector<double> y(weights[layer].size(), 0.0);
        for (std::size_t r = 0; r < y.size(); ++r) {
            double acc = biases[layer][r];
            for (std::size_t c = 0; c < x.size(); ++c) acc += weights[layer][r][c] * x[c];
            y[r] = acc;
        }
        if (act[layer] == 1)
            for (double& v : y) v = std::max(0.0, v);
        x = std::move(y);
    }
    return x;
}

// ---- reference Adam ----------------------------------------------------------

/// Textbook bias-corrected Adam, one scalar parameter.
struct ScalarAdam {
    double m = 0.0, v = 0.0;
    long t = 0;
    double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;

    explicit ScalarAdam(double lr_) : lr(lr_) {}

    double step(double param, double grad) {
        ++t;
        m = b1 * m + (1 - b1) * grad;
        v = b2 * v + (1 - b2) * grad * grad;
        double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
        double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
        return param - lr * mh / (std::sqrt(vh) + eps);
    }
};

// ---- statistics ---------------------------------------------------------------

inline double two_pass_variance(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size());
}

// ---- brute-force metric protocol ----------------------------------------------

struct BruteMetrics {
    double closed_unseen = 0.0;
    double open_unseen = 0.0;
    double open_seen = 0.0;
    double attr_acc = 0.0;
    double obj_acc = 0.0;
    double auc = 0.0;
};

/// Naive per-row reimplementation of the whole evaluation protocol:
/// biased argmax by explicit loops, lowest-index tie-break, the bias grid
/// over [-s_max, s_max], sort/merge/anchor/trapezoid for AUC.
inline BruteMetrics brute_force_metrics(const tce::Mat& scores,
                                        const std::vector<tce::ColumnMeta>& cols,
                                        const std::vector<tce::ConceptId>& labels,
                                        const tce::ConceptSpace& space, int bins) {
    const int R = scores.rows, C = scores.cols;
    auto argmax = [&](int r, bool unseen_only, double bias) {
        int best = -1;
        double best_s = 0.0;
        for (int c = 0; c < C; ++c) {
            if (unseen_only && cols[c].seen) continue;
            double s = scores(r, c) + (cols[c].seen ? 0.0 : bias);
            if (best < 0 || s > best_s) {
                best = c;
                best_s = s;
            }
        }
        return best;
    };
    auto is_label = [&](int r, int c) {
        return cols[c].attr == labels[r].first && cols[c].obj == labels[r].second;
    };

    BruteMetrics out;
    long closed_hit = 0, closed_n = 0, ou_hit = 0, ou_n = 0, os_hit = 0, os_n = 0, a_hit = 0, o_hit = 0;
    for (int r = 0; r < R; ++r) {
        int full = argmax(r, false, 0.0);
        a_hit += cols[full].attr == labels[r].first;
        o_hit += cols[full].obj == labels[r].second;
        if (space.is_seen(labels[r].first, labels[r].second)) {
            ++os_n;
            os_hit += is_label(r, full);
        } else {
            ++ou_n;
            ou_hit += is_label(r, full);
            ++closed_n;
            closed_hit += is_label(r, argmax(r, true, 0.0));
        }
    }
    out.closed_unseen = 100.0 * closed_hit / std::max(1L, closed_n);
    out.open_unseen = 100.0 * ou_hit / std::max(1L, ou_n);
    out.open_seen = 100.0 * os_hit / std::max(1L, os_n);
    out.attr_acc = 100.0 * a_hit / R;
    out.obj_acc = 100.0 * o_hit / R;

    double s_max = 0.0;
    for (double v : scores.a) s_max = std::max(s_max, std::abs(v));
    std::vector<std::pair<double, double>> pts;
    for (int b = 0; b < bins; ++b) {
        double bias = -s_max + 2.0 * s_max * b / (bins - 1);
        long sh = 0, sn = 0, uh = 0, un = 0;
        for (int r = 0; r < R; ++r) {
            int pred = argmax(r, false, bias);
            bool ok = is_label(r, pred);
            if (space.is_seen(labels[r].first, labels[r].second)) {
                ++sn;
                sh += ok;
            } else {
                ++un;
                uh += ok;
            }
        }
        pts.push_back({100.0 * sh / std::max(1L, sn), 100.0 * uh / std::max(1L, un)});
    }
    std::sort(pts.begin(), pts.end());
    std::vector<std::pair<double, double>> merged;
    for (auto& p : pts) {
        if (!merged.empty() && merged.back().first == p.first)
            merged.back().second = std::max(merged.back().second, p.second);
        else
            merged.push_back(p);
    }
    double area = 0.0;
    if (!merged.empty() && merged.front().first > 0.0) area += merged.front().first * merged.front().second;
    for (std::size_t i = 1; i < merged.size(); ++i)
        area += (merged[i].first - merged[i - 1].first) * 0.5 * (merged[i].second + merged[i - 1].second);
    out.auc = area / 100.0;
    return out;
}

}  // namespace oracles
