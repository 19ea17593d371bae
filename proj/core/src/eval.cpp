#include "tce/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace tce {

namespace {

std::vector<ColumnMeta> concept_columns(const ConceptSpace& space) {
    std::vector<ColumnMeta> cols;
    for (const auto& c : space.all_concepts())
        cols.push_back({c.first, c.second, space.is_seen(c.first, c.second)});
    return cols;
}

}  // namespace

ScoreMatrix score_images(const Model& model, const Dataset& data, Split split, int threads) {
    require(threads >= 1, "score_images: threads must be >= 1");
    ScoreMatrix out;
    out.columns = concept_columns(data.space);
    const auto concepts = data.space.all_concepts();
    const int cols = static_cast<int>(concepts.size());

    std::vector<const DataSample*> rows;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const auto& s = data.sample(i);
        if (s.split == split) rows.push_back(&s);
    }
    out.scores = Mat(static_cast<int>(rows.size()), cols);
    out.labels.reserve(rows.size());
    for (const auto* s : rows) out.labels.push_back({s->attr, s->obj});

    auto score_range = [&](int begin, int end) {
        if (const auto* tce = std::get_if<TceParams>(&model)) {
            Mat gallery = concept_gallery(*tce, concepts);
            for (int r = begin; r < end; ++r) {
                Vec x = image_embed(*tce, rows[r]->feature);
                auto row = out.scores.row(r);
                for (int c = 0; c < cols; ++c)
                    row[c] = -euclidean_distance_value(x, gallery.row(c));
            }
        } else if (const auto* vp = std::get_if<VisProdParams>(&model)) {
            for (int r = begin; r < end; ++r) {
                auto f = visprod_forward(*vp, rows[r]->feature);
                auto row = out.scores.row(r);
                for (int c = 0; c < cols; ++c)
                    row[c] = visprod_score(f, concepts[c].first, concepts[c].second);
            }
        } else {
            const auto& le = std::get<LabelEmbedParams>(model);
            Mat gallery = labelembed_gallery(le, concepts);
            for (int r = begin; r < end; ++r) {
                Vec x = mlp_forward(le.image_mapper, rows[r]->feature);
                auto row = out.scores.row(r);
                for (int c = 0; c < cols; ++c)
                    row[c] = -euclidean_distance_value(x, gallery.row(c));
            }
        }
    };

    const int n_rows = static_cast<int>(rows.size());
    if (threads == 1 || n_rows < 2 * threads) {
        score_range(0, n_rows);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n_rows + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            int begin = t * chunk;
            int end = std::min(n_rows, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(score_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

int predict(std::span<const double> row, const std::vector<ColumnMeta>& columns,
            std::span<const int> candidates, double bias) {
    require(!candidates.empty(), "predict: empty candidate set");
    int best = -1;
    double best_score = 0.0;
    for (int c : candidates) {
        if (c < 0 || c >= static_cast<int>(columns.size()))
            throw IndexError("predict: candidate column out of range");
        double s = row[c] + (columns[c].seen ? 0.0 : bias);
        if (best < 0 || s > best_score || (s == best_score && c < best)) {
            best = c;
            best_score = s;
        }
    }
    return best;
}

double harmonic_mean(double a, double b) {
    if (a + b == 0.0) return 0.0;
    return 2.0 * a * b / (a + b);
}

namespace {

struct RowCache {
    int best_seen = -1;     // column index of best seen score (lowest index on ties)
    int best_unseen = -1;
    double seen_score = 0.0;
    double unseen_score = 0.0;
    int label_col = -1;
    bool label_seen = false;
};

std::vector<RowCache> build_row_cache(const ScoreMatrix& sm, const ConceptSpace& space) {
    const int cols = static_cast<int>(sm.columns.size());
    std::vector<RowCache> cache(static_cast<std::size_t>(sm.scores.rows));
    for (int r = 0; r < sm.scores.rows; ++r) {
        auto row = sm.scores.row(r);
        RowCache& rc = cache[static_cast<std::size_t>(r)];
        for (int c = 0; c < cols; ++c) {
            if (sm.columns[c].seen) {
                if (rc.best_seen < 0 || row[c] > rc.seen_score) {
                    rc.best_seen = c;
                    rc.seen_score = row[c];
                }
            } else if (rc.best_unseen < 0 || row[c] > rc.unseen_score) {
                rc.best_unseen = c;
                rc.unseen_score = row[c];
            }
            if (sm.columns[c].attr == sm.labels[r].first && sm.columns[c].obj == sm.labels[r].second)
                rc.label_col = c;
        }
        require(rc.label_col >= 0, "score matrix label not among columns");
        rc.label_seen = space.is_seen(sm.labels[r].first, sm.labels[r].second);
    }
    return cache;
}

/// Open seen/unseen accuracy at one bias, via the per-row seen/unseen
/// maxima. Equivalent to predict() over the full candidate set.
SweepPoint sweep_at_bias(const std::vector<RowCache>& cache, double bias) {
    long seen_hit = 0, seen_total = 0, unseen_hit = 0, unseen_total = 0;
    for (const auto& rc : cache) {
        double u = rc.unseen_score + bias;
        int winner;
        if (rc.best_seen < 0) {
            winner = rc.best_unseen;
        } else if (rc.best_unseen < 0) {
            winner = rc.best_seen;
        } else if (u > rc.seen_score || (u == rc.seen_score && rc.best_unseen < rc.best_seen)) {
            winner = rc.best_unseen;
        } else {
            winner = rc.best_seen;
        }
        bool correct = winner == rc.label_col;
        if (rc.label_seen) {
            ++seen_total;
            seen_hit += correct;
        } else {
            ++unseen_total;
            unseen_hit += correct;
        }
    }
    SweepPoint p;
    p.bias = bias;
    p.open_seen = seen_total ? 100.0 * static_cast<double>(seen_hit) / static_cast<double>(seen_total) : 0.0;
    p.open_unseen =
        unseen_total ? 100.0 * static_cast<double>(unseen_hit) / static_cast<double>(unseen_total) : 0.0;
    return p;
}

}  // namespace

SweepPoint sweep_point(const ScoreMatrix& scores, const ConceptSpace& space, double bias) {
    auto cache = build_row_cache(scores, space);
    return sweep_at_bias(cache, bias);
}

SweepResult auc_bias_sweep(const ScoreMatrix& scores, const ConceptSpace& space, int bins) {
    require(bins >= 2, "auc_bias_sweep: need at least 2 bins");
    require(scores.scores.rows > 0, "auc_bias_sweep: empty score matrix");
    auto cache = build_row_cache(scores, space);
    bool any_seen = false, any_unseen = false;
    for (const auto& rc : cache) (rc.label_seen ? any_seen : any_unseen) = true;
    require(any_seen && any_unseen, "auc_bias_sweep: need both seen- and unseen-labeled images");

    double s_max = 0.0;
    for (double v : scores.scores.a) s_max = std::max(s_max, std::abs(v));

    SweepResult out;
    out.curve.reserve(static_cast<std::size_t>(bins));
    for (int i = 0; i < bins; ++i) {
        double bias = -s_max + (2.0 * s_max) * static_cast<double>(i) / static_cast<double>(bins - 1);
        out.curve.push_back(sweep_at_bias(cache, bias));
    }

    // integrate open-unseen over open-seen: sort by abscissa, merge
    // duplicates by max, anchor the left end at open_seen = 0
    std::vector<std::pair<double, double>> pts;
    pts.reserve(out.curve.size());
    for (const auto& p : out.curve) pts.push_back({p.open_seen, p.open_unseen});
    std::sort(pts.begin(), pts.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& p : pts) {
        if (!merged.empty() && merged.back().first == p.first)
            merged.back().second = std::max(merged.back().second, p.second);
        else
            merged.push_back(p);
    }
    double area = 0.0;
    if (!merged.empty() && merged.front().first > 0.0)
        area += merged.front().first * merged.front().second;  // left anchor rectangle
    for (std::size_t i = 1; i < merged.size(); ++i)
        area += (merged[i].first - merged[i - 1].first) * 0.5 * (merged[i].second + merged[i - 1].second);
    out.auc = area / 100.0;
    return out;
}

MetricsReport compute_metrics(const ScoreMatrix& scores, const ConceptSpace& space, int bins) {
    const int cols = static_cast<int>(scores.columns.size());
    require(scores.scores.rows > 0 && cols > 0, "compute_metrics: empty score matrix");
    require_shape(static_cast<int>(scores.labels.size()) == scores.scores.rows,
                  "compute_metrics: labels do not align with score rows");

    std::vector<int> all_cols, unseen_cols;
    for (int c = 0; c < cols; ++c) {
        all_cols.push_back(c);
        if (!scores.columns[c].seen) unseen_cols.push_back(c);
    }

    long closed_hit = 0, closed_total = 0;
    long open_unseen_hit = 0, open_unseen_total = 0;
    long open_seen_hit = 0, open_seen_total = 0;
    long attr_hit = 0, obj_hit = 0;
    for (int r = 0; r < scores.scores.rows; ++r) {
        auto row = scores.scores.row(r);
        const auto& label = scores.labels[r];
        int full = predict(row, scores.columns, all_cols, 0.0);
        attr_hit += scores.columns[full].attr == label.first;
        obj_hit += scores.columns[full].obj == label.second;
        bool correct = scores.columns[full].attr == label.first && scores.columns[full].obj == label.second;
        if (space.is_seen(label.first, label.second)) {
            ++open_seen_total;
            open_seen_hit += correct;
        } else {
            ++open_unseen_total;
            open_unseen_hit += correct;
            ++closed_total;
            int closed = predict(row, scores.columns, unseen_cols, 0.0);
            closed_hit += scores.columns[closed].attr == label.first &&
                          scores.columns[closed].obj == label.second;
        }
    }
    require(open_seen_total > 0 && open_unseen_total > 0,
            "compute_metrics: need both seen- and unseen-labeled images");

    MetricsReport rep;
    rep.closed_unseen = 100.0 * static_cast<double>(closed_hit) / static_cast<double>(closed_total);
    rep.open_unseen =
        100.0 * static_cast<double>(open_unseen_hit) / static_cast<double>(open_unseen_total);
    rep.open_seen = 100.0 * static_cast<double>(open_seen_hit) / static_cast<double>(open_seen_total);
    rep.unseen_hm = harmonic_mean(rep.closed_unseen, rep.open_unseen);
    rep.all_hm = harmonic_mean(rep.open_unseen, rep.open_seen);
    rep.attr_acc = 100.0 * static_cast<double>(attr_hit) / static_cast<double>(scores.scores.rows);
    rep.obj_acc = 100.0 * static_cast<double>(obj_hit) / static_cast<double>(scores.scores.rows);
    rep.auc = auc_bias_sweep(scores, space, bins).auc;
    return rep;
}

namespace {

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics csv: " + path);
    out << "metric,value\n";
    out << "closed_unseen," << pct(report.closed_unseen) << "\n";
    out << "open_unseen," << pct(report.open_unseen) << "\n";
    out << "open_seen," << pct(report.open_seen) << "\n";
    out << "unseen_hm," << pct(report.unseen_hm) << "\n";
    out << "all_hm," << pct(report.all_hm) << "\n";
    out << "auc," << pct(report.auc) << "\n";
    out << "attr_acc," << pct(report.attr_acc) << "\n";
    out << "obj_acc," << pct(report.obj_acc) << "\n";
}

void write_curve_csv(const SweepResult& sweep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write curve csv: " + path);
    out << "bias,open_seen,open_unseen\n";
    char buf[48];
    for (const auto& p : sweep.curve) {
        std::snprintf(buf, sizeof buf, "%.10g", p.bias);
        out << buf << ',' << pct(p.open_seen) << ',' << pct(p.open_unseen) << "\n";
    }
}

std::string format_metrics_row(const MetricsReport& r) {
    return pct(r.closed_unseen) + "," + pct(r.open_unseen) + "," + pct(r.open_seen) + "," +
           pct(r.unseen_hm) + "," + pct(r.all_hm) + "," + pct(r.auc) + "," + pct(r.attr_acc) + "," +
           pct(r.obj_acc);
}

}  // namespace tce
