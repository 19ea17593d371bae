#pragma once

#include <string>
#include <vector>

#include "tce/dataforge.hpp"
#include "tce/tcemodel.hpp"

namespace tce {

struct ColumnMeta {
    int attr = -1;
    int obj = -1;
    bool seen = false;
};

/// Rows = images of one split, columns = the stable enumeration of
/// 𝒞ˢ ∪ 𝒞ᵘ (lexicographic by attr index, then object index). Higher score
/// is better; for distance models the score is the negated distance.
struct ScoreMatrix {
    Mat scores;
    std::vector<ColumnMeta> columns;
    std::vector<ConceptId> labels;  // per row
};

/// Scores every image of `split` against the full concept gallery.
/// `threads` parallelizes over rows only; the result is identical to the
/// single-threaded one.
ScoreMatrix score_images(const Model& model, const Dataset& data, Split split, int threads = 1);

/// Argmax over `candidates` of score + (bias if the column is unseen).
/// Ties break toward the lowest column index. Throws PreconditionError on
/// an empty candidate set.
int predict(std::span<const double> row, const std::vector<ColumnMeta>& columns,
            std::span<const int> candidates, double bias);

/// 2ab/(a+b), defined 0 at a+b=0.
double harmonic_mean(double a, double b);

/// All percentages in [0,100].
struct MetricsReport {
    double closed_unseen = 0.0;
    double open_unseen = 0.0;
    double open_seen = 0.0;
    double unseen_hm = 0.0;  // HM(closed_unseen, open_unseen)
    double all_hm = 0.0;     // HM(open_unseen, open_seen)
    double auc = 0.0;
    double attr_acc = 0.0;
    double obj_acc = 0.0;
};

struct SweepPoint {
    double bias = 0.0;
    double open_seen = 0.0;
    double open_unseen = 0.0;
};

struct SweepResult {
    double auc = 0.0;
    std::vector<SweepPoint> curve;  // in bias order
};

/// Open seen/unseen accuracies of the full-candidate-set argmax at one
/// bias value; the sweep evaluates this at each of its grid points.
SweepPoint sweep_point(const ScoreMatrix& scores, const ConceptSpace& space, double bias);

/// Bias sweep over `bins` evenly spaced values in [-s_max, s_max]
/// (inclusive), where s_max is the largest absolute score in the matrix.
/// AUC integrates open-unseen over open-seen (trapezoid, duplicate
/// abscissae merged by max, left end anchored at open_seen = 0), divided
/// by 100.
SweepResult auc_bias_sweep(const ScoreMatrix& scores, const ConceptSpace& space, int bins = 100);

/// The full metric suite at bias 0 plus the sweep AUC.
MetricsReport compute_metrics(const ScoreMatrix& scores, const ConceptSpace& space, int bins = 100);

void write_metrics_csv(const MetricsReport& report, const std::string& path);
void write_curve_csv(const SweepResult& sweep, const std::string& path);
std::string format_metrics_row(const MetricsReport& report);

}  // namespace tce
