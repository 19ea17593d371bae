#pragma once

#include <functional>
#include <optional>
#include <string>

#include "tce/eval.hpp"
#include "tce/losses.hpp"

namespace tce {

/// Per-batch instrumentation payload (test hook): everything needed to
/// recompute the batch loss independently.
struct BatchEvent {
    int epoch = 0;
    int step = 0;  // global step index
    std::vector<int> indices;
    NegativeSamples negatives;
    std::uint64_t rvc_seed = 0;
    LossBreakdown loss;
    Model params_before;
};

struct TrainConfig {
    ModelKind model = ModelKind::Tce;
    int max_epochs = 1200;
    int batch_size = 512;
    double lr_main = 1e-4;
    double lr_attr_table = 1e-5;
    /// L2 weight decay; unset resolves per model (0 for tce, 5e-5 for the
    /// baselines).
    std::optional<double> weight_decay;
    LossWeights weights;
    std::uint64_t seed = 0;
    int eval_every = 10;  // epochs between validation passes; 0 disables
    int eval_bins = 100;
    TceDims dims;             // feature_dim is overridden by the dataset
    int visprod_hidden = 512;
    double labelembed_margin = 0.5;
    /// Pretrained word vectors; unset falls back to seeded random tables.
    std::optional<WordVecTable> attr_vectors;
    std::optional<WordVecTable> obj_vectors;
    std::function<void(const BatchEvent&)> batch_hook;

    void validate() const;
};

struct EpochRow {
    int epoch = 0;
    LossBreakdown mean;  // unweighted per-term means over the epoch's steps
    std::optional<MetricsReport> val;
};

struct TrainLog {
    std::vector<EpochRow> epochs;
    int best_epoch = -1;  // epoch of the checkpoint with max validation all_hm
    double best_val_all_hm = -1.0;
};

struct TrainResult {
    Model best;   // validation-selected checkpoint (= final when never evaluated)
    Model final;  // parameters after the last epoch
    TrainLog log;
};

/// Seeded mini-batch training: shuffle, sample negatives, assemble the
/// weighted loss, backprop, Adam. Deterministic end-to-end given config
/// and seed. Gradient computation reads only train-split features; the
/// loop aborts with NumericError naming the first non-finite loss term.
TrainResult train(const Dataset& data, const TrainConfig& config);

/// Convenience: score + metric suite for one split of `data`.
MetricsReport evaluate_model(const Model& model, const Dataset& data, Split split, int bins = 100,
                             int threads = 1);

struct AblationRow {
    std::string name;   // active-term summary, e.g. "tri+cls+rec"
    LossWeights weights;
    MetricsReport test;
};

/// The six loss-subset variants of the ablation protocol, trained and
/// evaluated on the test split. Variant k zeroes exactly the weights
/// outside its subset; base_config supplies everything else.
std::vector<AblationRow> ablation_matrix(const Dataset& data, const TrainConfig& base_config);

void write_train_log_csv(const TrainLog& log, const std::string& path);
void write_ablation_csv(std::span<const AblationRow> rows, const std::string& path);

}  // namespace tce
