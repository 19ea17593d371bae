#pragma once

#include <span>
#include <vector>

#include "tce/rng.hpp"
#include "tce/tensor.hpp"

namespace tce {

// Minimal reverse-mode differentiation for fixed small feed-forward nets:
// dense layers with identity/ReLU/softmax activations, a fused softmax
// cross-entropy, euclidean distance, variance, and Adam. Not a general
// autodiff graph; every consumer wires gradients by hand through these
// primitives.

enum class Activation { Identity, Relu, Softmax };

struct DenseLayer {
    Mat weight;  // [out_dim x in_dim]
    Vec bias;    // [out_dim]

    int in_dim() const { return weight.cols; }
    int out_dim() const { return weight.rows; }
};

struct Mlp {
    std::vector<DenseLayer> layers;
    std::vector<Activation> activations;  // one per layer; Softmax only last

    int in_dim() const { return layers.front().in_dim(); }
    int out_dim() const { return layers.back().out_dim(); }
    /// Throws ShapeError if layer dims do not chain or a softmax appears
    /// before the final layer.
    void validate() const;
};

/// Activation record from one forward pass; required by mlp_backward.
struct MlpTape {
    Vec input;
    std::vector<Vec> pre;   // pre-activation per layer
    std::vector<Vec> post;  // post-activation per layer
    bool valid = false;
};

/// Per-parameter gradients mirroring an Mlp's layer shapes. Backward calls
/// accumulate, so one MlpGrads can collect a whole batch.
struct MlpGrads {
    std::vector<Mat> weight;
    std::vector<Vec> bias;

    static MlpGrads zeros_like(const Mlp& net);
};

/// Forward pass. When `tape` is non-null it is filled so that mlp_backward
/// can replay the exact reverse-mode computation.
Vec mlp_forward(const Mlp& net, std::span<const double> input, MlpTape* tape = nullptr);

/// Reverse-mode gradients of the forward map recorded in `tape`.
/// Parameter gradients are accumulated into `grads` (scaled by `scale`);
/// the return value is the gradient with respect to the input.
Vec mlp_backward(const Mlp& net, const MlpTape& tape, std::span<const double> upstream,
                 MlpGrads& grads, double scale = 1.0);

Vec softmax(std::span<const double> logits);

struct CrossEntropyResult {
    double loss = 0.0;
    Vec grad;  // softmax(logits) - onehot(label)
};
/// Numerically stabilized -log softmax(logits)[label] with its gradient.
CrossEntropyResult softmax_cross_entropy(std::span<const double> logits, int label);

struct DistanceResult {
    double d = 0.0;
    Vec du;  // (u - v) / d, zero at coincident points
    Vec dv;
};
DistanceResult euclidean_distance(std::span<const double> u, std::span<const double> v);
double euclidean_distance_value(std::span<const double> u, std::span<const double> v);

struct VarianceResult {
    double var = 0.0;
    Vec grads;  // 2 (v_i - mean) / N
};
/// Population variance (divide by N) of `values`; requires length >= 2.
VarianceResult variance(std::span<const double> values);

/// Bias-corrected Adam state for one parameter tensor. Each tensor carries
/// its own state so parameter groups can use different learning rates
/// (the attribute embedding table trains on its own rate).
struct AdamState {
    Vec first_moment;
    Vec second_moment;
    long step_count = 0;
    double lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // L2 added to the gradient before moments

    AdamState(std::size_t n, double learning_rate)
        : first_moment(n, 0.0), second_moment(n, 0.0), lr(learning_rate) {}
};

/// One bias-corrected Adam update. Throws ShapeError on size mismatch and
/// NumericError if any gradient entry is non-finite.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// Builds an MLP with the given layer dims ([in, h1, ..., out]) and one
/// activation per layer. Weights are uniform in +-sqrt(6/(in+out)), biases 0.
Mlp make_mlp(std::span<const int> dims, std::span<const Activation> acts, Rng& rng);

}  // namespace tce
