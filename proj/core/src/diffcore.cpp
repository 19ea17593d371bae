#include "tce/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tce {

void Mlp::validate() const {
    require_shape(!layers.empty() && layers.size() == activations.size(),
                  "Mlp: layers/activations size mismatch");
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        require_shape(layers[i].out_dim() == layers[i + 1].in_dim(),
                      "Mlp: layer dims do not chain at layer " + std::to_string(i));
        require_shape(activations[i] != Activation::Softmax,
                      "Mlp: softmax allowed only as the final activation");
    }
    for (const auto& l : layers) {
        require_shape(l.weight.rows == static_cast<int>(l.bias.size()),
                      "Mlp: weight/bias dim mismatch");
    }
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
    MlpGrads g;
    g.weight.reserve(net.layers.size());
    g.bias.reserve(net.layers.size());
    for (const auto& l : net.layers) {
        g.weight.emplace_back(l.weight.rows, l.weight.cols);
        g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

Vec mlp_forward(const Mlp& net, std::span<const double> input, MlpTape* tape) {
    require_shape(static_cast<int>(input.size()) == net.in_dim(),
                  "mlp_forward: input dim " + std::to_string(input.size()) + " != " +
                      std::to_string(net.in_dim()));
    if (tape) {
        tape->input.assign(input.begin(), input.end());
        tape->pre.clear();
        tape->post.clear();
        tape->valid = true;
    }
    Vec x(input.begin(), input.end());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Vec pre = matvec(net.layers[i].weight, x);
        for (std::size_t j = 0; j < pre.size(); ++j) pre[j] += net.layers[i].bias[j];
        Vec post;
        switch (net.activations[i]) {
            case Activation::Identity:
                post = pre;
                break;
            case Activation::Relu:
                post = pre;
                for (double& v : post) v = v > 0.0 ? v : 0.0;
                break;
            case Activation::Softmax:
                post = softmax(pre);
                break;
        }
        if (tape) {
            tape->pre.push_back(pre);
            tape->post.push_back(post);
        }
        x = std::move(post);
    }
    return x;
}

Vec mlp_backward(const Mlp& net, const MlpTape& tape, std::span<const double> upstream,
                 MlpGrads& grads, double scale) {
    require(tape.valid && tape.pre.size() == net.layers.size(),
            "mlp_backward: tape missing or not produced by this net");
    require_shape(static_cast<int>(upstream.size()) == net.out_dim(),
                  "mlp_backward: upstream dim mismatch");
    require_shape(grads.weight.size() == net.layers.size(), "mlp_backward: grads shape mismatch");

    Vec delta(upstream.begin(), upstream.end());
    for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
        // activation backward
        switch (net.activations[i]) {
            case Activation::Identity:
                break;
            case Activation::Relu:
                for (std::size_t j = 0; j < delta.size(); ++j)
                    if (tape.pre[i][j] <= 0.0) delta[j] = 0.0;
                break;
            case Activation::Softmax: {
                // J = diag(p) - p p^T
                const Vec& p = tape.post[i];
                double pd = dot(p, delta);
                for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = p[j] * (delta[j] - pd);
                break;
            }
        }
        const Vec& layer_in = (i == 0) ? tape.input : tape.post[i - 1];
        add_outer(grads.weight[i], delta, layer_in, scale);
        axpy(grads.bias[i], delta, scale);
        if (i > 0) delta = matvec_transposed(net.layers[i].weight, delta);
    }
    return matvec_transposed(net.layers[0].weight, delta);
}

Vec softmax(std::span<const double> logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    Vec p(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        denom += p[i];
    }
    for (double& v : p) v /= denom;
    return p;
}

CrossEntropyResult softmax_cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw IndexError("softmax_cross_entropy: label " + std::to_string(label) +
                         " out of range for " + std::to_string(logits.size()) + " classes");
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    Vec p(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        denom += p[i];
    }
    CrossEntropyResult out;
    out.loss = std::log(denom) - (logits[label] - mx);
    out.grad = std::move(p);
    for (double& v : out.grad) v /= denom;
    out.grad[label] -= 1.0;
    return out;
}

DistanceResult euclidean_distance(std::span<const double> u, std::span<const double> v) {
    require_shape(u.size() == v.size(), "euclidean_distance: dim mismatch");
    DistanceResult out;
    out.du.resize(u.size());
    out.dv.resize(u.size());
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double diff = u[i] - v[i];
        out.du[i] = diff;
        s += diff * diff;
    }
    out.d = std::sqrt(s);
    if (out.d > 0.0) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            out.du[i] /= out.d;
            out.dv[i] = -out.du[i];
        }
    } else {
        // gradient defined as zero at coincident points
        std::fill(out.du.begin(), out.du.end(), 0.0);
        std::fill(out.dv.begin(), out.dv.end(), 0.0);
    }
    return out;
}

double euclidean_distance_value(std::span<const double> u, std::span<const double> v) {
    require_shape(u.size() == v.size(), "euclidean_distance: dim mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double diff = u[i] - v[i];
        s += diff * diff;
    }
    return std::sqrt(s);
}

VarianceResult variance(std::span<const double> values) {
    require(values.size() >= 2, "variance: need at least 2 values");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    VarianceResult out;
    out.grads.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        double dev = values[i] - mean;
        out.var += dev * dev;
        out.grads[i] = 2.0 * dev / n;
    }
    out.var /= n;
    return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    require_shape(params.size() == grads.size() && params.size() == state.first_moment.size(),
                  "adam_step: shape mismatch");
    if (!all_finite(grads)) throw NumericError("adam_step: non-finite gradient");
    state.step_count += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i] + state.weight_decay * params[i];
        state.first_moment[i] = b1 * state.first_moment[i] + (1.0 - b1) * g;
        state.second_moment[i] = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        double mhat = state.first_moment[i] / bc1;
        double vhat = state.second_moment[i] / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

Mlp make_mlp(std::span<const int> dims, std::span<const Activation> acts, Rng& rng) {
    require_shape(dims.size() >= 2 && acts.size() == dims.size() - 1,
                  "make_mlp: need dims [in,...,out] and one activation per layer");
    Mlp net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        DenseLayer l;
        l.weight = Mat(dims[i + 1], dims[i]);
        l.bias.assign(static_cast<std::size_t>(dims[i + 1]), 0.0);
        double bound = std::sqrt(6.0 / (dims[i] + dims[i + 1]));
        for (double& w : l.weight.a) w = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(l));
        net.activations.push_back(acts[i]);
    }
    net.validate();
    return net;
}

}  // namespace tce
