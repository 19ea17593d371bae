#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tce/embedspace.hpp"

namespace tce {

enum class Split { Train = 0, Val = 1, Test = 2 };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct DataSample {
    Vec feature;
    int attr = -1;
    int obj = -1;
    Split split = Split::Train;
};

/// Ground-truth generative parameters of a synthetic dataset, retained for
/// oracle evaluation. Feature law:
///   mu_o + (1 - context_strength) * tau_a + context_strength * delta_{a,o} + noise
struct SynthTruth {
    Mat object_centers;       // n x F  (mu_o)
    Mat attribute_dirs;       // m x F  (tau_a)
    Mat context_offsets;      // (m*n) x F, row a*n+o  (delta_{a,o})
    double noise_sigma = 0.0;
    double context_strength = 0.0;

    Vec concept_mean(int attr, int obj) const;
};

/// Immutable sample store. Per-split read counters support the trainer's
/// data-isolation accounting (gradient computation must never touch
/// val/test features).
struct Dataset {
    ConceptSpace space;
    int feature_dim = 0;
    std::vector<DataSample> samples;
    std::optional<SynthTruth> truth;

    const DataSample& sample(std::size_t i) const {
        const auto& s = samples.at(i);
        ++reads_[static_cast<int>(s.split)];
        return s;
    }
    std::vector<int> split_indices(Split s) const;
    std::array<std::size_t, 3> read_counts() const { return reads_; }

    /// Train concepts must be seen; nonempty val/test must mix seen and
    /// unseen concepts. Throws ValidationError on violation.
    void validate() const;

private:
    mutable std::array<std::size_t, 3> reads_{0, 0, 0};
};

struct SynthSpec {
    int num_attrs = 16;
    int num_objs = 12;
    int feature_dim = 64;
    double seen_fraction = 0.6;
    int train_per_concept = 50;  // per seen concept
    int val_per_concept = 10;    // per concept, seen and unseen
    int test_per_concept = 10;
    double noise_sigma = 0.3;
    double context_strength = 0.8;  // 0 = global attribute offsets, 1 = fully contextual
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministic synthetic compositional dataset. Attribute effects are
/// additive offsets on object centers, blended between a global direction
/// and an object-specific one by context_strength, so composition is in
/// the model's hypothesis class while plain per-label classifiers degrade
/// as context_strength grows.
Dataset generate_synthetic(const SynthSpec& spec);

struct OracleAccuracy {
    double closed_unseen = 0.0;  // percent
    double open_unseen = 0.0;
    double open_seen = 0.0;
};
/// Nearest ground-truth concept mean (the Bayes rule under isotropic
/// noise); upper-bounds any learned model on the same data. Requires a
/// synthetic dataset carrying its truth.
OracleAccuracy bayes_oracle_accuracy(const Dataset& data, Split split);

/// Text manifest (header + CSV rows) or binary variant (header with
/// `encoding: bin` + `data:` sidecar of f32 rows). See README for the
/// exact grammar.
void save_dataset(const Dataset& data, const std::string& manifest_path, bool binary = false);
Dataset load_feature_dataset(const std::string& manifest_path);

struct NegativeSamples {
    std::vector<int> neg_obj;              // ō != o
    std::vector<ConceptId> neg_concept;    // c̄ ∈ seen, c̄ != c
};
/// Uniform negatives for each (attr, obj) label pair, deterministic given
/// the rng state.
NegativeSamples sample_negatives(std::span<const ConceptId> labels, const ConceptSpace& space, Rng& rng);

}  // namespace tce
