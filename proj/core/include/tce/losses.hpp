#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "tce/tcemodel.hpp"

namespace tce {

/// Loss weights and margins. Defaults: m_o=0, m_c=0.5, m_r=5,
/// lambda_op=lambda_rec=lambda_tri=1, lambda_rvc=0.01; lambda_cls is
/// dataset-dependent (1000 or 1). A term with weight 0 is skipped entirely.
struct LossWeights {
    double lambda_cls = 1.0;
    double lambda_tri = 1.0;
    double lambda_rec = 1.0;
    double lambda_op = 1.0;
    double lambda_rvc = 0.01;
    double margin_obj = 0.0;      // m_o
    double margin_concept = 0.5;  // m_c
    double margin_ratio = 5.0;    // m_r
    int rvc_pairs = 100;
    bool rvc_include_unseen = false;
    bool rvc_frozen_semantics = false;
};

/// Unweighted per-term batch means plus the weighted total.
struct LossBreakdown {
    double obj_cls = 0.0;  // cross-entropy on the object prototype head
    double obj_tri = 0.0;  // prototype triplet hinge
    double cls = 0.0;      // attribute + object CE on the composed embedding
    double tri = 0.0;      // concept triplet hinge
    double rec = 0.0;      // reconstruction distance
    double rvc = 0.0;      // ratio variance hinge (one estimate per batch)
    double total = 0.0;

    /// total recomputed from the terms; equals `total` by construction.
    double weighted_total(const LossWeights& w) const {
        return w.lambda_cls * cls + w.lambda_tri * tri + w.lambda_rec * rec +
               w.lambda_op * (obj_cls + obj_tri) + w.lambda_rvc * rvc;
    }
};

struct HingeResult {
    double value = 0.0;
    bool active = false;  // gradient gate: value > 0
};
/// max(0, d_pos - d_neg + margin).
HingeResult triplet_hinge(double d_pos, double d_neg, double margin);

// Op-level losses. Each returns its unweighted value plus latent-space
// gradients already multiplied by `weight`; gradients of classifier-head
// parameters are accumulated into `grads` (also times `weight`). The
// caller pushes the latent gradients through the network tapes once.

struct ObjectPrototypeLoss {
    double cls_term = 0.0;  // CrossEntropy(h^o_o(x̂_o), o)
    double tri_term = 0.0;  // max(0, d(x, x̂_o) - d(x, x̂_ō) + m_o)
    double value = 0.0;     // cls_term + tri_term
    Vec d_x, d_proto, d_proto_neg;
};
ObjectPrototypeLoss object_prototype_loss(const TceParams& p, std::span<const double> proto,
                                          std::span<const double> proto_neg, std::span<const double> x,
                                          int obj_label, double margin, double weight, TceGrads* grads);

struct ConceptClassLoss {
    double value = 0.0;
    Vec d_embedding;
};
/// CE(h^c_a(x̂_ao), a) + CE(h^c_o(x̂_ao), o).
ConceptClassLoss concept_class_loss(const TceParams& p, std::span<const double> embedding, int attr_label,
                                    int obj_label, double weight, TceGrads* grads);

struct ConceptTripletLoss {
    double value = 0.0;
    Vec d_x, d_pos, d_neg;
};
/// max(0, d(x, x̂_ao) - d(x, x̂_c̄) + m_c).
ConceptTripletLoss concept_triplet_loss(std::span<const double> x, std::span<const double> emb_pos,
                                        std::span<const double> emb_neg, double margin, double weight);

struct ReconstructionLoss {
    double value = 0.0;
    Vec d_x, d_embedding;
};
/// d(x, x̂_ao) — the euclidean distance itself, not squared.
ReconstructionLoss reconstruction_loss(std::span<const double> x, std::span<const double> embedding,
                                       double weight);

/// L_conc = λ_cls·cls + λ_tri·tri + λ_rec·rec.
double concept_loss(double cls_term, double tri_term, double rec_term, const LossWeights& w);

struct RvcResult {
    double value = 0.0;     // max(0, var - m_r)
    double variance = 0.0;  // variance of the sampled ratios
    int pairs = 0;
};
/// Ratio variance constraint over randomly sampled concept pairs:
/// ratios d(x̂_ci, x̂_cj) / d(e_ci, e_cj) with e_c = e_a + e_o. Pairs come
/// from the seen concepts unless rvc_include_unseen is set; pairs whose
/// semantic distance falls below 1e-8 are redrawn. Deterministic given
/// `seed`. When frozen semantic tables are supplied they replace the live
/// ones and receive no gradient.
RvcResult rvc_loss(const TceParams& p, const ConceptSpace& space, const LossWeights& w,
                   std::uint64_t seed, double weight, TceGrads* grads,
                   const Mat* frozen_attr = nullptr, const Mat* frozen_obj = nullptr);

/// Fills breakdown.total from the per-term values: L = L_conc + λ_op·L_op
/// + λ_rvc·L_rvc.
void total_loss(LossBreakdown& breakdown, const LossWeights& w);

// ---- batch assembly ---------------------------------------------------------

struct BatchSample {
    std::span<const double> feature;
    int attr = -1;
    int obj = -1;
    int neg_obj = -1;          // for the object prototype triplet
    ConceptId neg_concept{-1, -1};  // seen concept != (attr, obj)
};

/// Mean loss over the batch with one RVC estimate; exact reverse-mode
/// gradients of the weighted total accumulate into `grads` when non-null.
/// Terms with zero weight are skipped and report 0.
LossBreakdown tce_batch_loss(const TceParams& p, const ConceptSpace& space,
                             std::span<const BatchSample> batch, const LossWeights& w,
                             std::uint64_t rvc_seed, TceGrads* grads,
                             const Mat* frozen_attr = nullptr, const Mat* frozen_obj = nullptr);

struct VisProdGrads {
    MlpGrads attr_net, obj_net;
    static VisProdGrads zeros_like(const VisProdParams& p);
};
std::vector<TensorView> tensor_views(VisProdGrads& g);

/// Mean CE(attr) + CE(obj) on raw features.
LossBreakdown visprod_batch_loss(const VisProdParams& p, std::span<const BatchSample> batch,
                                 VisProdGrads* grads);

struct LabelEmbedGrads {
    MlpGrads image_mapper, embedder;
    Mat attr_table, obj_table;
    static LabelEmbedGrads zeros_like(const LabelEmbedParams& p);
};
std::vector<TensorView> tensor_views(LabelEmbedGrads& g);

/// Triplet margin loss between the mapped image and positive/negative
/// concept embeddings.
LossBreakdown labelembed_batch_loss(const LabelEmbedParams& p, std::span<const BatchSample> batch,
                                    double margin, LabelEmbedGrads* grads);

}  // namespace tce
