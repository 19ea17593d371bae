#include "tce/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tce {

HingeResult triplet_hinge(double d_pos, double d_neg, double margin) {
    double v = d_pos - d_neg + margin;
    if (v > 0.0) return {v, true};
    return {0.0, false};
}

ObjectPrototypeLoss object_prototype_loss(const TceParams& p, std::span<const double> proto,
                                          std::span<const double> proto_neg, std::span<const double> x,
                                          int obj_label, double margin, double weight, TceGrads* grads) {
    const int d = p.dims.latent_dim;
    require_shape(static_cast<int>(proto.size()) == d && static_cast<int>(proto_neg.size()) == d &&
                      static_cast<int>(x.size()) == d,
                  "object_prototype_loss: latent dim mismatch");
    ObjectPrototypeLoss out;
    out.d_x.assign(d, 0.0);
    out.d_proto.assign(d, 0.0);
    out.d_proto_neg.assign(d, 0.0);

    MlpTape head_tape;
    Vec logits = mlp_forward(p.head_obj_proto, proto, &head_tape);
    auto ce = softmax_cross_entropy(logits, obj_label);
    out.cls_term = ce.loss;
    if (grads) {
        Vec d_proto_ce = mlp_backward(p.head_obj_proto, head_tape, ce.grad, grads->head_obj_proto, weight);
        axpy(out.d_proto, d_proto_ce, weight);
    }

    auto pos = euclidean_distance(x, proto);
    auto neg = euclidean_distance(x, proto_neg);
    auto hinge = triplet_hinge(pos.d, neg.d, margin);
    out.tri_term = hinge.value;
    if (hinge.active) {
        axpy(out.d_x, pos.du, weight);
        axpy(out.d_x, neg.du, -weight);
        axpy(out.d_proto, pos.dv, weight);
        axpy(out.d_proto_neg, neg.dv, -weight);
    }
    out.value = out.cls_term + out.tri_term;
    return out;
}

ConceptClassLoss concept_class_loss(const TceParams& p, std::span<const double> embedding, int attr_label,
                                    int obj_label, double weight, TceGrads* grads) {
    ConceptClassLoss out;
    out.d_embedding.assign(embedding.size(), 0.0);

    MlpTape attr_tape, obj_tape;
    Vec attr_logits = mlp_forward(p.head_attr, embedding, &attr_tape);
    Vec obj_logits = mlp_forward(p.head_obj, embedding, &obj_tape);
    auto ce_a = softmax_cross_entropy(attr_logits, attr_label);
    auto ce_o = softmax_cross_entropy(obj_logits, obj_label);
    out.value = ce_a.loss + ce_o.loss;
    if (grads) {
        Vec da = mlp_backward(p.head_attr, attr_tape, ce_a.grad, grads->head_attr, weight);
        Vec dz = mlp_backward(p.head_obj, obj_tape, ce_o.grad, grads->head_obj, weight);
        axpy(out.d_embedding, da, weight);
        axpy(out.d_embedding, dz, weight);
    }
    return out;
}

ConceptTripletLoss concept_triplet_loss(std::span<const double> x, std::span<const double> emb_pos,
                                        std::span<const double> emb_neg, double margin, double weight) {
    ConceptTripletLoss out;
    out.d_x.assign(x.size(), 0.0);
    out.d_pos.assign(emb_pos.size(), 0.0);
    out.d_neg.assign(emb_neg.size(), 0.0);

    auto pos = euclidean_distance(x, emb_pos);
    auto neg = euclidean_distance(x, emb_neg);
    auto hinge = triplet_hinge(pos.d, neg.d, margin);
    out.value = hinge.value;
    if (hinge.active) {
        axpy(out.d_x, pos.du, weight);
        axpy(out.d_x, neg.du, -weight);
        axpy(out.d_pos, pos.dv, weight);
        axpy(out.d_neg, neg.dv, -weight);
    }
    return out;
}

ReconstructionLoss reconstruction_loss(std::span<const double> x, std::span<const double> embedding,
                                       double weight) {
    ReconstructionLoss out;
    auto dist = euclidean_distance(x, embedding);
    out.value = dist.d;
    out.d_x = std::move(dist.du);
    out.d_embedding = std::move(dist.dv);
    for (double& v : out.d_x) v *= weight;
    for (double& v : out.d_embedding) v *= weight;
    return out;
}

double concept_loss(double cls_term, double tri_term, double rec_term, const LossWeights& w) {
    return w.lambda_cls * cls_term + w.lambda_tri * tri_term + w.lambda_rec * rec_term;
}

RvcResult rvc_loss(const TceParams& p, const ConceptSpace& space, const LossWeights& w,
                   std::uint64_t seed, double weight, TceGrads* grads, const Mat* frozen_attr,
                   const Mat* frozen_obj) {
    const std::vector<ConceptId> pool =
        w.rvc_include_unseen ? space.all_concepts() : space.seen;
    require(pool.size() >= 2, "rvc_loss: need at least 2 concepts");
    require(w.rvc_pairs >= 1, "rvc_loss: rvc_pairs must be positive");
    if ((frozen_attr == nullptr) != (frozen_obj == nullptr))
        throw PreconditionError("rvc_loss: frozen tables must be given together");
    const Mat& attr_sem = frozen_attr ? *frozen_attr : p.attr_table;
    const Mat& obj_sem = frozen_obj ? *frozen_obj : p.obj_table;
    const bool sem_trainable = (frozen_attr == nullptr) && !w.rvc_frozen_semantics;

    auto semantic = [&](const ConceptId& c) {
        return concept_semantic(attr_sem.row(c.first), obj_sem.row(c.second));
    };

    // Sample pairs, redrawing any with near-zero semantic distance.
    Rng rng(seed);
    const int k = static_cast<int>(pool.size());
    struct Pair {
        int i, j;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>(w.rvc_pairs));
    int attempts = 0;
    const int max_attempts = w.rvc_pairs * 100 + 1000;
    while (static_cast<int>(pairs.size()) < w.rvc_pairs) {
        if (++attempts > max_attempts)
            throw PreconditionError("rvc_loss: could not sample pairs with nonzero semantic distance");
        int i = rng.uniform_int(0, k - 1);
        int j = rng.uniform_int(0, k - 2);
        if (j >= i) ++j;
        Vec ei = semantic(pool[i]);
        Vec ej = semantic(pool[j]);
        if (euclidean_distance_value(ei, ej) < 1e-8) continue;
        pairs.push_back({i, j});
    }

    // Build each used concept embedding once, in order of first use.
    std::map<int, int> local;  // pool index -> forward slot
    std::vector<ConceptForward> forwards;
    auto slot = [&](int pool_idx) {
        auto it = local.find(pool_idx);
        if (it != local.end()) return it->second;
        int s = static_cast<int>(forwards.size());
        forwards.push_back(forward_concept(p, pool[pool_idx].first, pool[pool_idx].second));
        local.emplace(pool_idx, s);
        return s;
    };

    struct PairData {
        int si, sj;
        DistanceResult lat;
        DistanceResult sem;
        double ratio;
    };
    std::vector<PairData> data;
    data.reserve(pairs.size());
    Vec ratios;
    ratios.reserve(pairs.size());
    for (const auto& pr : pairs) {
        PairData d;
        d.si = slot(pr.i);
        d.sj = slot(pr.j);
        d.lat = euclidean_distance(forwards[d.si].embedding, forwards[d.sj].embedding);
        Vec ei = semantic(pool[pr.i]);
        Vec ej = semantic(pool[pr.j]);
        d.sem = euclidean_distance(ei, ej);
        d.ratio = d.lat.d / d.sem.d;
        ratios.push_back(d.ratio);
        data.push_back(std::move(d));
    }

    auto var = variance(ratios);
    RvcResult out;
    out.variance = var.var;
    out.pairs = static_cast<int>(pairs.size());
    out.value = std::max(0.0, var.var - w.margin_ratio);

    if (out.value > 0.0 && grads) {
        const int d_lat = p.dims.latent_dim;
        std::vector<Vec> emb_grads(forwards.size(), Vec(static_cast<std::size_t>(d_lat), 0.0));
        for (std::size_t idx = 0; idx < data.size(); ++idx) {
            const auto& pd = data[idx];
            const double dl_dr = var.grads[idx];
            const double dl_dlat = dl_dr / pd.sem.d;
            axpy(emb_grads[pd.si], pd.lat.du, weight * dl_dlat);
            axpy(emb_grads[pd.sj], pd.lat.dv, weight * dl_dlat);
            if (sem_trainable) {
                const double dl_dsem = -dl_dr * pd.ratio / pd.sem.d;
                const auto& ci = pool[pairs[idx].i];
                const auto& cj = pool[pairs[idx].j];
                // e_c = e_a + e_o: the same gradient lands on both rows
                axpy_row(grads->attr_table, ci.first, pd.sem.du, weight * dl_dsem);
                axpy_row(grads->obj_table, ci.second, pd.sem.du, weight * dl_dsem);
                axpy_row(grads->attr_table, cj.first, pd.sem.dv, weight * dl_dsem);
                axpy_row(grads->obj_table, cj.second, pd.sem.dv, weight * dl_dsem);
            }
        }
        for (std::size_t s = 0; s < forwards.size(); ++s)
            backward_concept(p, forwards[s], emb_grads[s], {}, *grads, 1.0);
    }
    return out;
}

void total_loss(LossBreakdown& breakdown, const LossWeights& w) {
    breakdown.total = breakdown.weighted_total(w);
}

LossBreakdown tce_batch_loss(const TceParams& p, const ConceptSpace& space,
                             std::span<const BatchSample> batch, const LossWeights& w,
                             std::uint64_t rvc_seed, TceGrads* grads, const Mat* frozen_attr,
                             const Mat* frozen_obj) {
    require(!batch.empty(), "tce_batch_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const int d = p.dims.latent_dim;
    const bool need_concept = w.lambda_cls > 0 || w.lambda_tri > 0 || w.lambda_rec > 0;
    const bool need_image = w.lambda_op > 0 || w.lambda_tri > 0 || w.lambda_rec > 0;

    LossBreakdown bd;
    for (const auto& s : batch) {
        MlpTape img_tape;
        Vec x;
        if (need_image) x = image_embed(p, s.feature, &img_tape);

        std::optional<ConceptForward> cf;
        std::optional<PrototypeForward> pf;
        const Vec* proto = nullptr;
        if (need_concept) {
            cf.emplace(forward_concept(p, s.attr, s.obj));
            proto = &cf->proto.proto;
        } else if (w.lambda_op > 0) {
            pf.emplace(object_prototype(p, s.obj));
            proto = &pf->proto;
        }

        Vec g_x(static_cast<std::size_t>(d), 0.0);
        Vec g_emb(static_cast<std::size_t>(d), 0.0);
        Vec g_proto(static_cast<std::size_t>(d), 0.0);

        if (w.lambda_op > 0) {
            PrototypeForward pf_neg = object_prototype(p, s.neg_obj);
            auto op = object_prototype_loss(p, *proto, pf_neg.proto, x, s.obj, w.margin_obj,
                                            w.lambda_op * inv_b, grads);
            bd.obj_cls += op.cls_term * inv_b;
            bd.obj_tri += op.tri_term * inv_b;
            axpy(g_x, op.d_x, 1.0);
            axpy(g_proto, op.d_proto, 1.0);
            if (grads) backward_prototype(p, pf_neg, op.d_proto_neg, *grads, 1.0);
        }
        if (w.lambda_cls > 0) {
            auto cl = concept_class_loss(p, cf->embedding, s.attr, s.obj, w.lambda_cls * inv_b, grads);
            bd.cls += cl.value * inv_b;
            axpy(g_emb, cl.d_embedding, 1.0);
        }
        if (w.lambda_tri > 0) {
            ConceptForward cf_neg = forward_concept(p, s.neg_concept.first, s.neg_concept.second);
            auto tl = concept_triplet_loss(x, cf->embedding, cf_neg.embedding, w.margin_concept,
                                           w.lambda_tri * inv_b);
            bd.tri += tl.value * inv_b;
            axpy(g_x, tl.d_x, 1.0);
            axpy(g_emb, tl.d_pos, 1.0);
            if (grads) backward_concept(p, cf_neg, tl.d_neg, {}, *grads, 1.0);
        }
        if (w.lambda_rec > 0) {
            auto rl = reconstruction_loss(x, cf->embedding, w.lambda_rec * inv_b);
            bd.rec += rl.value * inv_b;
            axpy(g_x, rl.d_x, 1.0);
            axpy(g_emb, rl.d_embedding, 1.0);
        }

        if (grads) {
            if (cf)
                backward_concept(p, *cf, g_emb, g_proto, *grads, 1.0);
            else if (pf)
                backward_prototype(p, *pf, g_proto, *grads, 1.0);
            if (need_image) backward_image(p, img_tape, g_x, *grads, 1.0);
        }
    }

    if (w.lambda_rvc > 0) {
        auto rv = rvc_loss(p, space, w, rvc_seed, w.lambda_rvc, grads, frozen_attr, frozen_obj);
        bd.rvc = rv.value;
    }
    total_loss(bd, w);
    return bd;
}

VisProdGrads VisProdGrads::zeros_like(const VisProdParams& p) {
    return {MlpGrads::zeros_like(p.attr_net), MlpGrads::zeros_like(p.obj_net)};
}

std::vector<TensorView> tensor_views(VisProdGrads& g) {
    std::vector<TensorView> out;
    for (std::size_t i = 0; i < g.attr_net.weight.size(); ++i) {
        out.push_back({"attr_net.w" + std::to_string(i), g.attr_net.weight[i].rows,
                       g.attr_net.weight[i].cols, g.attr_net.weight[i].a.data()});
        out.push_back({"attr_net.b" + std::to_string(i), 1, static_cast<int>(g.attr_net.bias[i].size()),
                       g.attr_net.bias[i].data()});
    }
    for (std::size_t i = 0; i < g.obj_net.weight.size(); ++i) {
        out.push_back({"obj_net.w" + std::to_string(i), g.obj_net.weight[i].rows,
                       g.obj_net.weight[i].cols, g.obj_net.weight[i].a.data()});
        out.push_back({"obj_net.b" + std::to_string(i), 1, static_cast<int>(g.obj_net.bias[i].size()),
                       g.obj_net.bias[i].data()});
    }
    return out;
}

LossBreakdown visprod_batch_loss(const VisProdParams& p, std::span<const BatchSample> batch,
                                 VisProdGrads* grads) {
    require(!batch.empty(), "visprod_batch_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    LossBreakdown bd;
    for (const auto& s : batch) {
        MlpTape attr_tape, obj_tape;
        Vec attr_logits = mlp_forward(p.attr_net, s.feature, &attr_tape);
        Vec obj_logits = mlp_forward(p.obj_net, s.feature, &obj_tape);
        auto ce_a = softmax_cross_entropy(attr_logits, s.attr);
        auto ce_o = softmax_cross_entropy(obj_logits, s.obj);
        bd.cls += (ce_a.loss + ce_o.loss) * inv_b;
        if (grads) {
            mlp_backward(p.attr_net, attr_tape, ce_a.grad, grads->attr_net, inv_b);
            mlp_backward(p.obj_net, obj_tape, ce_o.grad, grads->obj_net, inv_b);
        }
    }
    bd.total = bd.cls;
    return bd;
}

LabelEmbedGrads LabelEmbedGrads::zeros_like(const LabelEmbedParams& p) {
    LabelEmbedGrads g;
    g.image_mapper = MlpGrads::zeros_like(p.image_mapper);
    g.embedder = MlpGrads::zeros_like(p.embedder);
    g.attr_table = Mat(p.attr_table.rows, p.attr_table.cols);
    g.obj_table = Mat(p.obj_table.rows, p.obj_table.cols);
    return g;
}

std::vector<TensorView> tensor_views(LabelEmbedGrads& g) {
    std::vector<TensorView> out;
    for (std::size_t i = 0; i < g.image_mapper.weight.size(); ++i) {
        out.push_back({"image_mapper.w" + std::to_string(i), g.image_mapper.weight[i].rows,
                       g.image_mapper.weight[i].cols, g.image_mapper.weight[i].a.data()});
        out.push_back({"image_mapper.b" + std::to_string(i), 1,
                       static_cast<int>(g.image_mapper.bias[i].size()), g.image_mapper.bias[i].data()});
    }
    for (std::size_t i = 0; i < g.embedder.weight.size(); ++i) {
        out.push_back({"embedder.w" + std::to_string(i), g.embedder.weight[i].rows,
                       g.embedder.weight[i].cols, g.embedder.weight[i].a.data()});
        out.push_back({"embedder.b" + std::to_string(i), 1, static_cast<int>(g.embedder.bias[i].size()),
                       g.embedder.bias[i].data()});
    }
    out.push_back({"attr_table", g.attr_table.rows, g.attr_table.cols, g.attr_table.a.data()});
    out.push_back({"obj_table", g.obj_table.rows, g.obj_table.cols, g.obj_table.a.data()});
    return out;
}

LossBreakdown labelembed_batch_loss(const LabelEmbedParams& p, std::span<const BatchSample> batch,
                                    double margin, LabelEmbedGrads* grads) {
    require(!batch.empty(), "labelembed_batch_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const int wd = p.word_dim;
    LossBreakdown bd;
    for (const auto& s : batch) {
        MlpTape img_tape, pos_tape, neg_tape;
        Vec x = mlp_forward(p.image_mapper, s.feature, &img_tape);
        Vec pos = labelembed_forward(p, s.attr, s.obj, &pos_tape);
        Vec neg = labelembed_forward(p, s.neg_concept.first, s.neg_concept.second, &neg_tape);
        auto tl = concept_triplet_loss(x, pos, neg, margin, inv_b);
        bd.tri += tl.value * inv_b;
        if (grads) {
            mlp_backward(p.image_mapper, img_tape, tl.d_x, grads->image_mapper, 1.0);
            Vec d_pos_in = mlp_backward(p.embedder, pos_tape, tl.d_pos, grads->embedder, 1.0);
            axpy_row(grads->attr_table, s.attr, std::span<const double>(d_pos_in).first(wd), 1.0);
            axpy_row(grads->obj_table, s.obj, std::span<const double>(d_pos_in).subspan(wd), 1.0);
            Vec d_neg_in = mlp_backward(p.embedder, neg_tape, tl.d_neg, grads->embedder, 1.0);
            axpy_row(grads->attr_table, s.neg_concept.first, std::span<const double>(d_neg_in).first(wd), 1.0);
            axpy_row(grads->obj_table, s.neg_concept.second, std::span<const double>(d_neg_in).subspan(wd), 1.0);
        }
    }
    bd.total = bd.tri;
    return bd;
}

}  // namespace tce
