#include "tce/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace tce {

void TrainConfig::validate() const {
    if (max_epochs < 1) throw ConfigError("TrainConfig: max_epochs must be positive");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be positive");
    if (lr_main < 0 || lr_attr_table < 0) throw ConfigError("TrainConfig: learning rates must be >= 0");
    if (eval_every < 0) throw ConfigError("TrainConfig: eval_every must be >= 0");
    if (dims.latent_dim < 1 || dims.word_dim < 1) throw ConfigError("TrainConfig: dims must be positive");
}

namespace {

struct Optimizer {
    std::vector<AdamState> states;

    Optimizer(std::vector<TensorView> views, const TrainConfig& cfg, ModelKind kind) {
        const double wd = cfg.weight_decay.value_or(kind == ModelKind::Tce ? 0.0 : 5e-5);
        for (auto& v : views) {
            double lr = cfg.lr_main;
            if (kind == ModelKind::Tce && v.name == "attr_table") lr = cfg.lr_attr_table;
            AdamState st(v.flat().size(), lr);
            st.weight_decay = wd;
            states.push_back(std::move(st));
        }
    }

    void step(std::vector<TensorView> params, std::vector<TensorView> grads) {
        require_shape(params.size() == grads.size() && params.size() == states.size(),
                      "Optimizer: view count mismatch");
        for (std::size_t i = 0; i < params.size(); ++i)
            adam_step(params[i].flat(), grads[i].flat(), states[i]);
    }
};

void check_finite(const LossBreakdown& bd) {
    struct Named {
        const char* name;
        double v;
    };
    const Named terms[] = {{"L_op_cls", bd.obj_cls}, {"L_op_tri", bd.obj_tri}, {"L_cls", bd.cls},
                           {"L_tri", bd.tri},        {"L_rec", bd.rec},        {"L_rvc", bd.rvc},
                           {"total", bd.total}};
    for (const auto& t : terms)
        if (!std::isfinite(t.v))
            throw NumericError(std::string("training aborted: non-finite loss term ") + t.name);
}

WordVecTable make_word_table(const std::optional<WordVecTable>& provided,
                             const std::vector<std::string>& tokens, int dim, Rng& rng) {
    if (provided) {
        require_shape(provided->dim == dim, "word table dim does not match configured word_dim");
        if (provided->tokens != tokens)
            throw ValidationError("word table tokens do not match the dataset vocabulary");
        return *provided;
    }
    return random_word_table(tokens, dim, rng);
}

}  // namespace

MetricsReport evaluate_model(const Model& model, const Dataset& data, Split split, int bins,
                             int threads) {
    ScoreMatrix scores = score_images(model, data, split, threads);
    return compute_metrics(scores, data.space, bins);
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
    config.validate();
    data.validate();
    const auto& space = data.space;
    std::vector<int> train_idx = data.split_indices(Split::Train);
    require(!train_idx.empty(), "train: dataset has no train split");
    const bool has_val = !data.split_indices(Split::Val).empty();

    TceDims dims = config.dims;
    dims.feature_dim = data.feature_dim;

    Rng word_rng = Rng::stream(config.seed, "init.words");
    WordVecTable attr_vecs = make_word_table(config.attr_vectors, space.attributes, dims.word_dim, word_rng);
    WordVecTable obj_vecs = make_word_table(config.obj_vectors, space.objects, dims.word_dim, word_rng);

    Rng init_rng = Rng::stream(config.seed, "init");
    Model model;
    switch (config.model) {
        case ModelKind::Tce:
            model = init_tce(dims, attr_vecs, obj_vecs, init_rng);
            break;
        case ModelKind::VisProd:
            model = init_visprod(dims.feature_dim, config.visprod_hidden, space.num_attributes(),
                                 space.num_objects(), init_rng);
            break;
        case ModelKind::LabelEmbed:
            model = init_labelembed(dims.feature_dim, dims.word_dim, attr_vecs, obj_vecs, init_rng);
            break;
    }

    // RVC semantics frozen at initialization when requested
    std::optional<Mat> frozen_attr, frozen_obj;
    if (config.model == ModelKind::Tce && config.weights.rvc_frozen_semantics) {
        frozen_attr = std::get<TceParams>(model).attr_table;
        frozen_obj = std::get<TceParams>(model).obj_table;
    }

    Optimizer opt(tensor_views(model), config, config.model);
    Rng shuffle_rng = Rng::stream(config.seed, "shuffle");
    Rng sampling_rng = Rng::stream(config.seed, "sampling");
    Rng rvc_rng = Rng::stream(config.seed, "rvc");

    TrainResult result{model, model, {}};
    double best_hm = -1.0;
    int global_step = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(train_idx);
        LossBreakdown epoch_sum;
        int steps_this_epoch = 0;

        for (std::size_t start = 0; start < train_idx.size(); start += config.batch_size) {
            const std::size_t end = std::min(train_idx.size(), start + config.batch_size);
            std::vector<int> indices(train_idx.begin() + start, train_idx.begin() + end);

            const auto reads_before = data.read_counts();
            std::vector<BatchSample> batch;
            std::vector<ConceptId> labels;
            batch.reserve(indices.size());
            labels.reserve(indices.size());
            for (int i : indices) {
                const DataSample& s = data.sample(static_cast<std::size_t>(i));
                labels.push_back({s.attr, s.obj});
                batch.push_back({s.feature, s.attr, s.obj, -1, {-1, -1}});
            }
            NegativeSamples negs = sample_negatives(labels, space, sampling_rng);
            for (std::size_t k = 0; k < batch.size(); ++k) {
                batch[k].neg_obj = negs.neg_obj[k];
                batch[k].neg_concept = negs.neg_concept[k];
            }
            const std::uint64_t rvc_seed = rvc_rng.next();

            LossBreakdown bd;
            if (auto* tce = std::get_if<TceParams>(&model)) {
                TceGrads grads = TceGrads::zeros_like(*tce);
                bd = tce_batch_loss(*tce, space, batch, config.weights, rvc_seed, &grads,
                                    frozen_attr ? &*frozen_attr : nullptr,
                                    frozen_obj ? &*frozen_obj : nullptr);
                check_finite(bd);
                if (config.batch_hook) {
                    config.batch_hook({epoch, global_step, indices, negs, rvc_seed, bd, model});
                }
                opt.step(tensor_views(*tce), tensor_views(grads));
            } else if (auto* vp = std::get_if<VisProdParams>(&model)) {
                VisProdGrads grads = VisProdGrads::zeros_like(*vp);
                bd = visprod_batch_loss(*vp, batch, &grads);
                check_finite(bd);
                if (config.batch_hook) {
                    config.batch_hook({epoch, global_step, indices, negs, rvc_seed, bd, model});
                }
                opt.step(tensor_views(*vp), tensor_views(grads));
            } else {
                auto& le = std::get<LabelEmbedParams>(model);
                LabelEmbedGrads grads = LabelEmbedGrads::zeros_like(le);
                bd = labelembed_batch_loss(le, batch, config.labelembed_margin, &grads);
                check_finite(bd);
                if (config.batch_hook) {
                    config.batch_hook({epoch, global_step, indices, negs, rvc_seed, bd, model});
                }
                opt.step(tensor_views(le), tensor_views(grads));
            }

            const auto reads_after = data.read_counts();
            if (reads_after[1] != reads_before[1] || reads_after[2] != reads_before[2])
                throw Error("train: gradient step touched val/test features");

            epoch_sum.obj_cls += bd.obj_cls;
            epoch_sum.obj_tri += bd.obj_tri;
            epoch_sum.cls += bd.cls;
            epoch_sum.tri += bd.tri;
            epoch_sum.rec += bd.rec;
            epoch_sum.rvc += bd.rvc;
            epoch_sum.total += bd.total;
            ++steps_this_epoch;
            ++global_step;
        }

        EpochRow row;
        row.epoch = epoch;
        const double inv = 1.0 / static_cast<double>(steps_this_epoch);
        row.mean = epoch_sum;
        row.mean.obj_cls *= inv;
        row.mean.obj_tri *= inv;
        row.mean.cls *= inv;
        row.mean.tri *= inv;
        row.mean.rec *= inv;
        row.mean.rvc *= inv;
        row.mean.total *= inv;

        const bool do_eval =
            has_val && config.eval_every > 0 &&
            (epoch % config.eval_every == 0 || epoch == config.max_epochs);
        if (do_eval) {
            row.val = evaluate_model(model, data, Split::Val, config.eval_bins);
            if (row.val->all_hm > best_hm) {
                best_hm = row.val->all_hm;
                result.best = model;
                result.log.best_epoch = epoch;
                result.log.best_val_all_hm = best_hm;
            }
        }
        result.log.epochs.push_back(std::move(row));
    }

    result.final = std::move(model);
    if (result.log.best_epoch < 0) result.best = result.final;  // never evaluated
    return result;
}

std::vector<AblationRow> ablation_matrix(const Dataset& data, const TrainConfig& base_config) {
    struct Variant {
        const char* name;
        bool cls, rec, op, rvc;  // tri is always on
    };
    // mirrors the loss-subset rows of the ablation protocol
    const Variant variants[] = {
        {"tri", false, false, false, false},
        {"tri+cls", true, false, false, false},
        {"tri+cls+rec", true, true, false, false},
        {"tri+cls+rec+op", true, true, true, false},
        {"tri+rec+op+rvc", false, true, true, true},
        {"tri+cls+rec+op+rvc", true, true, true, true},
    };
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        TrainConfig cfg = base_config;
        cfg.model = ModelKind::Tce;
        if (!v.cls) cfg.weights.lambda_cls = 0.0;
        if (!v.rec) cfg.weights.lambda_rec = 0.0;
        if (!v.op) cfg.weights.lambda_op = 0.0;
        if (!v.rvc) cfg.weights.lambda_rvc = 0.0;
        TrainResult res = train(data, cfg);
        AblationRow row;
        row.name = v.name;
        row.weights = cfg.weights;
        row.test = evaluate_model(res.best, data, Split::Test, cfg.eval_bins);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string pct2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

void write_train_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write train log: " + path);
    out << "epoch,l_op_cls,l_op_tri,l_cls,l_tri,l_rec,l_rvc,l_total,"
           "val_closed_unseen,val_open_unseen,val_open_seen,val_unseen_hm,val_all_hm,val_auc,"
           "val_attr_acc,val_obj_acc\n";
    for (const auto& row : log.epochs) {
        out << row.epoch << ',' << num(row.mean.obj_cls) << ',' << num(row.mean.obj_tri) << ','
            << num(row.mean.cls) << ',' << num(row.mean.tri) << ',' << num(row.mean.rec) << ','
            << num(row.mean.rvc) << ',' << num(row.mean.total);
        if (row.val) {
            const auto& v = *row.val;
            out << ',' << pct2(v.closed_unseen) << ',' << pct2(v.open_unseen) << ',' << pct2(v.open_seen)
                << ',' << pct2(v.unseen_hm) << ',' << pct2(v.all_hm) << ',' << pct2(v.auc) << ','
                << pct2(v.attr_acc) << ',' << pct2(v.obj_acc);
        } else {
            out << ",,,,,,,,";
        }
        out << '\n';
    }
}

void write_ablation_csv(std::span<const AblationRow> rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write ablation csv: " + path);
    out << "variant,attr_acc,obj_acc,open_unseen,open_seen,all_hm\n";
    for (const auto& r : rows) {
        out << r.name << ',' << pct2(r.test.attr_acc) << ',' << pct2(r.test.obj_acc) << ','
            << pct2(r.test.open_unseen) << ',' << pct2(r.test.open_seen) << ',' << pct2(r.test.all_hm)
            << '\n';
    }
}

}  // namespace tce
