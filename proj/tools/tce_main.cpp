// Command-line front end: dataset generation, training, evaluation and
// run comparison. Exit codes: 0 success, 2 config error, 3 numeric
// failure, 4 checkpoint/data compatibility error, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "tce/dataforge.hpp"
#include "tce/runconfig.hpp"
#include "tce/trainer.hpp"

namespace fs = std::filesystem;
using namespace tce;

namespace {

struct GenDataOpts {
    std::string out;
    SynthSpec spec;
    bool binary = false;
    std::string config_path;
};

struct TrainOpts {
    std::string data;
    std::string out;
    std::string model = "tce";
    TrainConfig cfg;
    double weight_decay = -1.0;  // <0: per-model default
    std::string word_vectors;
    std::string ablation;
    std::string config_path;
};

struct EvalOpts {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string split = "test";
    int bins = 100;
    int threads = 1;
    std::string config_path;
};

struct ReportOpts {
    std::vector<std::string> inputs;
    std::vector<std::string> names;
    std::string out;
};

void add_config_option(CLI::App* cmd, std::string& path_slot) {
    cmd->add_option("--config", path_slot, "flat key = value config file; flags take precedence");
}

/// Applies a `key = value` config file by injecting `--key=value` tokens
/// for every key that names an option of `cmd` and was not already given
/// on the command line. Unknown keys (including manifest.* bookkeeping)
/// are ignored, so a run manifest doubles as a config file.
std::vector<std::string> merge_config_args(const CLI::App* cmd, const std::vector<std::string>& argv_tail,
                                           const std::string& config_path) {
    KeyValueFile kv = KeyValueFile::parse_file(config_path);
    std::vector<std::string> merged(argv_tail);
    for (const auto& [key, value] : kv.values()) {
        const std::string flag = "--" + key;
        if (cmd->get_option_no_throw(flag) == nullptr) continue;
        bool given = false;
        for (const auto& a : argv_tail)
            if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
        if (!given) merged.push_back(flag + "=" + value);
    }
    return merged;
}

/// Locates `--config <path>` / `--config=<path>` ahead of full parsing.
std::string scan_config_path(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return "";
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_manifest(const fs::path& outdir, const std::string& config_path, std::uint64_t seed,
                    const std::map<std::string, std::string>& entries) {
    RunManifest manifest;
    manifest.config_path = config_path;
    manifest.seed = seed;
    manifest.output_dir = outdir.string();
    for (const auto& [k, v] : entries) manifest.resolved.set(k, v);
    manifest.write((outdir / "manifest.txt").string());
}

int run_gen_data(const GenDataOpts& o) {
    if (!(o.spec.seen_fraction > 0.0 && o.spec.seen_fraction < 1.0))
        throw ConfigError("--seen-frac must be in (0,1), got " + format_double(o.spec.seen_fraction));
    fs::create_directories(o.out);
    write_manifest(o.out, o.config_path, o.spec.seed,
                   {{"command", "gen-data"},
                    {"attrs", std::to_string(o.spec.num_attrs)},
                    {"objs", std::to_string(o.spec.num_objs)},
                    {"feature-dim", std::to_string(o.spec.feature_dim)},
                    {"seen-frac", format_double(o.spec.seen_fraction)},
                    {"per-concept", std::to_string(o.spec.train_per_concept)},
                    {"val-per-concept", std::to_string(o.spec.val_per_concept)},
                    {"test-per-concept", std::to_string(o.spec.test_per_concept)},
                    {"noise-sigma", format_double(o.spec.noise_sigma)},
                    {"context-strength", format_double(o.spec.context_strength)},
                    {"seed", std::to_string(o.spec.seed)},
                    {"binary", o.binary ? "true" : "false"},
                    {"out", o.out}});

    Dataset data = generate_synthetic(o.spec);
    const fs::path dataset_path = fs::path(o.out) / "dataset.txt";
    save_dataset(data, dataset_path.string(), o.binary);

    std::size_t n_train = data.split_indices(Split::Train).size();
    std::size_t n_val = data.split_indices(Split::Val).size();
    std::size_t n_test = data.split_indices(Split::Test).size();
    std::cout << "wrote " << dataset_path.string() << "\n"
              << "concepts: " << data.space.seen.size() << " seen, " << data.space.unseen.size()
              << " unseen\n"
              << "samples: " << n_train << " train, " << n_val << " val, " << n_test << " test\n";
    return 0;
}

WordVecTable load_table_for(const std::string& path, const std::vector<std::string>& tokens,
                            std::uint64_t seed, const char* which) {
    WordVecTable t = load_word_vectors(path, tokens, Rng::derive_seed(seed, which));
    if (t.fallback_count > 0)
        std::cout << which << " vectors: " << t.fallback_count << " of " << tokens.size()
                  << " tokens missing from " << path << ", using seeded fallback\n";
    return t;
}

std::map<std::string, std::string> train_manifest_entries(const TrainOpts& o) {
    const auto& c = o.cfg;
    const auto& w = c.weights;
    std::map<std::string, std::string> e{
        {"command", "train"},
        {"data", o.data},
        {"out", o.out},
        {"model", o.model},
        {"epochs", std::to_string(c.max_epochs)},
        {"batch", std::to_string(c.batch_size)},
        {"lr", format_double(c.lr_main)},
        {"lr-attr", format_double(c.lr_attr_table)},
        {"lambda-cls", format_double(w.lambda_cls)},
        {"lambda-tri", format_double(w.lambda_tri)},
        {"lambda-rec", format_double(w.lambda_rec)},
        {"lambda-op", format_double(w.lambda_op)},
        {"lambda-rvc", format_double(w.lambda_rvc)},
        {"margin-obj", format_double(w.margin_obj)},
        {"margin-concept", format_double(w.margin_concept)},
        {"margin-ratio", format_double(w.margin_ratio)},
        {"rvc-pairs", std::to_string(w.rvc_pairs)},
        {"rvc-include-unseen", w.rvc_include_unseen ? "true" : "false"},
        {"rvc-frozen-semantics", w.rvc_frozen_semantics ? "true" : "false"},
        {"seed", std::to_string(c.seed)},
        {"eval-every", std::to_string(c.eval_every)},
        {"bins", std::to_string(c.eval_bins)},
        {"latent-dim", std::to_string(c.dims.latent_dim)},
        {"word-dim", std::to_string(c.dims.word_dim)},
        {"visprod-hidden", std::to_string(c.visprod_hidden)},
        {"labelembed-margin", format_double(c.labelembed_margin)},
    };
    if (o.weight_decay >= 0.0) e["weight-decay"] = format_double(o.weight_decay);
    if (!o.word_vectors.empty()) e["word-vectors"] = o.word_vectors;
    if (!o.ablation.empty()) e["ablation"] = o.ablation;
    return e;
}

int run_train(TrainOpts& o) {
    o.cfg.model = model_kind_from_name(o.model);
    if (o.weight_decay >= 0.0) o.cfg.weight_decay = o.weight_decay;
    if (!o.ablation.empty() && o.ablation != "table3")
        throw ConfigError("--ablation supports only 'table3', got '" + o.ablation + "'");
    o.cfg.validate();

    fs::create_directories(o.out);
    write_manifest(o.out, o.config_path, o.cfg.seed, train_manifest_entries(o));

    Dataset data = load_feature_dataset(o.data);
    if (!o.word_vectors.empty()) {
        o.cfg.attr_vectors = load_table_for(o.word_vectors, data.space.attributes, o.cfg.seed, "attr");
        o.cfg.obj_vectors = load_table_for(o.word_vectors, data.space.objects, o.cfg.seed, "obj");
        if (o.cfg.attr_vectors->dim != o.cfg.dims.word_dim) {
            std::cout << "word-dim " << o.cfg.dims.word_dim << " -> " << o.cfg.attr_vectors->dim
                      << " (from " << o.word_vectors << ")\n";
            o.cfg.dims.word_dim = o.cfg.attr_vectors->dim;
        }
    }

    if (!o.ablation.empty()) {
        auto rows = ablation_matrix(data, o.cfg);
        const fs::path out_csv = fs::path(o.out) / "ablation.csv";
        write_ablation_csv(rows, out_csv.string());
        std::cout << "variant,attr_acc,obj_acc,open_unseen,open_seen,all_hm\n";
        for (const auto& r : rows) {
            char line[160];
            std::snprintf(line, sizeof line, "%s,%.2f,%.2f,%.2f,%.2f,%.2f", r.name.c_str(),
                          r.test.attr_acc, r.test.obj_acc, r.test.open_unseen, r.test.open_seen,
                          r.test.all_hm);
            std::cout << line << "\n";
        }
        std::cout << "wrote " << out_csv.string() << "\n";
        return 0;
    }

    TrainResult res = train(data, o.cfg);
    const fs::path ckpt = fs::path(o.out) / "checkpoint.bin";
    save_checkpoint(ckpt.string(), res.best, data.space);
    write_train_log_csv(res.log, (fs::path(o.out) / "trainlog.csv").string());
    std::cout << "trained " << o.model << " for " << o.cfg.max_epochs << " epochs ("
              << res.log.epochs.size() << " logged)\n";
    if (res.log.best_epoch > 0) {
        char line[96];
        std::snprintf(line, sizeof line, "best validation all_hm %.2f at epoch %d\n",
                      res.log.best_val_all_hm, res.log.best_epoch);
        std::cout << line;
    }
    std::cout << "wrote " << ckpt.string() << "\n";
    return 0;
}

int run_eval(const EvalOpts& o) {
    fs::create_directories(o.out);
    write_manifest(o.out, o.config_path, 0,
                   {{"command", "eval"},
                    {"checkpoint", o.checkpoint},
                    {"data", o.data},
                    {"out", o.out},
                    {"split", o.split},
                    {"bins", std::to_string(o.bins)},
                    {"threads", std::to_string(o.threads)}});

    Dataset data = load_feature_dataset(o.data);
    LoadedCheckpoint ck = load_checkpoint(o.checkpoint);
    if (ck.attributes != data.space.attributes || ck.objects != data.space.objects)
        throw CompatibilityError("checkpoint vocabulary does not match dataset");
    int model_feature_dim = std::visit(
        [](const auto& p) {
            if constexpr (requires { p.dims.feature_dim; })
                return p.dims.feature_dim;
            else
                return p.feature_dim;
        },
        ck.model);
    if (model_feature_dim != data.feature_dim)
        throw CompatibilityError("checkpoint feature dim " + std::to_string(model_feature_dim) +
                                 " != dataset feature dim " + std::to_string(data.feature_dim));

    Split split = split_from_name(o.split);
    ScoreMatrix scores = score_images(ck.model, data, split, o.threads);
    MetricsReport report = compute_metrics(scores, data.space, o.bins);
    SweepResult sweep = auc_bias_sweep(scores, data.space, o.bins);

    write_metrics_csv(report, (fs::path(o.out) / "metrics.csv").string());
    write_curve_csv(sweep, (fs::path(o.out) / "curve.csv").string());

    char line[256];
    std::snprintf(line, sizeof line,
                  "closed_unseen %.2f | open_unseen %.2f | open_seen %.2f | unseen_hm %.2f | "
                  "all_hm %.2f | auc %.2f | attr %.2f | obj %.2f\n",
                  report.closed_unseen, report.open_unseen, report.open_seen, report.unseen_hm,
                  report.all_hm, report.auc, report.attr_acc, report.obj_acc);
    std::cout << line;
    return 0;
}

int run_report(const ReportOpts& o) {
    if (!o.names.empty() && o.names.size() != o.inputs.size())
        throw ConfigError("--names count must match the number of metric files");
    const char* header = "model,closed_unseen,open_unseen,open_seen,unseen_hm,all_hm,auc,attr_acc,obj_acc";
    std::ostringstream merged;
    merged << header << "\n";
    for (std::size_t i = 0; i < o.inputs.size(); ++i) {
        std::ifstream in(o.inputs[i]);
        if (!in) throw IoError("cannot open metrics csv: " + o.inputs[i]);
        std::map<std::string, std::string> kv;
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            kv[line.substr(0, comma)] = line.substr(comma + 1);
        }
        for (const char* key : {"closed_unseen", "open_unseen", "open_seen", "unseen_hm", "all_hm",
                                "auc", "attr_acc", "obj_acc"})
            if (!kv.count(key))
                throw FormatError(o.inputs[i] + ": missing metric '" + std::string(key) + "'");
        std::string name = o.names.empty()
                               ? fs::path(o.inputs[i]).parent_path().filename().string()
                               : o.names[i];
        if (name.empty()) name = o.inputs[i];
        merged << name << ',' << kv["closed_unseen"] << ',' << kv["open_unseen"] << ','
               << kv["open_seen"] << ',' << kv["unseen_hm"] << ',' << kv["all_hm"] << ',' << kv["auc"]
               << ',' << kv["attr_acc"] << ',' << kv["obj_acc"] << "\n";
    }
    std::cout << merged.str();
    if (!o.out.empty()) {
        std::ofstream out(o.out);
        if (!out) throw IoError("cannot write report: " + o.out);
        out << merged.str();
        std::cout << "wrote " << o.out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"translational concept embeddings for compositional zero-shot learning"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    GenDataOpts gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic compositional dataset");
    gen_cmd->add_option("--out", gen.out, "output directory")->required();
    gen_cmd->add_option("--attrs", gen.spec.num_attrs, "number of attributes");
    gen_cmd->add_option("--objs", gen.spec.num_objs, "number of objects");
    gen_cmd->add_option("--feature-dim", gen.spec.feature_dim, "feature dimension");
    gen_cmd->add_option("--seen-frac", gen.spec.seen_fraction, "fraction of concepts marked seen");
    gen_cmd->add_option("--per-concept", gen.spec.train_per_concept, "train samples per seen concept");
    gen_cmd->add_option("--val-per-concept", gen.spec.val_per_concept, "val samples per concept");
    gen_cmd->add_option("--test-per-concept", gen.spec.test_per_concept, "test samples per concept");
    gen_cmd->add_option("--noise-sigma", gen.spec.noise_sigma, "gaussian feature noise");
    gen_cmd->add_option("--context-strength", gen.spec.context_strength,
                        "0 = global attribute offsets, 1 = fully object-specific");
    gen_cmd->add_option("--seed", gen.spec.seed, "master seed")->envname("TCE_SEED");
    gen_cmd->add_flag("--binary", gen.binary, "write binary feature sidecar instead of CSV rows");
    add_config_option(gen_cmd, gen.config_path);

    TrainOpts tr;
    auto* tr_cmd = app.add_subcommand("train", "train a model on a dataset manifest");
    tr_cmd->add_option("--data", tr.data, "dataset manifest path")->required();
    tr_cmd->add_option("--out", tr.out, "output directory")->required();
    tr_cmd->add_option("--model", tr.model, "tce | visprod | labelembed");
    tr_cmd->add_option("--epochs", tr.cfg.max_epochs, "training epochs");
    tr_cmd->add_option("--batch", tr.cfg.batch_size, "batch size");
    tr_cmd->add_option("--lr", tr.cfg.lr_main, "learning rate");
    tr_cmd->add_option("--lr-attr", tr.cfg.lr_attr_table, "attribute-table learning rate (tce)");
    tr_cmd->add_option("--weight-decay", tr.weight_decay,
                       "L2 weight decay (default: 0 for tce, 5e-5 for baselines)");
    tr_cmd->add_option("--lambda-cls", tr.cfg.weights.lambda_cls, "concept classification weight");
    tr_cmd->add_option("--lambda-tri", tr.cfg.weights.lambda_tri, "concept triplet weight");
    tr_cmd->add_option("--lambda-rec", tr.cfg.weights.lambda_rec, "reconstruction weight");
    tr_cmd->add_option("--lambda-op", tr.cfg.weights.lambda_op, "object prototype weight");
    tr_cmd->add_option("--lambda-rvc", tr.cfg.weights.lambda_rvc, "ratio variance weight");
    tr_cmd->add_option("--margin-obj", tr.cfg.weights.margin_obj, "object triplet margin");
    tr_cmd->add_option("--margin-concept", tr.cfg.weights.margin_concept, "concept triplet margin");
    tr_cmd->add_option("--margin-ratio", tr.cfg.weights.margin_ratio, "ratio variance margin");
    tr_cmd->add_option("--rvc-pairs", tr.cfg.weights.rvc_pairs, "concept pairs per variance estimate");
    tr_cmd->add_flag("--rvc-include-unseen", tr.cfg.weights.rvc_include_unseen,
                     "sample ratio pairs from all concepts, not just seen");
    tr_cmd->add_flag("--rvc-frozen-semantics", tr.cfg.weights.rvc_frozen_semantics,
                     "use initial embeddings for ratio denominators");
    tr_cmd->add_option("--seed", tr.cfg.seed, "master seed")->envname("TCE_SEED");
    tr_cmd->add_option("--eval-every", tr.cfg.eval_every, "epochs between validation passes");
    tr_cmd->add_option("--bins", tr.cfg.eval_bins, "bias sweep bins for validation metrics");
    tr_cmd->add_option("--latent-dim", tr.cfg.dims.latent_dim, "latent dimension");
    tr_cmd->add_option("--word-dim", tr.cfg.dims.word_dim, "word embedding dimension");
    tr_cmd->add_option("--visprod-hidden", tr.cfg.visprod_hidden, "visprod hidden width");
    tr_cmd->add_option("--labelembed-margin", tr.cfg.labelembed_margin, "labelembed triplet margin");
    tr_cmd->add_option("--word-vectors", tr.word_vectors, "pretrained word-vector text file");
    tr_cmd->add_option("--ablation", tr.ablation, "run the loss-subset study ('table3')");
    add_config_option(tr_cmd, tr.config_path);

    EvalOpts ev;
    auto* ev_cmd = app.add_subcommand("eval", "score a checkpoint and emit the metric suite");
    ev_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
    ev_cmd->add_option("--data", ev.data, "dataset manifest path")->required();
    ev_cmd->add_option("--out", ev.out, "output directory")->required();
    ev_cmd->add_option("--split", ev.split, "test | val");
    ev_cmd->add_option("--bins", ev.bins, "bias sweep bins");
    ev_cmd->add_option("--threads", ev.threads, "scoring threads (row parallelism only)");
    add_config_option(ev_cmd, ev.config_path);

    ReportOpts rp;
    auto* rp_cmd = app.add_subcommand("report", "merge metric CSVs into one comparison table");
    rp_cmd->add_option("inputs", rp.inputs, "metrics.csv files")->required()->expected(-1);
    rp_cmd->add_option("--names", rp.names, "row names (default: parent directory)")->delimiter(',');
    rp_cmd->add_option("--out", rp.out, "also write the merged table to this file");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        if (!args.empty()) {
            CLI::App* sub = app.get_subcommand_no_throw(args.front());
            std::string config_path = scan_config_path(args);
            if (sub != nullptr && !config_path.empty()) {
                std::vector<std::string> tail(args.begin() + 1, args.end());
                tail = merge_config_args(sub, tail, config_path);
                args.assign(1, args.front());
                args.insert(args.end(), tail.begin(), tail.end());
            }
        }
        std::reverse(args.begin(), args.end());  // CLI11's vector parse expects reversed args
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen_cmd->parsed()) return run_gen_data(gen);
        if (tr_cmd->parsed()) return run_train(tr);
        if (ev_cmd->parsed()) return run_eval(ev);
        if (rp_cmd->parsed()) return run_report(rp);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const CompatibilityError& e) {
        std::cerr << "compatibility error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
