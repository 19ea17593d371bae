#include "tce/dataforge.hpp"

#include "tce/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tce {

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw FormatError("unknown split tag: '" + name + "'");
}

Vec SynthTruth::concept_mean(int attr, int obj) const {
    const int n = object_centers.rows;
    Vec mean(object_centers.row(obj).begin(), object_centers.row(obj).end());
    axpy(mean, attribute_dirs.row(attr), 1.0 - context_strength);
    axpy(mean, context_offsets.row(attr * n + obj), context_strength);
    return mean;
}

std::vector<int> Dataset::split_indices(Split s) const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == s) idx.push_back(static_cast<int>(i));
    return idx;
}

void Dataset::validate() const {
    space.validate();
    bool val_seen = false, val_unseen = false, test_seen = false, test_unseen = false;
    bool has_val = false, has_test = false;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (static_cast<int>(s.feature.size()) != feature_dim)
            throw ValidationError("sample " + std::to_string(i) + ": feature width " +
                                  std::to_string(s.feature.size()) + " != declared " +
                                  std::to_string(feature_dim));
        const bool seen = space.is_seen(s.attr, s.obj);
        if (!seen && !space.is_unseen(s.attr, s.obj))
            throw ValidationError("sample " + std::to_string(i) + ": concept not in seen or unseen set");
        switch (s.split) {
            case Split::Train:
                if (!seen)
                    throw ValidationError("train sample " + std::to_string(i) +
                                          " labeled with unseen concept (" +
                                          space.attributes[s.attr] + ", " + space.objects[s.obj] + ")");
                break;
            case Split::Val:
                has_val = true;
                (seen ? val_seen : val_unseen) = true;
                break;
            case Split::Test:
                has_test = true;
                (seen ? test_seen : test_unseen) = true;
                break;
        }
    }
    if (has_val && !(val_seen && val_unseen))
        throw ValidationError("val split must contain both seen- and unseen-concept samples");
    if (has_test && !(test_seen && test_unseen))
        throw ValidationError("test split must contain both seen- and unseen-concept samples");
}

void SynthSpec::validate() const {
    if (num_attrs < 2 || num_objs < 2) throw ConfigError("SynthSpec: need at least 2 attrs and 2 objs");
    if (feature_dim < 1) throw ConfigError("SynthSpec: feature_dim must be positive");
    if (!(seen_fraction > 0.0 && seen_fraction < 1.0))
        throw ConfigError("SynthSpec: seen_fraction must be in (0,1)");
    if (train_per_concept < 1 || val_per_concept < 1 || test_per_concept < 1)
        throw ConfigError("SynthSpec: samples per concept must be >= 1");
    if (noise_sigma < 0.0) throw ConfigError("SynthSpec: noise_sigma must be nonnegative");
    if (context_strength < 0.0 || context_strength > 1.0)
        throw ConfigError("SynthSpec: context_strength must be in [0,1]");
}

namespace {

std::string synth_token(const char* stem, int i) {
    return std::string(stem) + std::to_string(i);
}

}  // namespace

Dataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const int m = spec.num_attrs, n = spec.num_objs, f = spec.feature_dim;

    std::vector<std::string> attrs, objs;
    for (int a = 0; a < m; ++a) attrs.push_back(synth_token("attr", a));
    for (int o = 0; o < n; ++o) objs.push_back(synth_token("obj", o));

    Rng split_rng = Rng::stream(spec.seed, "data.split");
    Dataset data;
    data.space = split_concepts(attrs, objs, spec.seen_fraction, split_rng);
    data.feature_dim = f;

    SynthTruth truth;
    truth.noise_sigma = spec.noise_sigma;
    truth.context_strength = spec.context_strength;
    truth.object_centers = Mat(n, f);
    truth.attribute_dirs = Mat(m, f);
    truth.context_offsets = Mat(m * n, f);
    Rng truth_rng = Rng::stream(spec.seed, "data.truth");
    for (double& v : truth.object_centers.a) v = truth_rng.gaussian();
    for (double& v : truth.attribute_dirs.a) v = truth_rng.gaussian();
    // object-specific perturbations at half the scale of the global
    // directions: contextual effects bend an attribute, not bury it
    for (double& v : truth.context_offsets.a) v = truth_rng.gaussian(0.0, 0.5);

    Rng noise_rng = Rng::stream(spec.seed, "data.noise");
    auto emit = [&](Split split, const ConceptId& c, int count) {
        for (int k = 0; k < count; ++k) {
            DataSample s;
            s.attr = c.first;
            s.obj = c.second;
            s.split = split;
            s.feature = truth.concept_mean(c.first, c.second);
            if (spec.noise_sigma > 0.0)
                for (double& v : s.feature) v += noise_rng.gaussian(0.0, spec.noise_sigma);
            data.samples.push_back(std::move(s));
        }
    };
    for (const auto& c : data.space.seen) emit(Split::Train, c, spec.train_per_concept);
    const auto all = data.space.all_concepts();
    for (const auto& c : all) emit(Split::Val, c, spec.val_per_concept);
    for (const auto& c : all) emit(Split::Test, c, spec.test_per_concept);

    data.truth = std::move(truth);
    data.validate();
    return data;
}

OracleAccuracy bayes_oracle_accuracy(const Dataset& data, Split split) {
    require(data.truth.has_value(), "bayes_oracle_accuracy: dataset has no generative truth");
    const auto& truth = *data.truth;
    const auto all = data.space.all_concepts();
    std::vector<Vec> means;
    means.reserve(all.size());
    for (const auto& c : all) means.push_back(truth.concept_mean(c.first, c.second));
    std::vector<int> unseen_cols;
    for (std::size_t i = 0; i < all.size(); ++i)
        if (!data.space.is_seen(all[i].first, all[i].second)) unseen_cols.push_back(static_cast<int>(i));

    auto nearest = [&](const Vec& x, const std::vector<int>* restrict_cols) {
        int best = -1;
        double best_d = 0.0;
        auto consider = [&](int col) {
            double d = euclidean_distance_value(x, means[col]);
            if (best < 0 || d < best_d) {
                best = col;
                best_d = d;
            }
        };
        if (restrict_cols)
            for (int c : *restrict_cols) consider(c);
        else
            for (int c = 0; c < static_cast<int>(means.size()); ++c) consider(c);
        return best;
    };

    long closed_hit = 0, closed_total = 0;
    long open_unseen_hit = 0, open_unseen_total = 0;
    long open_seen_hit = 0, open_seen_total = 0;
    for (const auto& s : data.samples) {
        if (s.split != split) continue;
        const bool label_seen = data.space.is_seen(s.attr, s.obj);
        int open_pred = nearest(s.feature, nullptr);
        const bool open_correct = all[open_pred] == ConceptId{s.attr, s.obj};
        if (label_seen) {
            ++open_seen_total;
            open_seen_hit += open_correct;
        } else {
            ++open_unseen_total;
            open_unseen_hit += open_correct;
            ++closed_total;
            int closed_pred = nearest(s.feature, &unseen_cols);
            closed_hit += all[closed_pred] == ConceptId{s.attr, s.obj};
        }
    }
    require(closed_total > 0 && open_seen_total > 0,
            "bayes_oracle_accuracy: split lacks seen or unseen samples");
    OracleAccuracy acc;
    acc.closed_unseen = 100.0 * static_cast<double>(closed_hit) / static_cast<double>(closed_total);
    acc.open_unseen = 100.0 * static_cast<double>(open_unseen_hit) / static_cast<double>(open_unseen_total);
    acc.open_seen = 100.0 * static_cast<double>(open_seen_hit) / static_cast<double>(open_seen_total);
    return acc;
}

// ---- manifest I/O -----------------------------------------------------------

namespace {

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string concept_list(const std::vector<ConceptId>& cs, const ConceptSpace& space) {
    std::string out;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        if (i) out += ';';
        out += space.attributes[cs[i].first] + "|" + space.objects[cs[i].second];
    }
    return out;
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& manifest_path, bool binary) {
    std::ofstream out(manifest_path);
    if (!out) throw IoError("cannot write manifest: " + manifest_path);
    out << "attrs: " << join_names(data.space.attributes) << "\n";
    out << "objs: " << join_names(data.space.objects) << "\n";
    out << "feature_dim: " << data.feature_dim << "\n";
    out << "seen: " << concept_list(data.space.seen, data.space) << "\n";
    out << "unseen: " << concept_list(data.space.unseen, data.space) << "\n";

    char buf[64];
    if (!binary) {
        for (const auto& s : data.samples) {
            out << split_name(s.split) << ',' << data.space.attributes[s.attr] << ','
                << data.space.objects[s.obj];
            for (double v : s.feature) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << ',' << buf;
            }
            out << '\n';
        }
    } else {
        std::filesystem::path sidecar = std::filesystem::path(manifest_path);
        sidecar.replace_extension(".bin");
        out << "encoding: bin\n";
        out << "data: " << sidecar.filename().string() << "\n";
        for (const auto& s : data.samples)
            out << split_name(s.split) << ',' << data.space.attributes[s.attr] << ','
                << data.space.objects[s.obj] << '\n';
        std::ofstream bin(sidecar, std::ios::binary);
        if (!bin) throw IoError("cannot write sidecar: " + sidecar.string());
        std::vector<float> row(static_cast<std::size_t>(data.feature_dim));
        for (const auto& s : data.samples) {
            for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(s.feature[i]);
            bin.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        }
        if (!bin) throw IoError("short write on sidecar: " + sidecar.string());
    }
    if (!out) throw IoError("short write on manifest: " + manifest_path);
}

Dataset load_feature_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path);

    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    bool binary = false;
    std::string sidecar_name;
    std::vector<std::string> seen_spec, unseen_spec;

    auto fail = [&](const std::string& msg) -> FormatError {
        return FormatError(manifest_path + ":" + std::to_string(line_no) + ": " + msg);
    };

    // header
    int header_fields = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        auto colon = t.find(':');
        auto comma = t.find(',');
        bool is_header = colon != std::string::npos && (comma == std::string::npos || colon < comma);
        if (!is_header) break;  // first sample row
        std::string key = trim(t.substr(0, colon));
        std::string value = trim(t.substr(colon + 1));
        if (key == "attrs") {
            data.space.attributes = split_on(value, ',');
            for (auto& a : data.space.attributes) a = trim(a);
            ++header_fields;
        } else if (key == "objs") {
            data.space.objects = split_on(value, ',');
            for (auto& o : data.space.objects) o = trim(o);
            ++header_fields;
        } else if (key == "feature_dim") {
            data.feature_dim = std::stoi(value);
            ++header_fields;
        } else if (key == "seen") {
            seen_spec = split_on(value, ';');
            ++header_fields;
        } else if (key == "unseen") {
            unseen_spec = split_on(value, ';');
            ++header_fields;
        } else if (key == "encoding") {
            if (value != "bin") throw fail("unknown encoding '" + value + "'");
            binary = true;
        } else if (key == "data") {
            sidecar_name = value;
        } else {
            throw fail("unknown header key '" + key + "'");
        }
    }
    if (header_fields != 5) throw FormatError(manifest_path + ": incomplete header");
    if (binary && sidecar_name.empty()) throw FormatError(manifest_path + ": encoding bin needs a data: line");

    auto parse_concepts = [&](const std::vector<std::string>& parts, const char* which) {
        std::vector<ConceptId> out;
        for (const auto& part : parts) {
            std::string t = trim(part);
            if (t.empty()) continue;
            auto bar = t.find('|');
            if (bar == std::string::npos)
                throw FormatError(manifest_path + ": bad " + which + " concept '" + t + "'");
            int a = data.space.attr_index(trim(t.substr(0, bar)));
            int o = data.space.obj_index(trim(t.substr(bar + 1)));
            if (a < 0 || o < 0)
                throw FormatError(manifest_path + ": " + which + " concept '" + t + "' uses unknown names");
            out.push_back({a, o});
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    data.space.seen = parse_concepts(seen_spec, "seen");
    data.space.unseen = parse_concepts(unseen_spec, "unseen");

    // sample rows: the current `line` already holds the first one
    auto parse_row = [&](const std::string& row) {
        std::vector<std::string> fields = split_on(trim(row), ',');
        if (fields.size() < 3) throw fail("expected split,attr,obj[,features]");
        DataSample s;
        s.split = split_from_name(trim(fields[0]));
        int a = data.space.attr_index(trim(fields[1]));
        int o = data.space.obj_index(trim(fields[2]));
        if (a < 0) throw fail("unknown attribute '" + trim(fields[1]) + "'");
        if (o < 0) throw fail("unknown object '" + trim(fields[2]) + "'");
        s.attr = a;
        s.obj = o;
        if (!binary) {
            if (static_cast<int>(fields.size()) - 3 != data.feature_dim)
                throw fail("row has " + std::to_string(fields.size() - 3) + " features, declared " +
                           std::to_string(data.feature_dim));
            s.feature.reserve(static_cast<std::size_t>(data.feature_dim));
            for (std::size_t i = 3; i < fields.size(); ++i) {
                std::size_t pos = 0;
                double v = std::stod(fields[i], &pos);
                if (pos != fields[i].size()) throw fail("bad float '" + fields[i] + "'");
                s.feature.push_back(v);
            }
        } else if (fields.size() != 3) {
            throw fail("binary manifest rows must be split,attr,obj");
        }
        data.samples.push_back(std::move(s));
    };

    bool have_first = !trim(line).empty() && line.find(',') != std::string::npos;
    if (have_first) parse_row(line);
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        parse_row(line);
    }

    if (binary) {
        std::filesystem::path sidecar = std::filesystem::path(manifest_path).parent_path() / sidecar_name;
        std::ifstream bin(sidecar, std::ios::binary);
        if (!bin) throw IoError("cannot open sidecar: " + sidecar.string());
        std::vector<float> row(static_cast<std::size_t>(data.feature_dim));
        for (auto& s : data.samples) {
            bin.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(row.size() * sizeof(float)));
            if (!bin) throw FormatError(sidecar.string() + ": truncated (need one row per manifest sample)");
            s.feature.assign(row.begin(), row.end());
        }
    }

    // Re-raise constraint violations with the offending row number where we can.
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const auto& s = data.samples[i];
        if (s.split == Split::Train && !data.space.is_seen(s.attr, s.obj))
            throw ValidationError(manifest_path + ": train row " + std::to_string(i) + " (" +
                                  data.space.attributes[s.attr] + "," + data.space.objects[s.obj] +
                                  ") is labeled with an unseen concept");
    }
    data.validate();
    return data;
}

NegativeSamples sample_negatives(std::span<const ConceptId> labels, const ConceptSpace& space, Rng& rng) {
    require(space.num_objects() >= 2, "sample_negatives: need at least 2 objects");
    require(space.seen.size() >= 2, "sample_negatives: need at least 2 seen concepts");
    NegativeSamples out;
    out.neg_obj.reserve(labels.size());
    out.neg_concept.reserve(labels.size());
    const int n = space.num_objects();
    const int s = static_cast<int>(space.seen.size());
    for (const auto& [attr, obj] : labels) {
        int no = rng.uniform_int(0, n - 2);
        if (no >= obj) ++no;
        out.neg_obj.push_back(no);

        // uniform over seen \ {c}; the label may itself be unseen, in which
        // case all seen concepts are valid negatives
        auto it = std::lower_bound(space.seen.begin(), space.seen.end(), ConceptId{attr, obj});
        if (it != space.seen.end() && *it == ConceptId{attr, obj}) {
            int self = static_cast<int>(it - space.seen.begin());
            int nc = rng.uniform_int(0, s - 2);
            if (nc >= self) ++nc;
            out.neg_concept.push_back(space.seen[nc]);
        } else {
            out.neg_concept.push_back(space.seen[rng.uniform_int(0, s - 1)]);
        }
    }
    return out;
}

}  // namespace tce
