#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tce/dataforge.hpp"

using namespace tce;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("noiseless context-free features equal mu_o + tau_a") {
    SynthSpec spec;
    spec.num_attrs = 3;
    spec.num_objs = 3;
    spec.feature_dim = 6;
    spec.seen_fraction = 0.7;
    spec.train_per_concept = 3;
    spec.val_per_concept = 1;
    spec.test_per_concept = 1;
    spec.noise_sigma = 0.0;
    spec.context_strength = 0.0;
    spec.seed = 5;
    Dataset data = generate_synthetic(spec);
    REQUIRE(data.truth.has_value());
    const auto& truth = *data.truth;

    for (const auto& s : data.samples) {
        for (int i = 0; i < spec.feature_dim; ++i) {
            double expected = truth.object_centers(s.obj, i) + truth.attribute_dirs(s.attr, i);
            CHECK(s.feature[i] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    // identical across samples of the same concept
    const auto train = data.split_indices(Split::Train);
    for (std::size_t i = 1; i < train.size(); ++i) {
        const auto& a = data.samples[train[i - 1]];
        const auto& b = data.samples[train[i]];
        if (a.attr == b.attr && a.obj == b.obj) CHECK(a.feature == b.feature);
    }
}

TEST_CASE("full context strength gives object-specific attribute offsets") {
    SynthSpec spec;
    spec.num_attrs = 2;
    spec.num_objs = 3;
    spec.feature_dim = 8;
    spec.seen_fraction = 0.7;
    spec.train_per_concept = 1;
    spec.noise_sigma = 0.0;
    spec.context_strength = 1.0;
    spec.seed = 6;
    Dataset data = generate_synthetic(spec);
    const auto& truth = *data.truth;

    Vec off0(8), off1(8);
    for (int i = 0; i < 8; ++i) {
        off0[i] = truth.concept_mean(0, 0)[i] - truth.object_centers(0, i);
        off1[i] = truth.concept_mean(0, 1)[i] - truth.object_centers(1, i);
    }
    CHECK(off0 != off1);
}

TEST_CASE("synthetic dataset sizes match the counting oracle") {
    SynthSpec spec;  // the defaults are the 16x12 configuration
    spec.train_per_concept = 50;
    spec.seed = 7;
    Dataset data = generate_synthetic(spec);
    const int total = 16 * 12;
    const int n_seen = static_cast<int>(std::lround(0.6 * total));
    CHECK(static_cast<int>(data.space.seen.size()) == n_seen);
    CHECK(static_cast<int>(data.space.unseen.size()) == total - n_seen);
    CHECK(data.split_indices(Split::Train).size() == static_cast<std::size_t>(n_seen) * 50);
    CHECK(data.split_indices(Split::Val).size() == static_cast<std::size_t>(total) * 10);
    CHECK(data.split_indices(Split::Test).size() == static_cast<std::size_t>(total) * 10);
    data.validate();
}

TEST_CASE("generate_synthetic is bit-deterministic given the seed") {
    SynthSpec spec;
    spec.num_attrs = 4;
    spec.num_objs = 4;
    spec.feature_dim = 10;
    spec.train_per_concept = 3;
    spec.seed = 99;
    Dataset a = generate_synthetic(spec);
    Dataset b = generate_synthetic(spec);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].attr == b.samples[i].attr);
        CHECK(std::memcmp(a.samples[i].feature.data(), b.samples[i].feature.data(),
                          a.samples[i].feature.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("bayes oracle is perfect on noiseless data") {
    SynthSpec spec;
    spec.num_attrs = 4;
    spec.num_objs = 4;
    spec.feature_dim = 8;
    spec.noise_sigma = 0.0;
    spec.seed = 8;
    Dataset data = generate_synthetic(spec);
    auto acc = bayes_oracle_accuracy(data, Split::Test);
    CHECK(acc.closed_unseen == 100.0);
    CHECK(acc.open_unseen == 100.0);
    CHECK(acc.open_seen == 100.0);
}

TEST_CASE("bayes oracle degrades to chance at huge noise") {
    SynthSpec spec;
    spec.num_attrs = 4;
    spec.num_objs = 4;
    spec.feature_dim = 8;
    spec.seen_fraction = 0.5;
    spec.train_per_concept = 1;
    spec.val_per_concept = 40;
    spec.test_per_concept = 40;
    spec.noise_sigma = 100.0;
    spec.seed = 9;
    Dataset data = generate_synthetic(spec);
    auto acc = bayes_oracle_accuracy(data, Split::Test);
    // 8 unseen concepts -> closed chance 12.5%; 16 concepts -> open chance 6.25%
    CHECK(acc.closed_unseen > 12.5 - 6.0);
    CHECK(acc.closed_unseen < 12.5 + 6.0);
    CHECK(acc.open_unseen < 6.25 + 5.0);
}

TEST_CASE("bayes oracle refuses datasets without truth") {
    SynthSpec spec;
    spec.num_attrs = 3;
    spec.num_objs = 3;
    spec.train_per_concept = 2;
    spec.seed = 10;
    Dataset data = generate_synthetic(spec);
    auto path = temp_path("df_roundtrip_truthless.txt");
    save_dataset(data, path);
    Dataset loaded = load_feature_dataset(path);
    CHECK_FALSE(loaded.truth.has_value());
    CHECK_THROWS_AS(bayes_oracle_accuracy(loaded, Split::Test), PreconditionError);
}

TEST_CASE("text round-trip preserves features bit-exactly") {
    SynthSpec spec;
    spec.num_attrs = 3;
    spec.num_objs = 3;
    spec.feature_dim = 7;
    spec.train_per_concept = 2;
    spec.seed = 11;
    Dataset data = generate_synthetic(spec);
    auto path = temp_path("df_roundtrip.txt");
    save_dataset(data, path);
    Dataset loaded = load_feature_dataset(path);

    REQUIRE(loaded.samples.size() == data.samples.size());
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        CHECK(loaded.samples[i].attr == data.samples[i].attr);
        CHECK(loaded.samples[i].obj == data.samples[i].obj);
        CHECK(loaded.samples[i].split == data.samples[i].split);
        CHECK(std::memcmp(loaded.samples[i].feature.data(), data.samples[i].feature.data(),
                          7 * sizeof(double)) == 0);
    }
    CHECK(loaded.space.seen == data.space.seen);
    CHECK(loaded.space.unseen == data.space.unseen);

    // writing the loaded dataset again gives the identical file
    auto path2 = temp_path("df_roundtrip2.txt");
    save_dataset(loaded, path2);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("binary round-trip goes through f32 rows") {
    SynthSpec spec;
    spec.num_attrs = 3;
    spec.num_objs = 3;
    spec.feature_dim = 5;
    spec.train_per_concept = 2;
    spec.seed = 12;
    Dataset data = generate_synthetic(spec);
    auto path = temp_path("df_bin.txt");
    save_dataset(data, path, /*binary=*/true);
    Dataset loaded = load_feature_dataset(path);
    REQUIRE(loaded.samples.size() == data.samples.size());
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(loaded.samples[i].feature[j] ==
                  static_cast<double>(static_cast<float>(data.samples[i].feature[j])));
}

TEST_CASE("minimal 2-concept manifest with 4 rows parses") {
    auto path = temp_path("df_min.txt");
    {
        std::ofstream out(path);
        out << "attrs: red\n";
        out << "objs: apple,pear\n";
        out << "feature_dim: 2\n";
        out << "seen: red|apple;red|pear\n";
        out << "unseen:\n";
        out << "train,red,apple,0.5,1.5\n";
        out << "train,red,apple,0.25,0.75\n";
        out << "train,red,pear,-1,2\n";
        out << "train,red,pear,0,0\n";
    }
    Dataset data = load_feature_dataset(path);
    CHECK(data.samples.size() == 4);
    CHECK(data.feature_dim == 2);
    CHECK(data.samples[0].feature == Vec{0.5, 1.5});
    CHECK(data.space.unseen.empty());
}

TEST_CASE("loader rejects a train row labeled with an unseen concept, naming the row") {
    auto path = temp_path("df_badtrain.txt");
    {
        std::ofstream out(path);
        out << "attrs: red,green\nobjs: apple\nfeature_dim: 1\n";
        out << "seen: red|apple\nunseen: green|apple\n";
        out << "train,red,apple,1\n";
        out << "train,green,apple,2\n";
        out << "val,red,apple,1\nval,green,apple,1\n";
    }
    try {
        load_feature_dataset(path);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("train row 1") != std::string::npos);
        CHECK(std::string(e.what()).find("green") != std::string::npos);
    }
}

TEST_CASE("loader rejects rows with the wrong feature width") {
    auto path = temp_path("df_badwidth.txt");
    {
        std::ofstream out(path);
        out << "attrs: red\nobjs: apple\nfeature_dim: 3\n";
        out << "seen: red|apple\nunseen:\n";
        out << "train,red,apple,1,2\n";
    }
    CHECK_THROWS_AS(load_feature_dataset(path), FormatError);
}

TEST_CASE("loader enforces mixed val/test splits") {
    auto path = temp_path("df_unmixed.txt");
    {
        std::ofstream out(path);
        out << "attrs: red,green\nobjs: apple\nfeature_dim: 1\n";
        out << "seen: red|apple\nunseen: green|apple\n";
        out << "train,red,apple,1\n";
        out << "val,red,apple,1\n";  // val lacks any unseen sample
    }
    CHECK_THROWS_AS(load_feature_dataset(path), ValidationError);
}

TEST_CASE("sample_negatives is forced in degenerate spaces") {
    ConceptSpace space;
    space.attributes = {"a0", "a1"};
    space.objects = {"o0", "o1"};
    space.seen = {{0, 0}, {1, 1}};
    space.unseen = {{0, 1}, {1, 0}};
    Rng rng(13);
    std::vector<ConceptId> labels{{0, 0}, {1, 1}, {0, 0}};
    auto negs = sample_negatives(labels, space, rng);
    CHECK(negs.neg_obj == std::vector<int>{1, 0, 1});           // the only other object
    CHECK(negs.neg_concept[0] == ConceptId{1, 1});              // the only other seen concept
    CHECK(negs.neg_concept[1] == ConceptId{0, 0});
}

TEST_CASE("negative objects never equal positives over exhaustive small spaces") {
    ConceptSpace space;
    space.attributes = {"a0", "a1", "a2"};
    space.objects = {"o0", "o1", "o2"};
    space.seen = {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {2, 1}};
    space.unseen = {{1, 1}, {1, 2}, {2, 0}, {2, 2}};
    Rng rng(14);
    std::vector<ConceptId> labels;
    for (const auto& c : space.seen)
        for (int k = 0; k < 50; ++k) labels.push_back(c);
    auto negs = sample_negatives(labels, space, rng);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        CHECK(negs.neg_obj[i] != labels[i].second);
        CHECK(negs.neg_concept[i] != labels[i]);
        CHECK(space.is_seen(negs.neg_concept[i].first, negs.neg_concept[i].second));
    }
}

TEST_CASE("negative objects are uniform over the non-positive objects") {
    ConceptSpace space;
    for (int i = 0; i < 10; ++i) space.objects.push_back("o" + std::to_string(i));
    space.attributes = {"a0"};
    for (int i = 0; i < 10; ++i) space.seen.push_back({0, i});
    Rng rng(15);
    std::vector<ConceptId> labels(1000, ConceptId{0, 3});
    auto negs = sample_negatives(labels, space, rng);
    std::vector<int> counts(10, 0);
    for (int o : negs.neg_obj) ++counts[o];
    CHECK(counts[3] == 0);
    for (int o = 0; o < 10; ++o) {
        if (o == 3) continue;
        double freq = counts[o] / 1000.0;
        CHECK(freq > 1.0 / 9.0 - 0.03);
        CHECK(freq < 1.0 / 9.0 + 0.03);
    }
}

TEST_CASE("dataset read accounting tracks splits") {
    SynthSpec spec;
    spec.num_attrs = 3;
    spec.num_objs = 3;
    spec.train_per_concept = 2;
    spec.seed = 16;
    Dataset data = generate_synthetic(spec);
    auto before = data.read_counts();
    auto train = data.split_indices(Split::Train);
    data.sample(train[0]);
    data.sample(train[1]);
    auto after = data.read_counts();
    CHECK(after[0] == before[0] + 2);
    CHECK(after[1] == before[1]);
    CHECK(after[2] == before[2]);
}
