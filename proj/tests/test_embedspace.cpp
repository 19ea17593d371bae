#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tce/embedspace.hpp"

using namespace tce;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

}  // namespace

TEST_CASE("load_word_vectors parses a small file") {
    auto path = write_temp("wv_ok.txt", "red 1.0 0.0 0.5\napple -1 2 3\n");
    auto table = load_word_vectors(path, {"red", "apple"}, 0);
    CHECK(table.dim == 3);
    CHECK(table.tokens.size() == 2);
    CHECK(table.fallback_count == 0);
    CHECK(table.vec(table.index_of("red"))[2] == doctest::Approx(0.5));
    CHECK(table.vec(table.index_of("apple"))[0] == doctest::Approx(-1.0));
}

TEST_CASE("load_word_vectors falls back for missing tokens") {
    auto path = write_temp("wv_missing.txt", "red 1.0 0.0 0.5\n");
    auto table = load_word_vectors(path, {"red", "banana"}, 42);
    CHECK(table.fallback_count == 1);
    auto v = table.vec(table.index_of("banana"));
    for (double x : v) {
        CHECK(x >= -0.1);
        CHECK(x <= 0.1);
    }
    // deterministic given the fallback seed
    auto again = load_word_vectors(path, {"red", "banana"}, 42);
    CHECK(std::equal(v.begin(), v.end(), again.vec(again.index_of("banana")).begin()));
}

TEST_CASE("load_word_vectors rejects inconsistent dimensions") {
    auto path = write_temp("wv_bad.txt", "red 1.0 0.0 0.5\napple 1 2 3 4\n");
    CHECK_THROWS_AS(load_word_vectors(path, {"red"}, 0), FormatError);
}

TEST_CASE("load_word_vectors reports unreadable files") {
    CHECK_THROWS_AS(load_word_vectors("/nonexistent/wv.txt", {"a"}, 0), IoError);
}

TEST_CASE("concept_semantic adds the two embeddings") {
    Vec a{1.0, 0.0}, o{0.0, 1.0};
    CHECK(concept_semantic(a, o) == Vec{1.0, 1.0});
    Vec zero{0.0, 0.0};
    CHECK(concept_semantic(zero, o) == o);
    CHECK_THROWS_AS(concept_semantic(Vec{1.0}, o), ShapeError);
}

TEST_CASE("concept_semantic is order independent") {
    Rng rng(3);
    Vec a(300), o(300);
    for (double& x : a) x = rng.uniform(-1, 1);
    for (double& x : o) x = rng.uniform(-1, 1);
    Vec ao = concept_semantic(a, o);
    Vec oa = concept_semantic(o, a);
    CHECK(ao == oa);
    for (std::size_t i = 0; i < ao.size(); ++i) CHECK(ao[i] == doctest::Approx(a[i] + o[i]).epsilon(1e-15));
}

TEST_CASE("split_concepts 2x2 at fraction 0.5") {
    Rng rng(7);
    auto space = split_concepts({"a0", "a1"}, {"o0", "o1"}, 0.5, rng);
    CHECK(space.seen.size() == 2);
    CHECK(space.unseen.size() == 2);
    for (const auto& c : space.seen) CHECK_FALSE(space.is_unseen(c.first, c.second));
    space.validate();
}

TEST_CASE("split_concepts rejects uncoverable fractions") {
    Rng rng(7);
    // 10% of 3x3 = 1 seen concept: cannot cover 3 attributes
    CHECK_THROWS_AS(split_concepts({"a0", "a1", "a2"}, {"o0", "o1", "o2"}, 0.1, rng), ConfigError);
}

TEST_CASE("split_concepts is deterministic given the seed") {
    std::vector<std::string> attrs, objs;
    for (int i = 0; i < 16; ++i) attrs.push_back("a" + std::to_string(i));
    for (int i = 0; i < 12; ++i) objs.push_back("o" + std::to_string(i));
    Rng r1(99), r2(99);
    auto s1 = split_concepts(attrs, objs, 0.6, r1);
    auto s2 = split_concepts(attrs, objs, 0.6, r2);
    CHECK(s1.seen == s2.seen);
    CHECK(s1.unseen == s2.unseen);
    CHECK(static_cast<int>(s1.seen.size()) == static_cast<int>(std::lround(0.6 * 16 * 12)));
}

TEST_CASE("generated splits satisfy the space invariants") {
    std::vector<std::string> attrs{"a0", "a1", "a2", "a3", "a4"};
    std::vector<std::string> objs{"o0", "o1", "o2", "o3"};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        auto space = split_concepts(attrs, objs, 0.55, rng);
        space.validate();  // disjointness + coverage
        CHECK(space.seen.size() + space.unseen.size() == attrs.size() * objs.size());
        auto all = space.all_concepts();
        CHECK(std::is_sorted(all.begin(), all.end()));
    }
}
