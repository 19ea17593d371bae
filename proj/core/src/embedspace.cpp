#include "tce/embedspace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace tce {

bool ConceptSpace::is_seen(int attr, int obj) const {
    return std::binary_search(seen.begin(), seen.end(), ConceptId{attr, obj});
}

bool ConceptSpace::is_unseen(int attr, int obj) const {
    return std::binary_search(unseen.begin(), unseen.end(), ConceptId{attr, obj});
}

std::vector<ConceptId> ConceptSpace::all_concepts() const {
    std::vector<ConceptId> all;
    all.reserve(seen.size() + unseen.size());
    std::merge(seen.begin(), seen.end(), unseen.begin(), unseen.end(), std::back_inserter(all));
    return all;
}

int ConceptSpace::attr_index(const std::string& name) const {
    auto it = std::find(attributes.begin(), attributes.end(), name);
    return it == attributes.end() ? -1 : static_cast<int>(it - attributes.begin());
}

int ConceptSpace::obj_index(const std::string& name) const {
    auto it = std::find(objects.begin(), objects.end(), name);
    return it == objects.end() ? -1 : static_cast<int>(it - objects.begin());
}

void ConceptSpace::validate() const {
    const int m = num_attributes(), n = num_objects();
    std::vector<char> attr_covered(m, 0), obj_covered(n, 0);
    auto check_bounds = [&](const ConceptId& c, const char* which) {
        if (c.first < 0 || c.first >= m || c.second < 0 || c.second >= n)
            throw ValidationError(std::string("ConceptSpace: out-of-range concept in ") + which);
    };
    for (const auto& c : seen) {
        check_bounds(c, "seen");
        attr_covered[c.first] = 1;
        obj_covered[c.second] = 1;
    }
    for (const auto& c : unseen) {
        check_bounds(c, "unseen");
        if (std::binary_search(seen.begin(), seen.end(), c))
            throw ValidationError("ConceptSpace: seen and unseen sets intersect");
    }
    if (!std::is_sorted(seen.begin(), seen.end()) || !std::is_sorted(unseen.begin(), unseen.end()))
        throw ValidationError("ConceptSpace: concept lists must be sorted");
    for (int a = 0; a < m; ++a)
        if (!attr_covered[a])
            throw ValidationError("ConceptSpace: attribute '" + attributes[a] + "' has no seen concept");
    for (int o = 0; o < n; ++o)
        if (!obj_covered[o])
            throw ValidationError("ConceptSpace: object '" + objects[o] + "' has no seen concept");
}

int WordVecTable::index_of(const std::string& token) const {
    auto it = std::find(tokens.begin(), tokens.end(), token);
    if (it == tokens.end()) throw IndexError("WordVecTable: unknown token '" + token + "'");
    return static_cast<int>(it - tokens.begin());
}

WordVecTable load_word_vectors(const std::string& path, const std::vector<std::string>& required_tokens,
                               std::uint64_t fallback_seed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open word-vector file: " + path);

    // first pass: keep only rows we need
    std::vector<std::string> wanted(required_tokens);
    std::vector<Vec> found(wanted.size());
    std::vector<char> have(wanted.size(), 0);
    int dim = -1;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream iss(line);
        std::string token;
        iss >> token;
        Vec v;
        double x;
        while (iss >> x) v.push_back(x);
        if (v.empty()) throw FormatError(path + ":" + std::to_string(line_no) + ": no vector values");
        if (dim < 0)
            dim = static_cast<int>(v.size());
        else if (static_cast<int>(v.size()) != dim)
            throw FormatError(path + ":" + std::to_string(line_no) + ": dimension " +
                              std::to_string(v.size()) + " != " + std::to_string(dim));
        auto it = std::find(wanted.begin(), wanted.end(), token);
        if (it != wanted.end()) {
            std::size_t idx = static_cast<std::size_t>(it - wanted.begin());
            found[idx] = std::move(v);
            have[idx] = 1;
        }
    }
    if (dim < 0) throw FormatError(path + ": no vector lines");

    WordVecTable table;
    table.dim = dim;
    table.tokens = wanted;
    table.data = Mat(static_cast<int>(wanted.size()), dim);
    Rng fallback(fallback_seed);
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        auto row = table.data.row(static_cast<int>(i));
        if (have[i]) {
            std::copy(found[i].begin(), found[i].end(), row.begin());
        } else {
            for (double& x : row) x = fallback.uniform(-0.1, 0.1);
            ++table.fallback_count;
        }
    }
    return table;
}

WordVecTable random_word_table(const std::vector<std::string>& tokens, int dim, Rng& rng) {
    WordVecTable table;
    table.dim = dim;
    table.tokens = tokens;
    table.data = Mat(static_cast<int>(tokens.size()), dim);
    for (double& x : table.data.a) x = rng.uniform(-0.1, 0.1);
    table.fallback_count = static_cast<int>(tokens.size());
    return table;
}

Vec concept_semantic(std::span<const double> e_a, std::span<const double> e_o) {
    return vsum(e_a, e_o);
}

ConceptSpace split_concepts(std::vector<std::string> attributes, std::vector<std::string> objects,
                            double seen_fraction, Rng& rng, int max_retries) {
    const int m = static_cast<int>(attributes.size());
    const int n = static_cast<int>(objects.size());
    if (m < 1 || n < 1) throw ConfigError("split_concepts: empty attribute or object set");
    if (!(seen_fraction > 0.0 && seen_fraction < 1.0))
        throw ConfigError("split_concepts: seen_fraction must be in (0,1)");
    const int total = m * n;
    const int n_seen = static_cast<int>(std::lround(seen_fraction * total));
    if (n_seen < 1 || n_seen >= total)
        throw ConfigError("split_concepts: fraction yields empty seen or unseen set");
    if (n_seen < std::max(m, n))
        throw ConfigError("split_concepts: seen set too small to cover every attribute and object");

    std::vector<int> ids(total);
    for (int i = 0; i < total; ++i) ids[i] = i;

    for (int attempt = 0; attempt < max_retries; ++attempt) {
        rng.shuffle(ids);
        std::vector<char> attr_covered(m, 0), obj_covered(n, 0);
        for (int i = 0; i < n_seen; ++i) {
            attr_covered[ids[i] / n] = 1;
            obj_covered[ids[i] % n] = 1;
        }
        bool ok = std::all_of(attr_covered.begin(), attr_covered.end(), [](char c) { return c; }) &&
                  std::all_of(obj_covered.begin(), obj_covered.end(), [](char c) { return c; });
        if (!ok) continue;

        ConceptSpace space;
        space.attributes = std::move(attributes);
        space.objects = std::move(objects);
        for (int i = 0; i < total; ++i) {
            ConceptId c{ids[i] / n, ids[i] % n};
            (i < n_seen ? space.seen : space.unseen).push_back(c);
        }
        std::sort(space.seen.begin(), space.seen.end());
        std::sort(space.unseen.begin(), space.unseen.end());
        space.validate();
        return space;
    }
    throw ConfigError("split_concepts: no covering split found within retry budget");
}

}  // namespace tce
