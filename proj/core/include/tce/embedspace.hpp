#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tce/rng.hpp"
#include "tce/tensor.hpp"

namespace tce {

using ConceptId = std::pair<int, int>;  // (attribute index, object index)

/// Attribute/object vocabularies plus the disjoint seen/unseen concept split.
struct ConceptSpace {
    std::vector<std::string> attributes;
    std::vector<std::string> objects;
    std::vector<ConceptId> seen;    // sorted lexicographically
    std::vector<ConceptId> unseen;  // sorted lexicographically

    int num_attributes() const { return static_cast<int>(attributes.size()); }
    int num_objects() const { return static_cast<int>(objects.size()); }

    bool is_seen(int attr, int obj) const;
    bool is_unseen(int attr, int obj) const;
    /// seen ∪ unseen, sorted lexicographically; the canonical concept
    /// enumeration used by galleries and score matrices.
    std::vector<ConceptId> all_concepts() const;

    int attr_index(const std::string& name) const;  // -1 when absent
    int obj_index(const std::string& name) const;

    /// Disjointness, bounds, and seen-set coverage of every attribute and
    /// object. Throws ValidationError on violation.
    void validate() const;
};

/// Word-embedding rows for an ordered token list. Rows are the trainable
/// parameters when `trainable` is set; lookups for registered tokens never
/// fail after construction.
struct WordVecTable {
    int dim = 0;
    std::vector<std::string> tokens;
    Mat data;  // one row per token
    bool trainable = true;
    int fallback_count = 0;  // tokens absent from the source file

    int index_of(const std::string& token) const;  // throws IndexError if absent
    std::span<const double> vec(int idx) const { return data.row(idx); }
    std::span<double> vec(int idx) { return data.row(idx); }
};

/// Parses the text word-vector format (`token v1 ... vD` per line) and
/// returns a table covering all required tokens. Tokens missing from the
/// file fall back to a seeded uniform init in [-0.1, 0.1] and are counted
/// in fallback_count.
WordVecTable load_word_vectors(const std::string& path, const std::vector<std::string>& required_tokens,
                               std::uint64_t fallback_seed);

/// Fallback-only table: every token seeded uniform in [-0.1, 0.1].
WordVecTable random_word_table(const std::vector<std::string>& tokens, int dim, Rng& rng);

/// e_c = e_a + e_o.
Vec concept_semantic(std::span<const double> e_a, std::span<const double> e_o);

/// Samples |seen| = round(fraction * m * n) concepts, retrying until the
/// seen set covers every attribute and object at least once. Deterministic
/// given the rng state. Throws ConfigError when no covering split is found
/// within the retry budget.
ConceptSpace split_concepts(std::vector<std::string> attributes, std::vector<std::string> objects,
                            double seen_fraction, Rng& rng, int max_retries = 1000);

}  // namespace tce
