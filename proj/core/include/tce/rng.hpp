#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tce {

/// Seeded random source. Every run derives all of its randomness from one
/// master seed through named sub-streams (`data`, `init`, `sampling`, ...),
/// so individual components can be re-seeded or perturbed independently.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Child stream whose seed depends only on (master_seed, name).
    static Rng stream(std::uint64_t master_seed, std::string_view name) {
        return Rng(derive_seed(master_seed, name));
    }

    static std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view name) {
        // FNV-1a over the name, mixed with the master seed via splitmix64.
        std::uint64_t h = 1469598103934665603ull;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return splitmix64(master_seed ^ h);
    }

    std::uint64_t next() { return engine_(); }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> dist(lo, hi);
        return dist(engine_);
    }

    double gaussian(double mean = 0.0, double sigma = 1.0) {
        std::normal_distribution<double> dist(mean, sigma);
        return dist(engine_);
    }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        std::uniform_int_distribution<int> dist(lo, hi);
        return dist(engine_);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace tce
