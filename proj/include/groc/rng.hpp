#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace groc {

using Rng = std::mt19937_64;

// Purposes keep streams for different random decisions independent, so that
// e.g. enabling edge dropping never shifts the feature masks.
enum class StreamPurpose : std::uint64_t {
    init = 1,
    partition = 2,
    feature_mask = 3,
    edge_drop = 4,
    sbm_edges = 5,
    sbm_features = 6,
    sbm_splits = 7,
    probe = 8,
    surrogate = 9,
    targets = 10,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic stream keyed by (seed, purpose, k0, k1, ...).
inline Rng make_stream(std::uint64_t seed, StreamPurpose purpose,
                       std::initializer_list<std::uint64_t> keys = {}) {
    std::uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    for (auto k : keys) h = splitmix64(h ^ (k + 0x2545f4914f6cdd1dULL));
    return Rng(h);
}

// Uniform double in [0, 1) built from the top 53 bits; portable across
// standard libraries, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

// Uniform index in [0, n) by multiply-high.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(rng()) * static_cast<unsigned __int128>(n)) >> 64);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace groc
