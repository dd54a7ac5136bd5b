#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace hfl {

// Counter-based stream derivation: every random draw in the project is keyed
// by (seed, tag words), so results do not depend on evaluation order.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed) { return mix64(seed); }

template <typename... Tags>
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
    return stream_seed(mix64(seed ^ mix64(tag)), static_cast<std::uint64_t>(rest)...);
}

using Rng = std::mt19937_64;

template <typename... Tags>
Rng make_rng(std::uint64_t seed, Tags... tags) {
    return Rng(stream_seed(seed, static_cast<std::uint64_t>(tags)...));
}

inline double uniform(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Sorted k-subset of {0..n-1} without replacement.
inline std::vector<int> sample_sorted_subset(Rng& rng, int n, int k) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) std::swap(idx[i], idx[uniform_int(rng, i, n - 1)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline std::vector<int> shuffled_range(Rng& rng, int n) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

}  // namespace hfl
