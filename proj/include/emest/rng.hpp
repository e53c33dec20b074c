#ifndef EMEST_RNG_HPP
#define EMEST_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace emest::rng {

// SplitMix64 finalizer. All seed derivation in the library funnels through
// this so that streams for different purposes are decorrelated but fully
// determined by (root seed, purpose tag, counter).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Substream derivation rule (documented in the README):
//   derive(root, purpose, counter) = mix64(mix64(root ^ fnv1a(purpose)) + counter)
constexpr std::uint64_t derive(std::uint64_t root, std::string_view purpose,
                               std::uint64_t counter = 0) {
    return mix64(mix64(root ^ fnv1a(purpose)) + counter);
}

inline std::mt19937_64 engine(std::uint64_t root, std::string_view purpose,
                              std::uint64_t counter = 0) {
    return std::mt19937_64(derive(root, purpose, counter));
}

// Counter-based uniform draw: the value for index i does not depend on how
// many draws happened before it, so per-sample coin flips are independent of
// iteration order (and safe to evaluate from any thread).
constexpr std::uint64_t bits_at(std::uint64_t stream_seed, std::uint64_t index) {
    std::uint64_t z = stream_seed + (index + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double uniform_unit_at(std::uint64_t stream_seed, std::uint64_t index) {
    return static_cast<double>(bits_at(stream_seed, index) >> 11) * 0x1.0p-53;
}

} // namespace emest::rng

#endif
