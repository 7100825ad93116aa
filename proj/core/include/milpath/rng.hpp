#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace milpath {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// 64-bit FNV-1a over bytes.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Counter-based SplitMix64 stream.
///
/// The n-th output (n = 1, 2, ...) of a stream seeded with s is
/// mix64(s + n * 0x9E3779B97F4A7C15). Everything derived from it (uniforms,
/// Gaussians, shuffles) is implemented here rather than through <random>
/// distributions, whose algorithms differ between standard libraries.
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        state_ += kGamma;
        return mix64(state_);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n), unbiased (rejection). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() noexcept;

    /// Independent child stream keyed by a tag; does not advance this stream.
    [[nodiscard]] SplitMix64 fork(std::uint64_t tag) const noexcept {
        return SplitMix64(mix64(state_ ^ mix64(tag + kGamma)));
    }
    [[nodiscard]] SplitMix64 fork(std::string_view tag) const noexcept { return fork(fnv1a64(tag)); }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

/// Seed for a named sub-task, e.g. derive_seed(seed, "init", fold).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) noexcept;

/// Fisher-Yates shuffle driven by SplitMix64::below.
template <class T>
void shuffle(std::span<T> items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

template <class T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
    shuffle(std::span<T>(items), rng);
}

/// `count` distinct indices drawn uniformly from [0, n), returned sorted.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, SplitMix64& rng);

}  // namespace milpath
