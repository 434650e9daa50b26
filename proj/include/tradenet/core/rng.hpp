#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace tradenet {

/// Counter-based generator. Output k of a stream is
///   splitmix64_mix(seed + (k + 1) * 0x9E3779B97F4A7C15)
/// which is exactly the SplitMix64 sequence, so any platform with 64-bit
/// unsigned arithmetic reproduces the same stream from the same seed.
/// Doubles take the top 53 bits; normals use one Box-Muller pair per draw
/// (the sine branch is discarded so each draw consumes exactly two outputs).
class Rng {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        ++counter_;
        return mix(seed_ + counter_ * kGamma);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    double normal() {
        // 1 - u keeps the log argument in (0, 1].
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Independent child stream; the parent is not advanced.
    Rng split(std::uint64_t stream) const {
        return Rng(mix(seed_ ^ mix(stream + 0x632BE59BD9B4E019ULL)));
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace tradenet
