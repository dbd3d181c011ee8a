#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace masklab {

/// splitmix64 finalizer. Stable across platforms; used wherever a raw
/// 64-bit value has to become a well-mixed seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Seed for a named pipeline stage: mix64(root XOR fnv1a64(tag)).
/// Adding stages never perturbs the randomness of existing ones.
std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage_tag);

/// Deterministic RNG. mt19937_64 output is fully specified by the standard,
/// and the double/bounded conversions below avoid the implementation-defined
/// std::uniform_*_distribution, so streams are identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t bounded(std::uint64_t n);

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace masklab
