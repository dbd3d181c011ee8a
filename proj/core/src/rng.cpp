#include "masklab/rng.hpp"

namespace masklab {

std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage_tag) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
    for (unsigned char c : stage_tag) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return mix64(root_seed ^ h);
}

std::uint64_t Rng::bounded(std::uint64_t n) {
    // Lemire multiply-shift reduction.
    const auto wide = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(wide >> 64);
}

}  // namespace masklab
