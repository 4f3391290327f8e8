#include "fcl/rng.hpp"

#include <cmath>
#include <numbers>

#include "fcl/errors.hpp"

namespace fcl {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words) {
    std::uint64_t s = mix64(base);
    for (std::uint64_t w : words) {
        s = mix64(s ^ mix64(w));
    }
    return s;
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) {
        throw ContractError("uniform_index: n must be positive");
    }
    const std::uint64_t range = static_cast<std::uint64_t>(n);
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t r = next_u64();
    while (r >= limit) {
        r = next_u64();
    }
    return static_cast<std::size_t>(r % range);
}

double Rng::normal(double mean, double stddev) {
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * radius * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace fcl
