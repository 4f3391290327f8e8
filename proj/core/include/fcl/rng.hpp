#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace fcl {

// splitmix64 finalizer. Used to turn structured ids into well-mixed seeds.
std::uint64_t mix64(std::uint64_t x);

// Derives an independent stream seed from a base seed and a list of id words
// (client id, round index, ...). Same inputs always give the same seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> words);

// Deterministic random stream.
//
// The engine is std::mt19937_64, whose output sequence is pinned by the
// standard. The distribution transforms live here because the std::*_distribution
// classes are implementation-defined and would break cross-toolchain
// reproducibility of checkpoints and CSVs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);

    // Box-Muller transform; consumes exactly two uniform draws per call.
    double normal(double mean = 0.0, double stddev = 1.0);

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace fcl
