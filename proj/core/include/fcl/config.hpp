#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcl/data.hpp"
#include "fcl/evaluation.hpp"
#include "fcl/federation.hpp"

namespace fcl {

// Resolved run configuration: the union of the dataset, pre-training and
// probe settings plus experiment-level lists. Parsed from a flat key=value
// file; unknown or duplicate keys are rejected, `seed` is the one required
// key (a --seed flag may stand in for it).
struct RunConfig {
    SyntheticConfig data;
    RoundConfig round;
    ProbeConfig probe;

    std::vector<Mode> arms = all_modes();            // evaluate: ablation arms
    std::vector<std::size_t> budgets = {1, 2, 4};    // evaluate: label budgets N
    std::vector<std::uint64_t> eval_seeds = {1, 2, 3};

    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = "out";

    void validate() const;  // throws ConfigError naming the offending field
};

// Parses key=value lines ('#' starts a comment). Throws ConfigError naming
// the key for unknown keys, duplicates, and malformed values.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Fully resolved, fixed-order key=value listing of a config. Two configs
// with equal canonical text run identically.
std::string canonical_config_text(const RunConfig& cfg);

// FNV-1a 64-bit hash of the canonical text, as 16 hex digits.
std::string config_hash_hex(const RunConfig& cfg);

// The documented key list, for error messages and the README.
const std::vector<std::string>& config_keys();

}  // namespace fcl
