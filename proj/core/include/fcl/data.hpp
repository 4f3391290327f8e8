#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fcl/rng.hpp"
#include "fcl/tensor.hpp"

namespace fcl {

// One synthetic "volumetric" subject: an ordered stack of 2D slices, each a
// flattened image_side x image_side image with pixels in [0, 1]. Slice order
// along the stacking axis is the structural signal.
struct Volume {
    std::uint32_t volume_id = 0;
    std::uint32_t client_id = 0;
    std::size_t image_side = 0;
    std::vector<Vec64> slices;
};

// Maps slice indices onto S contiguous partitions:
//   partition(i) = floor(i * S / slices_per_volume).
// Monotone in the slice index; surjective when slices_per_volume >= S.
struct PartitionSpec {
    std::size_t partitions = 4;
    std::size_t slices_per_volume = 16;

    std::uint16_t partition_of(std::size_t slice_index) const;

    // Slice indices of one partition, in order.
    std::vector<std::size_t> slices_in_partition(std::uint16_t partition) const;
};

struct SyntheticConfig {
    std::size_t num_clients = 4;
    std::size_t volumes_per_client = 10;
    std::size_t slices_per_volume = 16;
    std::size_t partitions = 4;  // S
    std::size_t image_side = 8;
    // How strongly a slice follows its partition's global template versus
    // the subject's own pattern. The defaults sit where raw pixels alone do
    // not saturate a label-budgeted probe, so representation quality is
    // what gets measured.
    double template_strength = 0.6;
    double noise_sigma = 0.12;
    std::uint64_t seed = 0;

    std::size_t input_dim() const { return image_side * image_side; }
    PartitionSpec partition_spec() const { return {partitions, slices_per_volume}; }
    void validate() const;  // throws ConfigError
};

// Generates per-client volume shards. S global partition templates are drawn
// once; every slice is
//   clamp( strength * template(partition) + (1 - strength) * subject_pattern
//          + gaussian(0, sigma) )
// so the same partition looks similar across subjects by construction.
// Bit-reproducible for a fixed config.
std::vector<std::vector<Volume>> generate_dataset(const SyntheticConfig& cfg);

// Random crop to (side-2)^2 with nearest-neighbor resize back, horizontal
// flip with p = 0.5, additive gaussian pixel noise, clamp to [0, 1]. Two
// independent calls produce a positive-pair view of one slice. The rng draw
// count does not depend on noise_sigma.
Vec64 augment(const Vec64& slice, std::size_t image_side, Rng& rng, double noise_sigma = 0.05);

// Indices of a sampled cross-volume pair from one partition.
struct TrainingPair {
    std::size_t volume_i = 0;
    std::size_t volume_j = 0;
    std::size_t slice_i = 0;
    std::size_t slice_j = 0;
    std::uint16_t partition = 0;
};

// Picks two distinct volumes of the shard uniformly and one slice of the
// given partition from each. Throws InsufficientDataError with fewer than
// two volumes.
TrainingPair sample_training_pair(const std::vector<Volume>& shard, const PartitionSpec& spec,
                                  std::uint16_t partition, Rng& rng);

// Mean within-partition minus mean cross-partition cross-subject pixel
// correlation, pooled over all clients. Positive when the structural
// premise holds.
double structural_similarity_statistic(const std::vector<std::vector<Volume>>& dataset,
                                       const PartitionSpec& spec);

}  // namespace fcl
