#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include "fcl/rng.hpp"
#include "fcl/tensor.hpp"

namespace fcl {

// Unit-norm embedding tagged with its provenance. The only value that ever
// crosses a client boundary.
struct Feature {
    Vec64 vec;  // unit norm, embed_dim
    std::uint32_t client_id = 0;
    std::uint32_t volume_id = 0;
    std::uint16_t partition_id = 0;

    bool operator==(const Feature&) const = default;
};

// Fixed-capacity FIFO queue of features. Holds exactly the `capacity` most
// recent entries once full; insertion order is preserved.
class MemoryBank {
public:
    explicit MemoryBank(std::size_t capacity);

    // Appends f, evicting the oldest entry when full. Throws DimensionError
    // if f's embedding length differs from existing entries.
    void push(Feature f);

    const std::deque<Feature>& entries() const { return entries_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    bool full() const { return entries_.size() == capacity_; }

private:
    std::size_t capacity_;
    std::size_t embed_dim_ = 0;  // fixed by the first push
    std::deque<Feature> entries_;
};

// Concatenates local entries then each remote bank's entries, in order, with
// no deduplication. The pooled negatives all local training draws from.
std::vector<Feature> aggregate_banks(const MemoryBank& local,
                                     const std::vector<const MemoryBank*>& remotes);

// Draws exactly k features uniformly WITHOUT replacement. Deterministic
// given the rng state. Throws InsufficientPoolError when |pool| < k.
std::vector<Feature> sample_negatives(const std::vector<Feature>& pool, std::size_t k, Rng& rng);

// One augmented slice after both encoder passes: the main-encoder output is
// the anchor, the momentum-encoder output is the key.
struct AugmentedPairFeatures {
    Feature anchor;
    Feature key;
};

// Local positives for a cross-volume pair from the same partition: both
// anchors share the positive set {key_i, key_j}. Throws ProtocolError when
// the partitions differ or the two slices come from the same volume.
std::vector<Vec64> build_local_positives(const AugmentedPairFeatures& volume_i,
                                         const AugmentedPairFeatures& volume_j);

// Features of the sampled pool that share the anchor's partition. May be
// empty. The pool members double as negatives; no exclusion is applied.
std::vector<Feature> remote_positives(const Feature& q, const std::vector<Feature>& pool);

struct LossResult {
    double loss = 0.0;
    Vec64 grad_q;
};

// InfoNCE-style loss of one anchor against its positives, each scored
// over the shared negative pool:
//   loss = -(1/|P|) sum_{k+} log( exp(q.k+/tau) /
//                                 (exp(q.k+/tau) + sum_n exp(q.n/tau)) )
// grad_q is the analytic gradient with respect to q. Pre-normalization
// chaining happens in encoder backward().
LossResult contrastive_loss(const Vec64& q, const std::vector<Vec64>& positives,
                            const std::vector<Vec64>& negatives, double tau);

struct FinalLossResult {
    double loss = 0.0;
    double local_term = 0.0;
    double remote_term = 0.0;  // zero when the remote positive set is empty
    Vec64 grad_q;
};

// Per-anchor training loss: the remote-positive term plus the local-positive
// term, both over the same sampled pool. An empty remote set contributes 0.
FinalLossResult final_loss(const Vec64& q, const std::vector<Vec64>& local_positives,
                           const std::vector<Vec64>& remote_positives,
                           const std::vector<Vec64>& negatives, double tau);

// One anchor with everything its loss needs.
struct AnchorInstance {
    Vec64 q;
    std::vector<Vec64> local_positives;
    std::vector<Vec64> remote_positives;
    std::vector<Vec64> negatives;
};

struct BatchLossResult {
    double mean_loss = 0.0;
    double mean_local = 0.0;
    double mean_remote = 0.0;
    std::vector<Vec64> grads;  // per anchor, already scaled by 1/|B|
};

// Arithmetic mean of the per-anchor losses; gradients scaled by 1/|B|.
BatchLossResult batch_loss(const std::vector<AnchorInstance>& batch, double tau);

}  // namespace fcl
