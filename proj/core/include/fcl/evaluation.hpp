#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcl/federation.hpp"

namespace fcl {

struct ProbeConfig {
    std::size_t labeled_volumes = 1;  // N: labeled volumes per client
    std::size_t epochs = 100;
    double lr = 0.5;
    std::size_t folds = 5;
    // Optional experiment: fine-tune a copy of the encoder jointly with the
    // probe head instead of freezing it. Off by default; the caller's
    // parameters are never mutated either way.
    bool finetune_encoder = false;
    double finetune_lr = 0.02;

    void validate(std::size_t volumes_per_client) const;  // throws ConfigError
};

// Trains a linear softmax classifier with full-batch gradient descent from a
// zero initialization and returns accuracy on the validation set. Throws
// ContractError when the training labels contain a single class.
double train_and_score_probe(const std::vector<Vec64>& train_x,
                             const std::vector<std::uint16_t>& train_y,
                             const std::vector<Vec64>& val_x,
                             const std::vector<std::uint16_t>& val_y, std::size_t num_classes,
                             std::size_t epochs, double lr);

// Deterministic volume split for one (fold, client) cell: validation volumes
// are disjoint across folds; the N labeled volumes are drawn from the rest
// by seeded shuffle, so a labeled volume never validates its own fold.
struct FoldSplit {
    std::vector<std::size_t> validation;
    std::vector<std::size_t> labeled;
};

FoldSplit probe_fold_split(std::size_t volumes_per_client, const ProbeConfig& cfg,
                           std::uint64_t seed, std::size_t fold, std::size_t client);

// Label-budgeted probe protocol: per fold, each client holds out a disjoint
// validation set of volumes, N of the remaining volumes are labeled, the
// probe trains on pooled labeled embeddings and is scored on pooled held-out
// slices. Labels are slice partition ids; the encoder stays frozen.
std::vector<double> probe_fold_accuracies(const EncoderParams& encoder,
                                          const std::vector<std::vector<Volume>>& dataset,
                                          const PartitionSpec& spec, const ProbeConfig& cfg,
                                          std::uint64_t seed);

// Mean over folds of probe_fold_accuracies.
double linear_probe(const EncoderParams& encoder, const std::vector<std::vector<Volume>>& dataset,
                    const PartitionSpec& spec, const ProbeConfig& cfg, std::uint64_t seed);

// features[client][partition] = embeddings of that client's slices in that
// partition. Cells may be empty (skipped with a warning).
using FeatureGroups = std::vector<std::vector<std::vector<Vec64>>>;

FeatureGroups embed_by_partition(const EncoderParams& encoder,
                                 const std::vector<const std::vector<Volume>*>& shards,
                                 const PartitionSpec& spec);
FeatureGroups embed_by_partition(const EncoderParams& encoder,
                                 const std::vector<std::vector<Volume>>& dataset,
                                 const PartitionSpec& spec);

// Mean cross-client cosine similarity of same-partition centroids minus the
// cross-partition counterpart, in [-1, 1]. Requires at least two clients and
// two partitions with data.
double alignment_metric(const FeatureGroups& features);

// Probes one fixed encoder across budgets and seeds (each seed regenerates
// the dataset the same way pre-training would). arm_label fills the arm
// column of the report rows.
std::vector<EvalReportRow> evaluate_encoder(const EncoderParams& encoder,
                                            const SyntheticConfig& data_cfg,
                                            const ProbeConfig& probe_cfg,
                                            const std::vector<std::size_t>& budgets,
                                            const std::vector<std::uint64_t>& seeds,
                                            const std::string& arm_label);

// Full ablation cross-product: pre-trains every (arm, seed) cell with
// run_experiment, then probes every budget and fold.
std::vector<EvalReportRow> run_ablation(const SyntheticConfig& data_cfg,
                                        const RoundConfig& round_cfg,
                                        const ProbeConfig& probe_cfg,
                                        const std::vector<Mode>& arms,
                                        const std::vector<std::size_t>& budgets,
                                        const std::vector<std::uint64_t>& seeds);

}  // namespace fcl
