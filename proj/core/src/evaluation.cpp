#include "fcl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>

#include "fcl/errors.hpp"

namespace fcl {

void ProbeConfig::validate(std::size_t volumes_per_client) const {
    if (labeled_volumes < 1 || labeled_volumes > volumes_per_client - 1) {
        throw ConfigError("ProbeConfig: N must lie in [1, volumes_per_client - 1]");
    }
    if (folds < 2) {
        throw ConfigError("ProbeConfig: folds must be >= 2");
    }
    if (folds > volumes_per_client) {
        throw ConfigError("ProbeConfig: folds must be <= volumes_per_client");
    }
    if (epochs < 1 || !(lr > 0.0)) {
        throw ConfigError("ProbeConfig: epochs and lr must be positive");
    }
    if (finetune_encoder && !(finetune_lr > 0.0)) {
        throw ConfigError("ProbeConfig: finetune_lr must be positive");
    }
}

namespace {

struct ProbeHead {
    Mat64 w;  // classes x dim
    Vec64 b;  // classes
};

Vec64 probe_logits(const ProbeHead& head, const Vec64& x) {
    Vec64 logits = matvec(head.w, x);
    for (std::size_t c = 0; c < logits.size(); ++c) {
        logits[c] += head.b[c];
    }
    return logits;
}

Vec64 softmax(const Vec64& logits) {
    const double hi = *std::max_element(logits.begin(), logits.end());
    Vec64 p(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        p[c] = std::exp(logits[c] - hi);
        sum += p[c];
    }
    for (double& v : p) {
        v /= sum;
    }
    return p;
}

std::size_t argmax(const Vec64& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double score(const ProbeHead& head, const std::vector<Vec64>& xs,
             const std::vector<std::uint16_t>& ys) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (argmax(probe_logits(head, xs[i])) == ys[i]) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(xs.size());
}

void check_labels(const std::vector<std::uint16_t>& ys, std::size_t num_classes) {
    std::set<std::uint16_t> distinct(ys.begin(), ys.end());
    if (distinct.size() < 2) {
        throw ContractError("probe: degenerate training label set (single class)");
    }
    for (std::uint16_t y : ys) {
        if (y >= num_classes) {
            throw ContractError("probe: label out of range");
        }
    }
}

}  // namespace

double train_and_score_probe(const std::vector<Vec64>& train_x,
                             const std::vector<std::uint16_t>& train_y,
                             const std::vector<Vec64>& val_x,
                             const std::vector<std::uint16_t>& val_y, std::size_t num_classes,
                             std::size_t epochs, double lr) {
    if (train_x.empty() || train_x.size() != train_y.size() || val_x.size() != val_y.size() ||
        val_x.empty()) {
        throw ContractError("probe: empty or mismatched data");
    }
    check_labels(train_y, num_classes);

    const std::size_t dim = train_x.front().size();
    ProbeHead head{Mat64(num_classes, dim), Vec64(num_classes, 0.0)};
    const double inv_n = 1.0 / static_cast<double>(train_x.size());

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        Mat64 grad_w(num_classes, dim);
        Vec64 grad_b(num_classes, 0.0);
        for (std::size_t i = 0; i < train_x.size(); ++i) {
            Vec64 p = softmax(probe_logits(head, train_x[i]));
            p[train_y[i]] -= 1.0;
            add_outer(grad_w, p, train_x[i], inv_n);
            for (std::size_t c = 0; c < num_classes; ++c) {
                grad_b[c] += inv_n * p[c];
            }
        }
        for (std::size_t k = 0; k < head.w.data.size(); ++k) {
            head.w.data[k] -= lr * grad_w.data[k];
        }
        for (std::size_t c = 0; c < num_classes; ++c) {
            head.b[c] -= lr * grad_b[c];
        }
    }
    return score(head, val_x, val_y);
}

namespace {

struct EmbeddedSlice {
    Vec64 embedding;
    std::uint16_t label = 0;
};

// Joint training of head + an encoder copy, for the optional fine-tune arm.
// Re-embeds raw slices every epoch.
double finetune_and_score(const EncoderParams& frozen, const std::vector<const Vec64*>& train_raw,
                          const std::vector<std::uint16_t>& train_y,
                          const std::vector<const Vec64*>& val_raw,
                          const std::vector<std::uint16_t>& val_y, std::size_t num_classes,
                          const ProbeConfig& cfg) {
    check_labels(train_y, num_classes);
    EncoderParams encoder = frozen;
    ProbeHead head{Mat64(num_classes, frozen.dims.embed), Vec64(num_classes, 0.0)};
    const double inv_n = 1.0 / static_cast<double>(train_raw.size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Mat64 grad_w(num_classes, frozen.dims.embed);
        Vec64 grad_b(num_classes, 0.0);
        EncoderParams grad_enc = EncoderParams::zeros(encoder.dims);
        for (std::size_t i = 0; i < train_raw.size(); ++i) {
            const ForwardResult out = forward(encoder, *train_raw[i]);
            Vec64 p = softmax(probe_logits(head, out.embedding));
            p[train_y[i]] -= 1.0;
            add_outer(grad_w, p, out.embedding, inv_n);
            for (std::size_t c = 0; c < num_classes; ++c) {
                grad_b[c] += inv_n * p[c];
            }
            Vec64 grad_embedding = matvec_transpose(head.w, p);
            add_scaled(grad_enc, backward(out.tape, encoder, grad_embedding), inv_n);
        }
        for (std::size_t k = 0; k < head.w.data.size(); ++k) {
            head.w.data[k] -= cfg.lr * grad_w.data[k];
        }
        for (std::size_t c = 0; c < num_classes; ++c) {
            head.b[c] -= cfg.lr * grad_b[c];
        }
        encoder = sgd_step(encoder, grad_enc, cfg.finetune_lr);
    }

    std::size_t hits = 0;
    for (std::size_t i = 0; i < val_raw.size(); ++i) {
        const ForwardResult out = forward(encoder, *val_raw[i]);
        if (argmax(probe_logits(head, out.embedding)) == val_y[i]) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(val_raw.size());
}

}  // namespace

FoldSplit probe_fold_split(std::size_t volumes_per_client, const ProbeConfig& cfg,
                           std::uint64_t seed, std::size_t fold, std::size_t client) {
    if (fold >= cfg.folds) {
        throw ContractError("probe_fold_split: fold out of range");
    }
    FoldSplit split;
    std::vector<std::size_t> candidates;
    for (std::size_t v = 0; v < volumes_per_client; ++v) {
        if (v % cfg.folds == fold) {
            split.validation.push_back(v);
        } else {
            candidates.push_back(v);
        }
    }
    Rng rng(derive_seed(seed, {kSeedTagProbe, fold, client}));
    for (std::size_t pick = 0; pick < cfg.labeled_volumes && pick < candidates.size(); ++pick) {
        const std::size_t j = pick + rng.uniform_index(candidates.size() - pick);
        std::swap(candidates[pick], candidates[j]);
        split.labeled.push_back(candidates[pick]);
    }
    return split;
}

std::vector<double> probe_fold_accuracies(const EncoderParams& encoder,
                                          const std::vector<std::vector<Volume>>& dataset,
                                          const PartitionSpec& spec, const ProbeConfig& cfg,
                                          std::uint64_t seed) {
    if (dataset.empty() || dataset.front().empty()) {
        throw ContractError("probe: empty dataset");
    }
    const std::size_t volumes_per_client = dataset.front().size();
    cfg.validate(volumes_per_client);
    if (encoder.dims.input != dataset.front().front().slices.front().size()) {
        throw DimensionError("probe: encoder input dim does not match slice size");
    }

    std::vector<double> accuracies;
    accuracies.reserve(cfg.folds);
    for (std::size_t fold = 0; fold < cfg.folds; ++fold) {
        std::vector<const Vec64*> train_raw;
        std::vector<std::uint16_t> train_y;
        std::vector<const Vec64*> val_raw;
        std::vector<std::uint16_t> val_y;

        for (std::size_t c = 0; c < dataset.size(); ++c) {
            const std::vector<Volume>& shard = dataset[c];
            const FoldSplit split = probe_fold_split(shard.size(), cfg, seed, fold, c);
            for (std::size_t v : split.validation) {
                for (std::size_t i = 0; i < shard[v].slices.size(); ++i) {
                    val_raw.push_back(&shard[v].slices[i]);
                    val_y.push_back(spec.partition_of(i));
                }
            }
            for (std::size_t v : split.labeled) {
                for (std::size_t i = 0; i < shard[v].slices.size(); ++i) {
                    train_raw.push_back(&shard[v].slices[i]);
                    train_y.push_back(spec.partition_of(i));
                }
            }
        }

        if (cfg.finetune_encoder) {
            accuracies.push_back(finetune_and_score(encoder, train_raw, train_y, val_raw, val_y,
                                                    spec.partitions, cfg));
            continue;
        }
        std::vector<Vec64> train_x;
        train_x.reserve(train_raw.size());
        for (const Vec64* raw : train_raw) {
            train_x.push_back(forward(encoder, *raw).embedding);
        }
        std::vector<Vec64> val_x;
        val_x.reserve(val_raw.size());
        for (const Vec64* raw : val_raw) {
            val_x.push_back(forward(encoder, *raw).embedding);
        }
        accuracies.push_back(train_and_score_probe(train_x, train_y, val_x, val_y,
                                                   spec.partitions, cfg.epochs, cfg.lr));
    }
    return accuracies;
}

double linear_probe(const EncoderParams& encoder, const std::vector<std::vector<Volume>>& dataset,
                    const PartitionSpec& spec, const ProbeConfig& cfg, std::uint64_t seed) {
    const std::vector<double> accs = probe_fold_accuracies(encoder, dataset, spec, cfg, seed);
    return std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
}

FeatureGroups embed_by_partition(const EncoderParams& encoder,
                                 const std::vector<const std::vector<Volume>*>& shards,
                                 const PartitionSpec& spec) {
    FeatureGroups groups(shards.size(),
                         std::vector<std::vector<Vec64>>(spec.partitions));
    for (std::size_t c = 0; c < shards.size(); ++c) {
        for (const Volume& volume : *shards[c]) {
            for (std::size_t i = 0; i < volume.slices.size(); ++i) {
                groups[c][spec.partition_of(i)].push_back(
                    forward(encoder, volume.slices[i]).embedding);
            }
        }
    }
    return groups;
}

FeatureGroups embed_by_partition(const EncoderParams& encoder,
                                 const std::vector<std::vector<Volume>>& dataset,
                                 const PartitionSpec& spec) {
    std::vector<const std::vector<Volume>*> shards;
    shards.reserve(dataset.size());
    for (const auto& shard : dataset) {
        shards.push_back(&shard);
    }
    return embed_by_partition(encoder, shards, spec);
}

double alignment_metric(const FeatureGroups& features) {
    const std::size_t clients = features.size();
    if (clients < 2) {
        throw ContractError("alignment_metric: need >= 2 clients");
    }
    const std::size_t partitions = features.front().size();

    // Per-cell centroids; empty cells are skipped with a warning.
    std::vector<std::vector<Vec64>> centroids(clients, std::vector<Vec64>(partitions));
    std::size_t partitions_seen = 0;
    for (std::size_t s = 0; s < partitions; ++s) {
        bool seen = false;
        for (std::size_t c = 0; c < clients; ++c) {
            if (features[c].size() != partitions) {
                throw ContractError("alignment_metric: ragged partition axis");
            }
            const auto& cell = features[c][s];
            if (cell.empty()) {
                std::cerr << "alignment_metric: empty cell (client " << c << ", partition " << s
                          << ") skipped\n";
                continue;
            }
            Vec64 centroid(cell.front().size(), 0.0);
            for (const Vec64& f : cell) {
                for (std::size_t d = 0; d < centroid.size(); ++d) {
                    centroid[d] += f[d];
                }
            }
            for (double& v : centroid) {
                v /= static_cast<double>(cell.size());
            }
            centroids[c][s] = std::move(centroid);
            seen = true;
        }
        if (seen) {
            ++partitions_seen;
        }
    }
    if (partitions_seen < 2) {
        throw ContractError("alignment_metric: need >= 2 partitions with data");
    }

    auto cosine = [](const Vec64& a, const Vec64& b) -> double {
        const double na = norm(a);
        const double nb = norm(b);
        return (na > 1e-12 && nb > 1e-12) ? dot(a, b) / (na * nb) : 0.0;
    };

    double same_sum = 0.0;
    double cross_sum = 0.0;
    std::size_t same_n = 0;
    std::size_t cross_n = 0;
    for (std::size_t a = 0; a < clients; ++a) {
        for (std::size_t b = a + 1; b < clients; ++b) {
            for (std::size_t s = 0; s < partitions; ++s) {
                if (centroids[a][s].empty()) {
                    continue;
                }
                for (std::size_t t = 0; t < partitions; ++t) {
                    if (centroids[b][t].empty()) {
                        continue;
                    }
                    const double cs = cosine(centroids[a][s], centroids[b][t]);
                    if (s == t) {
                        same_sum += cs;
                        ++same_n;
                    } else {
                        cross_sum += cs;
                        ++cross_n;
                    }
                }
            }
        }
    }
    if (same_n == 0 || cross_n == 0) {
        throw ContractError("alignment_metric: not enough populated cells");
    }
    return same_sum / static_cast<double>(same_n) - cross_sum / static_cast<double>(cross_n);
}

std::vector<EvalReportRow> evaluate_encoder(const EncoderParams& encoder,
                                            const SyntheticConfig& data_cfg,
                                            const ProbeConfig& probe_cfg,
                                            const std::vector<std::size_t>& budgets,
                                            const std::vector<std::uint64_t>& seeds,
                                            const std::string& arm_label) {
    if (encoder.dims.input != data_cfg.input_dim()) {
        throw DimensionError("evaluate_encoder: checkpoint input dim " +
                             std::to_string(encoder.dims.input) + " vs dataset dim " +
                             std::to_string(data_cfg.input_dim()));
    }
    const PartitionSpec spec = data_cfg.partition_spec();
    std::vector<EvalReportRow> rows;
    for (std::uint64_t seed : seeds) {
        SyntheticConfig seeded = data_cfg;
        seeded.seed = derive_seed(seed, {kSeedTagData});
        const std::vector<std::vector<Volume>> dataset = generate_dataset(seeded);
        const double alignment = dataset.size() >= 2 && spec.partitions >= 2
                                     ? alignment_metric(embed_by_partition(encoder, dataset, spec))
                                     : 0.0;
        for (std::size_t n : budgets) {
            ProbeConfig cell_cfg = probe_cfg;
            cell_cfg.labeled_volumes = n;
            const std::vector<double> accs =
                probe_fold_accuracies(encoder, dataset, spec, cell_cfg, seed);
            for (std::size_t fold = 0; fold < accs.size(); ++fold) {
                rows.push_back(EvalReportRow{arm_label, n, seed, fold, accs[fold], alignment});
            }
        }
    }
    return rows;
}

std::vector<EvalReportRow> run_ablation(const SyntheticConfig& data_cfg,
                                        const RoundConfig& round_cfg,
                                        const ProbeConfig& probe_cfg,
                                        const std::vector<Mode>& arms,
                                        const std::vector<std::size_t>& budgets,
                                        const std::vector<std::uint64_t>& seeds) {
    if (arms.empty() || budgets.empty() || seeds.empty()) {
        throw ContractError("run_ablation: arms, budgets and seeds must be non-empty");
    }
    std::vector<EvalReportRow> rows;
    for (Mode arm : arms) {
        RoundConfig arm_cfg = round_cfg;
        arm_cfg.mode = arm;
        for (std::uint64_t seed : seeds) {
            const ExperimentResult trained = run_experiment(data_cfg, arm_cfg, seed);
            const std::vector<EvalReportRow> cell =
                evaluate_encoder(trained.final_params, data_cfg, probe_cfg, budgets, {seed},
                                 to_string(arm));
            rows.insert(rows.end(), cell.begin(), cell.end());
        }
    }
    return rows;
}

}  // namespace fcl
