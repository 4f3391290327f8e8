#include "fcl/federation.hpp"

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>

#include "fcl/errors.hpp"
#include "fcl/evaluation.hpp"

namespace fcl {

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::random_init: return "random_init";
        case Mode::local_cl: return "local_cl";
        case Mode::fe_only: return "fe_only";
        case Mode::fe_gsm: return "fe_gsm";
    }
    throw ContractError("to_string: unknown mode");
}

Mode mode_from_string(const std::string& name) {
    for (Mode m : all_modes()) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw ConfigError("unknown mode '" + name +
                      "' (expected random_init, local_cl, fe_only, or fe_gsm)");
}

const std::vector<Mode>& all_modes() {
    static const std::vector<Mode> modes = {Mode::random_init, Mode::local_cl, Mode::fe_only,
                                            Mode::fe_gsm};
    return modes;
}

void RoundConfig::validate() const {
    if (local_steps < 1 || batch_size < 1) {
        throw ConfigError("RoundConfig: local_steps and batch_size must be >= 1");
    }
    if (!(lr > 0.0)) {
        throw ConfigError("RoundConfig: lr must be positive");
    }
    if (momentum < 0.0 || momentum > 1.0) {
        throw ConfigError("RoundConfig: momentum must lie in [0, 1]");
    }
    if (bank_capacity < 1 || bank_min_fill < 1) {
        throw ConfigError("RoundConfig: bank_capacity and bank_min_fill must be >= 1");
    }
    if (!(tau > 0.0)) {
        throw ConfigError("RoundConfig: tau must be positive");
    }
    if (hidden_dim < 1 || embed_dim < 1) {
        throw ConfigError("RoundConfig: encoder dims must be >= 1");
    }
    if (threads < 1) {
        throw ConfigError("RoundConfig: threads must be >= 1");
    }
}

EncoderParams fedavg(const std::vector<EncoderParams>& models,
                     const std::vector<double>& weights) {
    if (models.empty() || models.size() != weights.size()) {
        throw ContractError("fedavg: need one weight per model");
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            throw ContractError("fedavg: weights must be >= 0");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw ContractError("fedavg: weights sum to zero");
    }
    for (const EncoderParams& m : models) {
        if (m.dims != models.front().dims) {
            throw DimensionError("fedavg: models disagree on shapes");
        }
    }

    // Anchored form: theta_0 + sum_i w_i (theta_i - theta_0) / sum w.
    // Identical models average to exactly that model, bitwise.
    const EncoderParams& base = models.front();
    EncoderParams delta = EncoderParams::zeros(base.dims);
    for (std::size_t i = 1; i < models.size(); ++i) {
        if (weights[i] == 0.0) {
            continue;
        }
        EncoderParams diff = models[i];
        add_scaled(diff, base, -1.0);
        add_scaled(delta, diff, weights[i]);
    }
    EncoderParams out = base;
    add_scaled(out, delta, 1.0 / total);
    return out;
}

std::vector<ExchangeMessage> collect_exchange_messages(const std::vector<ClientState>& clients,
                                                       std::uint32_t round_index) {
    std::vector<ExchangeMessage> messages;
    messages.reserve(clients.size());
    for (const ClientState& client : clients) {
        ExchangeMessage msg;
        msg.sender_id = client.client_id;
        msg.round_index = round_index;
        msg.features.assign(client.local_bank.entries().begin(),
                            client.local_bank.entries().end());
        messages.push_back(std::move(msg));
    }
    return messages;
}

void exchange(std::vector<ClientState>& clients, std::uint32_t round_index, bool through_codec) {
    std::vector<ExchangeMessage> messages = collect_exchange_messages(clients, round_index);
    if (through_codec) {
        for (ExchangeMessage& msg : messages) {
            msg = decode_exchange_message(encode_exchange_message(msg));
        }
    }
    for (ClientState& client : clients) {
        client.remote_banks.clear();
        for (const ExchangeMessage& msg : messages) {
            if (msg.sender_id == client.client_id) {
                continue;
            }
            MemoryBank bank(client.local_bank.capacity());
            for (const Feature& f : msg.features) {
                bank.push(f);
            }
            client.remote_banks.emplace(msg.sender_id, std::move(bank));
        }
    }
}

namespace {

struct PendingAnchor {
    Vec64 q;
    ForwardTape tape;
    Feature tagged;  // anchor embedding with (client, volume, partition) tags
    std::vector<Vec64> local_positives;
};

std::vector<Vec64> feature_vecs(const std::vector<Feature>& features) {
    std::vector<Vec64> vecs;
    vecs.reserve(features.size());
    for (const Feature& f : features) {
        vecs.push_back(f.vec);
    }
    return vecs;
}

// Runs fn(client_index) for every client, across at most `threads` workers.
// Each call touches only its own client, so scheduling cannot change results.
void for_each_client(std::size_t count, std::size_t threads,
                     const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_workers = std::min(threads, count);
    pool.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) {
        pool.emplace_back(worker);
    }
    for (std::thread& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace

LocalTrainStats local_train(ClientState& client, const RoundConfig& cfg,
                            const PartitionSpec& spec, std::uint32_t round_index) {
    LocalTrainStats stats;
    Rng rng(derive_seed(client.seed_base, {round_index}));
    const std::size_t side = client.shard.empty() ? 0 : client.shard.front().image_side;

    for (std::size_t step = 0; step < cfg.local_steps; ++step) {
        std::vector<PendingAnchor> anchors;
        std::vector<Feature> new_keys;
        anchors.reserve(2 * cfg.batch_size);
        new_keys.reserve(2 * cfg.batch_size);

        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const auto partition = static_cast<std::uint16_t>(rng.uniform_index(spec.partitions));
            const TrainingPair pair = sample_training_pair(client.shard, spec, partition, rng);

            auto encode_views = [&](std::size_t volume_index, std::size_t slice_index) {
                const Volume& volume = client.shard[volume_index];
                const Vec64& slice = volume.slices[slice_index];
                const Vec64 anchor_view = augment(slice, side, rng);
                const Vec64 key_view = augment(slice, side, rng);
                ForwardResult main_out = forward(client.main_params, anchor_view);
                ForwardResult momentum_out = forward(client.momentum_params, key_view);
                AugmentedPairFeatures out;
                out.anchor = Feature{std::move(main_out.embedding), client.client_id,
                                     volume.volume_id, partition};
                out.key = Feature{std::move(momentum_out.embedding), client.client_id,
                                  volume.volume_id, partition};
                return std::make_pair(std::move(out), std::move(main_out.tape));
            };

            auto [views_i, tape_i] = encode_views(pair.volume_i, pair.slice_i);
            auto [views_j, tape_j] = encode_views(pair.volume_j, pair.slice_j);
            std::vector<Vec64> positives = build_local_positives(views_i, views_j);

            anchors.push_back(PendingAnchor{views_i.anchor.vec, std::move(tape_i), views_i.anchor,
                                            positives});
            anchors.push_back(PendingAnchor{views_j.anchor.vec, std::move(tape_j), views_j.anchor,
                                            std::move(positives)});
            new_keys.push_back(std::move(views_i.key));
            new_keys.push_back(std::move(views_j.key));
        }

        // Cold-start: no contrastive loss until the local bank warms up.
        if (client.local_bank.size() >= cfg.bank_min_fill) {
            std::vector<const MemoryBank*> remotes;
            if (cfg.mode == Mode::fe_only || cfg.mode == Mode::fe_gsm) {
                for (const auto& [id, bank] : client.remote_banks) {
                    remotes.push_back(&bank);
                }
            }
            const std::vector<Feature> pool = aggregate_banks(client.local_bank, remotes);
            const std::size_t k_eff = std::min(cfg.bank_capacity, pool.size());
            if (k_eff >= 1) {
                std::vector<AnchorInstance> instances;
                instances.reserve(anchors.size());
                for (const PendingAnchor& anchor : anchors) {
                    const std::vector<Feature> negatives = sample_negatives(pool, k_eff, rng);
                    AnchorInstance inst;
                    inst.q = anchor.q;
                    inst.local_positives = anchor.local_positives;
                    if (cfg.mode == Mode::fe_gsm) {
                        inst.remote_positives =
                            feature_vecs(remote_positives(anchor.tagged, negatives));
                    }
                    inst.negatives = feature_vecs(negatives);
                    instances.push_back(std::move(inst));
                }
                const BatchLossResult batch = batch_loss(instances, cfg.tau);

                EncoderParams grad = EncoderParams::zeros(client.main_params.dims);
                for (std::size_t a = 0; a < anchors.size(); ++a) {
                    add_scaled(grad,
                               backward(anchors[a].tape, client.main_params, batch.grads[a]),
                               1.0);
                }
                client.main_params = sgd_step(client.main_params, grad, cfg.lr);
                client.momentum_params =
                    momentum_update(client.momentum_params, client.main_params, cfg.momentum);

                stats.mean_loss_local += batch.mean_local;
                stats.mean_loss_remote += batch.mean_remote;
                stats.trained_steps += 1;
            }
        }

        for (Feature& key : new_keys) {
            client.local_bank.push(std::move(key));
        }
    }

    if (stats.trained_steps > 0) {
        stats.mean_loss_local /= static_cast<double>(stats.trained_steps);
        stats.mean_loss_remote /= static_cast<double>(stats.trained_steps);
    }
    return stats;
}

std::vector<RoundReportRow> run_round(std::vector<ClientState>& clients, const RoundConfig& cfg,
                                      const PartitionSpec& spec, std::uint32_t round_index) {
    cfg.validate();
    if (clients.empty()) {
        throw ContractError("run_round: no clients");
    }

    const bool exchanging = cfg.mode == Mode::fe_only || cfg.mode == Mode::fe_gsm;
    if (exchanging) {
        exchange(clients, round_index, cfg.wire_codec);
    }

    std::vector<LocalTrainStats> stats(clients.size());
    if (cfg.mode != Mode::random_init) {
        for_each_client(clients.size(), cfg.threads, [&](std::size_t i) {
            try {
                stats[i] = local_train(clients[i], cfg, spec, round_index);
            } catch (const Error& e) {
                throw Error("client " + std::to_string(clients[i].client_id) + ": " + e.what());
            }
        });

        std::vector<EncoderParams> mains;
        std::vector<EncoderParams> momenta;
        std::vector<double> weights;
        mains.reserve(clients.size());
        for (const ClientState& client : clients) {
            mains.push_back(client.main_params);
            momenta.push_back(client.momentum_params);
            weights.push_back(static_cast<double>(client.shard.size()));
        }
        const EncoderParams global_main = fedavg(mains, weights);
        const EncoderParams global_momentum = fedavg(momenta, weights);
        for (ClientState& client : clients) {
            client.main_params = global_main;
            client.momentum_params = global_momentum;
        }
    }

    // Round-level alignment of the aggregated encoder, same value on every
    // client row; undefined (0) with fewer than two clients.
    double alignment = 0.0;
    if (clients.size() >= 2 && spec.partitions >= 2) {
        std::vector<const std::vector<Volume>*> shards;
        shards.reserve(clients.size());
        for (const ClientState& client : clients) {
            shards.push_back(&client.shard);
        }
        alignment =
            alignment_metric(embed_by_partition(clients.front().main_params, shards, spec));
    }

    std::vector<RoundReportRow> rows;
    rows.reserve(clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i) {
        RoundReportRow row;
        row.round = round_index;
        row.client = clients[i].client_id;
        row.mean_loss_local = stats[i].mean_loss_local;
        row.mean_loss_remote = stats[i].mean_loss_remote;
        row.bank_fill = static_cast<double>(clients[i].local_bank.size()) /
                        static_cast<double>(clients[i].local_bank.capacity());
        row.alignment_metric = alignment;
        rows.push_back(row);
    }
    return rows;
}

std::vector<ClientState> init_clients(const std::vector<std::vector<Volume>>& dataset,
                                      const RoundConfig& cfg, const EncoderParams& init,
                                      std::uint64_t global_seed) {
    std::vector<ClientState> clients;
    clients.reserve(dataset.size());
    for (std::size_t c = 0; c < dataset.size(); ++c) {
        ClientState client;
        client.client_id = static_cast<std::uint32_t>(c);
        client.shard = dataset[c];
        client.main_params = init;
        client.momentum_params = init;
        client.local_bank = MemoryBank(cfg.bank_capacity);
        client.seed_base = derive_seed(global_seed, {kSeedTagClient, c});
        clients.push_back(std::move(client));
    }
    return clients;
}

ExperimentResult run_experiment(const SyntheticConfig& data_cfg, const RoundConfig& cfg,
                                std::uint64_t global_seed) {
    cfg.validate();
    SyntheticConfig seeded = data_cfg;
    seeded.seed = derive_seed(global_seed, {kSeedTagData});
    const std::vector<std::vector<Volume>> dataset = generate_dataset(seeded);

    EncoderDims dims{seeded.input_dim(), cfg.hidden_dim, cfg.embed_dim};
    Rng init_rng(derive_seed(global_seed, {kSeedTagInit}));
    const EncoderParams init = EncoderParams::init(dims, init_rng);

    std::vector<ClientState> clients = init_clients(dataset, cfg, init, global_seed);
    const PartitionSpec spec = seeded.partition_spec();

    ExperimentResult result;
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        std::vector<RoundReportRow> rows =
            run_round(clients, cfg, spec, static_cast<std::uint32_t>(r));
        result.report.insert(result.report.end(), rows.begin(), rows.end());
    }
    result.final_params = clients.front().main_params;
    return result;
}

}  // namespace fcl
