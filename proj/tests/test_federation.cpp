#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fcl/errors.hpp"
#include "fcl/federation.hpp"

using namespace fcl;

namespace {

SyntheticConfig tiny_data() {
    SyntheticConfig cfg;
    cfg.num_clients = 3;
    cfg.volumes_per_client = 4;
    cfg.slices_per_volume = 8;
    cfg.partitions = 4;
    cfg.image_side = 6;
    return cfg;
}

RoundConfig tiny_rounds() {
    RoundConfig cfg;
    cfg.rounds = 2;
    cfg.local_steps = 3;
    cfg.batch_size = 2;
    cfg.lr = 0.05;
    cfg.bank_capacity = 16;
    cfg.bank_min_fill = 4;
    cfg.hidden_dim = 12;
    cfg.embed_dim = 6;
    return cfg;
}

EncoderParams seeded_params(const EncoderDims& dims, std::uint64_t seed) {
    Rng rng(seed);
    return EncoderParams::init(dims, rng);
}

}  // namespace

TEST_CASE("mode names round-trip") {
    for (Mode m : all_modes()) {
        CHECK(mode_from_string(to_string(m)) == m);
    }
    CHECK_THROWS_AS(mode_from_string("bogus"), ConfigError);
}

TEST_CASE("fedavg exactness") {
    const EncoderDims dims{4, 3, 2};
    const EncoderParams a = seeded_params(dims, 1);
    const EncoderParams b = seeded_params(dims, 2);

    SUBCASE("identical models aggregate to exactly that model") {
        CHECK(fedavg({a, a, a}, {1.0, 1.0, 1.0}) == a);
        CHECK(fedavg({a, a, a}, {0.3, 0.3, 0.4}) == a);
    }

    SUBCASE("zero weight drops a model exactly") {
        CHECK(fedavg({a, b}, {1.0, 0.0}) == a);
    }

    SUBCASE("opposite models with equal weights cancel") {
        EncoderParams neg = a;
        for (double& v : neg.w1.data) v = -v;
        for (double& v : neg.b1) v = -v;
        for (double& v : neg.w2.data) v = -v;
        for (double& v : neg.b2) v = -v;
        const EncoderParams mid = fedavg({a, neg}, {1.0, 1.0});
        for (double v : mid.flatten()) {
            CHECK(v == 0.0);
        }
    }

    SUBCASE("weighted mean matches hand computation") {
        const EncoderParams mix = fedavg({a, b}, {3.0, 1.0});
        const Vec64 fa = a.flatten();
        const Vec64 fb = b.flatten();
        const Vec64 fm = mix.flatten();
        for (std::size_t i = 0; i < fm.size(); ++i) {
            CHECK(fm[i] == doctest::Approx(0.75 * fa[i] + 0.25 * fb[i]).epsilon(1e-12));
        }
    }

    SUBCASE("contract violations") {
        CHECK_THROWS_AS(fedavg({a, b}, {0.0, 0.0}), ContractError);
        CHECK_THROWS_AS(fedavg({a}, {1.0, 1.0}), ContractError);
        CHECK_THROWS_AS(fedavg({a, seeded_params({5, 3, 2}, 3)}, {1.0, 1.0}), DimensionError);
    }
}

TEST_CASE("exchange installs remote snapshots, never self") {
    const SyntheticConfig data_cfg = tiny_data();
    RoundConfig cfg = tiny_rounds();
    const auto dataset = generate_dataset(data_cfg);
    const EncoderDims dims{data_cfg.input_dim(), cfg.hidden_dim, cfg.embed_dim};
    std::vector<ClientState> clients = init_clients(dataset, cfg, seeded_params(dims, 9), 77);

    // Fill each local bank with distinguishable features.
    Rng rng(123);
    for (ClientState& client : clients) {
        for (std::size_t i = 0; i < cfg.bank_capacity; ++i) {
            Vec64 v(cfg.embed_dim);
            for (double& x : v) {
                x = rng.normal();
            }
            client.local_bank.push(Feature{l2_normalize(v), client.client_id,
                                           static_cast<std::uint32_t>(i),
                                           static_cast<std::uint16_t>(i % 4)});
        }
    }

    for (bool codec : {false, true}) {
        exchange(clients, 0, codec);
        for (const ClientState& client : clients) {
            CHECK(client.remote_banks.size() == clients.size() - 1);
            CHECK(client.remote_banks.count(client.client_id) == 0);
            std::size_t remote_features = 0;
            for (const auto& [sender, bank] : client.remote_banks) {
                remote_features += bank.size();
                for (const Feature& f : bank.entries()) {
                    CHECK(f.client_id == sender);
                }
            }
            CHECK(remote_features == (clients.size() - 1) * cfg.bank_capacity);
        }
    }

    SUBCASE("codec pass stays within f32 quantization of the direct pass") {
        exchange(clients, 1, false);
        std::vector<ClientState> through_codec = clients;
        exchange(clients, 1, false);
        exchange(through_codec, 1, true);
        const auto& direct = clients[0].remote_banks.at(1).entries();
        const auto& coded = through_codec[0].remote_banks.at(1).entries();
        REQUIRE(direct.size() == coded.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < direct.size(); ++i) {
            for (std::size_t d = 0; d < direct[i].vec.size(); ++d) {
                worst = std::max(worst, std::abs(direct[i].vec[d] - coded[i].vec[d]));
            }
        }
        CHECK(worst > 0.0);  // quantization actually happened
        CHECK(worst < 1e-6);
    }

    SUBCASE("single client ends with no remote banks") {
        std::vector<ClientState> solo;
        solo.push_back(clients[0]);
        exchange(solo, 0, false);
        CHECK(solo[0].remote_banks.empty());
    }
}

TEST_CASE("exchange messages leave no room for raw data") {
    const SyntheticConfig data_cfg = tiny_data();
    RoundConfig cfg = tiny_rounds();
    const auto dataset = generate_dataset(data_cfg);
    const EncoderDims dims{data_cfg.input_dim(), cfg.hidden_dim, cfg.embed_dim};
    std::vector<ClientState> clients = init_clients(dataset, cfg, seeded_params(dims, 9), 77);
    cfg.mode = Mode::fe_gsm;
    run_round(clients, cfg, data_cfg.partition_spec(), 0);

    for (const ExchangeMessage& msg : collect_exchange_messages(clients, 1)) {
        const auto bytes = encode_exchange_message(msg);
        // Exactly header + per-feature payload; a serialized Volume could not fit.
        CHECK(bytes.size() == exchange_message_size(msg.features.size(), cfg.embed_dim));
        CHECK(msg.features.size() <= cfg.bank_capacity);
        for (const Feature& f : msg.features) {
            CHECK(f.client_id == msg.sender_id);
            CHECK(std::abs(norm(f.vec) - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("run_round contracts") {
    const SyntheticConfig data_cfg = tiny_data();
    RoundConfig cfg = tiny_rounds();
    const auto dataset = generate_dataset(data_cfg);
    const EncoderDims dims{data_cfg.input_dim(), cfg.hidden_dim, cfg.embed_dim};
    const EncoderParams init = seeded_params(dims, 4);
    const PartitionSpec spec = data_cfg.partition_spec();

    SUBCASE("random_init never touches parameters") {
        cfg.mode = Mode::random_init;
        std::vector<ClientState> clients = init_clients(dataset, cfg, init, 5);
        for (std::uint32_t r = 0; r < 3; ++r) {
            run_round(clients, cfg, spec, r);
            for (const ClientState& client : clients) {
                CHECK(client.main_params == init);
                CHECK(client.momentum_params == init);
            }
        }
    }

    SUBCASE("clients end every round with identical parameters") {
        cfg.mode = Mode::fe_gsm;
        std::vector<ClientState> clients = init_clients(dataset, cfg, init, 5);
        for (std::uint32_t r = 0; r < 3; ++r) {
            const auto rows = run_round(clients, cfg, spec, r);
            REQUIRE(rows.size() == clients.size());
            for (const ClientState& client : clients) {
                CHECK(client.main_params == clients[0].main_params);
                CHECK(client.momentum_params == clients[0].momentum_params);
                CHECK(client.local_bank.size() <= cfg.bank_capacity);
            }
            for (const RoundReportRow& row : rows) {
                CHECK(row.bank_fill >= 0.0);
                CHECK(row.bank_fill <= 1.0);
                CHECK(row.round == r);
            }
        }
        // Training actually moved the parameters.
        CHECK(clients[0].main_params != init);
    }

    SUBCASE("aggregated pool size equals the sum of bank sizes") {
        cfg.mode = Mode::fe_only;
        std::vector<ClientState> clients = init_clients(dataset, cfg, init, 6);
        for (std::uint32_t r = 0; r < 2; ++r) {
            run_round(clients, cfg, spec, r);
        }
        exchange(clients, 2, false);
        for (const ClientState& client : clients) {
            std::vector<const MemoryBank*> remotes;
            std::size_t expected = client.local_bank.size();
            for (const auto& [id, bank] : client.remote_banks) {
                remotes.push_back(&bank);
                expected += bank.size();
            }
            CHECK(aggregate_banks(client.local_bank, remotes).size() == expected);
        }
    }
}

TEST_CASE("single-client degeneracy: local_cl and fe_only trajectories coincide") {
    SyntheticConfig data_cfg = tiny_data();
    data_cfg.num_clients = 1;
    RoundConfig cfg = tiny_rounds();
    const auto dataset = generate_dataset(data_cfg);
    const EncoderDims dims{data_cfg.input_dim(), cfg.hidden_dim, cfg.embed_dim};
    const EncoderParams init = seeded_params(dims, 31);
    const PartitionSpec spec = data_cfg.partition_spec();

    cfg.mode = Mode::local_cl;
    std::vector<ClientState> local = init_clients(dataset, cfg, init, 99);
    RoundConfig fe_cfg = cfg;
    fe_cfg.mode = Mode::fe_only;
    std::vector<ClientState> fe = init_clients(dataset, fe_cfg, init, 99);

    for (std::uint32_t r = 0; r < 3; ++r) {
        run_round(local, cfg, spec, r);
        run_round(fe, fe_cfg, spec, r);
        CHECK(local[0].main_params == fe[0].main_params);
        CHECK(local[0].momentum_params == fe[0].momentum_params);
    }
}

TEST_CASE("run_experiment determinism and thread invariance") {
    const SyntheticConfig data_cfg = tiny_data();
    RoundConfig cfg = tiny_rounds();
    cfg.mode = Mode::fe_gsm;

    const ExperimentResult a = run_experiment(data_cfg, cfg, 2024);
    const ExperimentResult b = run_experiment(data_cfg, cfg, 2024);
    CHECK(a.final_params == b.final_params);
    REQUIRE(a.report.size() == b.report.size());
    for (std::size_t i = 0; i < a.report.size(); ++i) {
        CHECK(a.report[i].mean_loss_local == b.report[i].mean_loss_local);
        CHECK(a.report[i].alignment_metric == b.report[i].alignment_metric);
    }

    RoundConfig threaded = cfg;
    threaded.threads = 4;
    const ExperimentResult c = run_experiment(data_cfg, threaded, 2024);
    CHECK(c.final_params == a.final_params);

    const ExperimentResult other_seed = run_experiment(data_cfg, cfg, 2025);
    CHECK(other_seed.final_params != a.final_params);

    RoundConfig no_rounds = cfg;
    no_rounds.rounds = 0;
    const ExperimentResult frozen = run_experiment(data_cfg, no_rounds, 2024);
    Rng init_rng(derive_seed(2024, {kSeedTagInit}));
    const EncoderDims dims{data_cfg.input_dim(), cfg.hidden_dim, cfg.embed_dim};
    CHECK(frozen.final_params == EncoderParams::init(dims, init_rng));
}

TEST_CASE("wire codec on the exchange path keeps the pipeline deterministic") {
    const SyntheticConfig data_cfg = tiny_data();
    RoundConfig cfg = tiny_rounds();
    cfg.mode = Mode::fe_gsm;
    cfg.wire_codec = true;
    const ExperimentResult a = run_experiment(data_cfg, cfg, 8);
    const ExperimentResult b = run_experiment(data_cfg, cfg, 8);
    CHECK(a.final_params == b.final_params);
}
