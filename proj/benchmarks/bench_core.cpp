#include <benchmark/benchmark.h>

#include "fcl/contrastive.hpp"
#include "fcl/encoder.hpp"
#include "fcl/federation.hpp"

namespace {

using namespace fcl;

EncoderParams default_params(std::uint64_t seed) {
    Rng rng(seed);
    return EncoderParams::init(EncoderDims{}, rng);
}

Vec64 random_slice(std::size_t n, Rng& rng) {
    Vec64 v(n);
    for (double& x : v) {
        x = rng.uniform();
    }
    return v;
}

Vec64 random_unit(std::size_t dim, Rng& rng) {
    Vec64 v(dim);
    for (double& x : v) {
        x = rng.normal();
    }
    return l2_normalize(v);
}

void bm_encoder_forward(benchmark::State& state) {
    const EncoderParams params = default_params(1);
    Rng rng(2);
    const Vec64 x = random_slice(params.dims.input, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(params, x));
    }
}
BENCHMARK(bm_encoder_forward);

void bm_encoder_backward(benchmark::State& state) {
    const EncoderParams params = default_params(1);
    Rng rng(2);
    const Vec64 x = random_slice(params.dims.input, rng);
    const ForwardResult out = forward(params, x);
    const Vec64 g = random_unit(params.dims.embed, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward(out.tape, params, g));
    }
}
BENCHMARK(bm_encoder_backward);

void bm_contrastive_loss(benchmark::State& state) {
    Rng rng(3);
    const std::size_t dim = 32;
    const Vec64 q = random_unit(dim, rng);
    const std::vector<Vec64> positives = {random_unit(dim, rng), random_unit(dim, rng)};
    std::vector<Vec64> negatives(static_cast<std::size_t>(state.range(0)));
    for (Vec64& n : negatives) {
        n = random_unit(dim, rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(contrastive_loss(q, positives, negatives, 0.07));
    }
}
BENCHMARK(bm_contrastive_loss)->Arg(16)->Arg(64)->Arg(256);

void bm_bank_push_and_aggregate(benchmark::State& state) {
    Rng rng(4);
    const std::size_t K = 64;
    std::vector<MemoryBank> banks(4, MemoryBank(K));
    for (MemoryBank& bank : banks) {
        for (std::size_t i = 0; i < K; ++i) {
            bank.push(Feature{random_unit(32, rng), 0, static_cast<std::uint32_t>(i),
                              static_cast<std::uint16_t>(i % 4)});
        }
    }
    const std::vector<const MemoryBank*> remotes = {&banks[1], &banks[2], &banks[3]};
    for (auto _ : state) {
        banks[0].push(Feature{random_unit(32, rng), 0, 0, 0});
        benchmark::DoNotOptimize(aggregate_banks(banks[0], remotes));
    }
}
BENCHMARK(bm_bank_push_and_aggregate);

void bm_sample_negatives(benchmark::State& state) {
    Rng rng(5);
    std::vector<Feature> pool;
    for (std::size_t i = 0; i < 256; ++i) {
        pool.push_back(Feature{random_unit(32, rng), 0, static_cast<std::uint32_t>(i), 0});
    }
    Rng draw(6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_negatives(pool, 64, draw));
    }
}
BENCHMARK(bm_sample_negatives);

void bm_federated_round(benchmark::State& state) {
    SyntheticConfig data_cfg;
    data_cfg.num_clients = 4;
    data_cfg.seed = 7;
    RoundConfig cfg;
    cfg.mode = Mode::fe_gsm;
    cfg.local_steps = 4;
    const auto dataset = generate_dataset(data_cfg);
    const EncoderDims dims{data_cfg.input_dim(), cfg.hidden_dim, cfg.embed_dim};
    Rng init_rng(8);
    const EncoderParams init = EncoderParams::init(dims, init_rng);

    std::uint32_t round = 0;
    std::vector<ClientState> clients = init_clients(dataset, cfg, init, 9);
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_round(clients, cfg, data_cfg.partition_spec(), round++));
    }
}
BENCHMARK(bm_federated_round)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
