#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fcl/contrastive.hpp"
#include "fcl/data.hpp"
#include "fcl/encoder.hpp"
#include "fcl/report.hpp"
#include "fcl/serialize.hpp"

namespace fcl {

// The four ablation arms.
//   random_init: no training, the initialization itself.
//   local_cl:    contrastive training on local banks only, no exchange.
//   fe_only:     feature exchange enlarges the negative pool.
//   fe_gsm:      feature exchange plus global structural matching positives.
enum class Mode { random_init, local_cl, fe_only, fe_gsm };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);  // throws ConfigError
const std::vector<Mode>& all_modes();

struct RoundConfig {
    std::size_t rounds = 90;
    std::size_t local_steps = 20;
    std::size_t batch_size = 8;  // sampled slice pairs per step; each pair yields two anchors
    double lr = 0.2;
    double momentum = 0.99;           // m
    std::size_t bank_capacity = 64;   // K
    std::size_t bank_min_fill = 16;   // warm-up: loss skipped below this local fill
    // Softer than the MoCo-canonical 0.07: at this scale a sharp softmax
    // concentrates repulsion on same-partition bank features (they are the
    // nearest negatives under the shared-denominator loss) and undoes the
    // structural matching; 0.32 lets the positive pull win.
    double tau = 0.32;
    Mode mode = Mode::fe_gsm;
    std::size_t hidden_dim = 128;
    std::size_t embed_dim = 32;
    // Route exchanged features through the FCLX codec (f32 wire precision)
    // instead of in-process f64 copies.
    bool wire_codec = false;
    std::size_t threads = 1;

    void validate() const;  // throws ConfigError
};

// Everything one simulated client owns. The shard never leaves this struct;
// only Feature values are exported, via ExchangeMessage.
struct ClientState {
    std::uint32_t client_id = 0;
    std::vector<Volume> shard;
    EncoderParams main_params;
    EncoderParams momentum_params;
    MemoryBank local_bank{1};
    std::map<std::uint32_t, MemoryBank> remote_banks;  // frozen per-round snapshots
    std::uint64_t seed_base = 0;  // per-client stream root, derived from the global seed
};

// Weighted elementwise parameter average, anchored at the first model so
// that identical inputs aggregate to exactly that model. Throws on shape
// mismatch or all-zero weights.
EncoderParams fedavg(const std::vector<EncoderParams>& models, const std::vector<double>& weights);

// Builds each client's broadcast for this round.
std::vector<ExchangeMessage> collect_exchange_messages(const std::vector<ClientState>& clients,
                                                       std::uint32_t round_index);

// All-to-all feature exchange: installs every other client's local bank as a
// frozen snapshot. Raw slices never cross this boundary: the payload type
// carries only Feature values. With through_codec, each message passes
// through the FCLX wire format.
void exchange(std::vector<ClientState>& clients, std::uint32_t round_index, bool through_codec);

// Per-client statistics of one round of local training.
struct LocalTrainStats {
    double mean_loss_local = 0.0;
    double mean_loss_remote = 0.0;
    std::size_t trained_steps = 0;
};

// Runs one client's local steps for this round: sample pairs, augment,
// forward both encoders, build positives, sample negatives per anchor,
// batch loss, SGD on the main encoder, momentum update, push keys.
LocalTrainStats local_train(ClientState& client, const RoundConfig& cfg,
                            const PartitionSpec& spec, std::uint32_t round_index);

// One full round: exchange (fe modes), parallel local training, FedAvg
// aggregation of main and momentum encoders, report rows. Clients end the
// round with bit-identical parameters.
std::vector<RoundReportRow> run_round(std::vector<ClientState>& clients, const RoundConfig& cfg,
                                      const PartitionSpec& spec, std::uint32_t round_index);

std::vector<ClientState> init_clients(const std::vector<std::vector<Volume>>& dataset,
                                      const RoundConfig& cfg, const EncoderParams& init,
                                      std::uint64_t global_seed);

struct ExperimentResult {
    EncoderParams final_params;
    std::vector<RoundReportRow> report;
};

// Full pre-training pipeline: generate data from the global seed, install
// identical initial parameters on every client, run all rounds. The caller
// owns writing reports and handing the encoder to evaluation.
ExperimentResult run_experiment(const SyntheticConfig& data_cfg, const RoundConfig& cfg,
                                std::uint64_t global_seed);

// Seed-derivation tags shared by the pipeline so generate/pretrain/evaluate
// agree on the dataset for one global seed.
constexpr std::uint64_t kSeedTagData = 0xDA7A;
constexpr std::uint64_t kSeedTagInit = 0x1217;
constexpr std::uint64_t kSeedTagClient = 0xC11E;
constexpr std::uint64_t kSeedTagProbe = 0x920B;

}  // namespace fcl
