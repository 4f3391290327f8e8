// fcl: drives the federated contrastive learning simulator.
// Subcommands: generate, pretrain, evaluate, report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcl/config.hpp"
#include "fcl/errors.hpp"
#include "fcl/evaluation.hpp"
#include "fcl/federation.hpp"
#include "fcl/report.hpp"
#include "fcl/serialize.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::size_t threads = 1;
    std::optional<std::string> arm;
};

// Loads and validates the run configuration, applying flag overrides.
// Throws fcl::ConfigError with a field-level message.
fcl::RunConfig resolve_config(const CommonArgs& args) {
    fcl::RunConfig cfg = fcl::load_config_file(args.config_path);
    if (args.seed) {
        cfg.seed = *args.seed;
        cfg.seed_set = true;
    }
    if (args.out_dir) {
        cfg.out_dir = *args.out_dir;
    }
    if (args.arm) {
        cfg.round.mode = fcl::mode_from_string(*args.arm);
        cfg.arms = {cfg.round.mode};
    }
    cfg.round.threads = args.threads;
    cfg.validate();
    return cfg;
}

nlohmann::json config_as_json(const fcl::RunConfig& cfg) {
    nlohmann::json obj;
    std::istringstream lines(fcl::canonical_config_text(cfg));
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find(" = ");
        obj[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return obj;
}

void write_manifest(const fcl::RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs) {
    nlohmann::json manifest;
    manifest["command"] = command;
    manifest["config_hash"] = fcl::config_hash_hex(cfg);
    manifest["seed"] = cfg.seed;
    manifest["config"] = config_as_json(cfg);
    manifest["outputs"] = outputs;
    manifest["format_versions"] = {{"fclp", 1}, {"fcld", 1}, {"fclx", 1}};

    const auto path = std::filesystem::path(cfg.out_dir) / "manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw fcl::IoError("cannot write manifest: " + path.string());
    }
    out << manifest.dump(2) << "\n";
}

std::vector<std::string> csv_comments(const fcl::RunConfig& cfg) {
    return {"config_hash=" + fcl::config_hash_hex(cfg), "seed=" + std::to_string(cfg.seed)};
}

int cmd_generate(const CommonArgs& args) {
    const fcl::RunConfig cfg = resolve_config(args);
    std::filesystem::create_directories(cfg.out_dir);

    fcl::SyntheticConfig data_cfg = cfg.data;
    data_cfg.seed = fcl::derive_seed(cfg.seed, {fcl::kSeedTagData});
    const auto dataset = fcl::generate_dataset(data_cfg);

    std::vector<std::string> outputs;
    for (std::size_t c = 0; c < dataset.size(); ++c) {
        const std::string name = "client_" + std::to_string(c) + ".fcld";
        fcl::save_client_volumes((std::filesystem::path(cfg.out_dir) / name).string(),
                                 dataset[c]);
        outputs.push_back(name);
    }
    write_manifest(cfg, "generate", outputs);
    std::cout << "generated " << dataset.size() << " client shards ("
              << cfg.data.volumes_per_client << " volumes x " << cfg.data.slices_per_volume
              << " slices) into " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_pretrain(const CommonArgs& args, bool wire_codec) {
    fcl::RunConfig cfg = resolve_config(args);
    if (wire_codec) {
        cfg.round.wire_codec = true;
    }
    std::filesystem::create_directories(cfg.out_dir);

    const fcl::ExperimentResult result = fcl::run_experiment(cfg.data, cfg.round, cfg.seed);

    // Per-round digest over clients.
    std::map<std::uint32_t, std::vector<const fcl::RoundReportRow*>> by_round;
    for (const fcl::RoundReportRow& row : result.report) {
        by_round[row.round].push_back(&row);
    }
    for (const auto& [round, rows] : by_round) {
        double loss_local = 0.0;
        double loss_remote = 0.0;
        double fill = 0.0;
        for (const auto* row : rows) {
            loss_local += row->mean_loss_local;
            loss_remote += row->mean_loss_remote;
            fill += row->bank_fill;
        }
        const double n = static_cast<double>(rows.size());
        std::printf("round %2u  loss_local %.4f  loss_remote %.4f  bank_fill %.2f  align %+.4f\n",
                    round, loss_local / n, loss_remote / n, fill / n,
                    rows.front()->alignment_metric);
    }

    const auto out = std::filesystem::path(cfg.out_dir);
    fcl::save_checkpoint((out / "encoder.fclp").string(), result.final_params);
    fcl::write_round_csv((out / "rounds.csv").string(), result.report, csv_comments(cfg));
    write_manifest(cfg, "pretrain", {"encoder.fclp", "rounds.csv"});
    std::cout << "checkpoint written to " << (out / "encoder.fclp").string() << "\n";
    return kExitOk;
}

int cmd_evaluate(const CommonArgs& args, const std::string& checkpoint_path) {
    const fcl::RunConfig cfg = resolve_config(args);

    std::vector<fcl::EvalReportRow> rows;
    if (!checkpoint_path.empty()) {
        // Single frozen encoder from disk; probing only.
        const fcl::EncoderParams encoder = fcl::load_checkpoint(checkpoint_path);
        const std::string label = args.arm ? *args.arm : "checkpoint";
        rows = fcl::evaluate_encoder(encoder, cfg.data, cfg.probe, cfg.budgets, cfg.eval_seeds,
                                     label);
    } else {
        fcl::RoundConfig round_cfg = cfg.round;
        rows = fcl::run_ablation(cfg.data, round_cfg, cfg.probe, cfg.arms, cfg.budgets,
                                 cfg.eval_seeds);
    }

    std::filesystem::create_directories(cfg.out_dir);
    const auto out = std::filesystem::path(cfg.out_dir);
    fcl::write_eval_csv((out / "eval.csv").string(), rows, csv_comments(cfg));
    write_manifest(cfg, "evaluate", {"eval.csv"});
    std::cout << fcl::render_eval_summary(rows);
    std::cout << "report written to " << (out / "eval.csv").string() << "\n";
    return kExitOk;
}

int cmd_report(const std::string& in_path) {
    const std::vector<fcl::EvalReportRow> rows = fcl::read_eval_csv(in_path);
    std::cout << fcl::render_eval_summary(rows);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated contrastive learning simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string checkpoint_path;
    std::string report_in;
    bool wire_codec = false;

    const auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* config_opt = cmd->add_option("--config", args.config_path, "config file (key = value lines)");
        if (needs_config) {
            config_opt->required()->check(CLI::ExistingFile);
        }
        cmd->add_option("--seed", args.seed, "global seed; overrides the config's seed key");
        cmd->add_option("--out", args.out_dir, "output directory; overrides out_dir");
        cmd->add_option("--threads", args.threads, "worker threads for per-client training")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--arm", args.arm,
                        "pipeline arm: random_init, local_cl, fe_only or fe_gsm");
    };

    CLI::App* generate = app.add_subcommand("generate", "write synthetic dataset dumps");
    add_common(generate, true);

    CLI::App* pretrain = app.add_subcommand("pretrain", "run federated contrastive pre-training");
    add_common(pretrain, true);
    pretrain->add_flag("--wire-codec", wire_codec,
                       "route feature exchange through the FCLX wire codec");

    CLI::App* evaluate = app.add_subcommand("evaluate", "probe encoders under label budgets");
    add_common(evaluate, true);
    evaluate->add_option("--checkpoint", checkpoint_path, "probe this FCLP checkpoint only");

    CLI::App* report = app.add_subcommand("report", "summarize an evaluation CSV");
    report->add_option("--in", report_in, "eval.csv produced by evaluate")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (generate->parsed()) {
            return cmd_generate(args);
        }
        if (pretrain->parsed()) {
            return cmd_pretrain(args, wire_codec);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(args, checkpoint_path);
        }
        if (report->parsed()) {
            return cmd_report(report_in);
        }
    } catch (const fcl::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fcl::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fcl::DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitRuntime;
}
