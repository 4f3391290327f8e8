#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fcl {

// One row of the per-round pre-training report.
// CSV columns: round, client, mean_loss_local, mean_loss_remote, bank_fill,
// alignment_metric.
struct RoundReportRow {
    std::uint32_t round = 0;
    std::uint32_t client = 0;
    double mean_loss_local = 0.0;
    double mean_loss_remote = 0.0;
    double bank_fill = 0.0;  // entries / capacity, in [0, 1]
    double alignment_metric = 0.0;
};

// One row of the evaluation report.
// CSV columns: arm, N, seed, fold, probe_accuracy, alignment.
struct EvalReportRow {
    std::string arm;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::size_t fold = 0;
    double probe_accuracy = 0.0;
    double alignment = 0.0;
};

// Shortest decimal form that round-trips a double exactly, so reruns with
// one seed produce byte-identical CSVs.
std::string format_double(double v);

// Writers prepend `# <comment>` lines for each entry of header_comments.
void write_round_csv(const std::string& path, const std::vector<RoundReportRow>& rows,
                     const std::vector<std::string>& header_comments = {});
void write_eval_csv(const std::string& path, const std::vector<EvalReportRow>& rows,
                    const std::vector<std::string>& header_comments = {});

// Reads back an evaluation CSV written by write_eval_csv (used by the
// report subcommand). Skips comment lines.
std::vector<EvalReportRow> read_eval_csv(const std::string& path);

// Aggregated view: mean and standard deviation of probe accuracy and
// alignment per (arm, N) over seeds and folds.
struct EvalSummaryRow {
    std::string arm;
    std::size_t n = 0;
    std::size_t cells = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double alignment_mean = 0.0;
};

std::vector<EvalSummaryRow> summarize_eval(const std::vector<EvalReportRow>& rows);

// Human-readable summary table plus paired arm comparisons at each N.
std::string render_eval_summary(const std::vector<EvalReportRow>& rows);

}  // namespace fcl
