#include "fcl/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fcl/errors.hpp"

namespace fcl {

std::string format_double(double v) {
    // Shortest decimal that parses back to the same double.
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

namespace {

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open file for writing: " + path);
    }
    return out;
}

void write_comments(std::ofstream& out, const std::vector<std::string>& comments) {
    for (const std::string& c : comments) {
        out << "# " << c << "\n";
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    return fields;
}

double parse_double(const std::string& s, const std::string& path) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw IoError(path + ": malformed numeric field '" + s + "'");
    }
}

}  // namespace

void write_round_csv(const std::string& path, const std::vector<RoundReportRow>& rows,
                     const std::vector<std::string>& header_comments) {
    std::ofstream out = open_for_write(path);
    write_comments(out, header_comments);
    out << "round,client,mean_loss_local,mean_loss_remote,bank_fill,alignment_metric\n";
    for (const RoundReportRow& r : rows) {
        out << r.round << ',' << r.client << ',' << format_double(r.mean_loss_local) << ','
            << format_double(r.mean_loss_remote) << ',' << format_double(r.bank_fill) << ','
            << format_double(r.alignment_metric) << '\n';
    }
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

void write_eval_csv(const std::string& path, const std::vector<EvalReportRow>& rows,
                    const std::vector<std::string>& header_comments) {
    std::ofstream out = open_for_write(path);
    write_comments(out, header_comments);
    out << "arm,N,seed,fold,probe_accuracy,alignment\n";
    for (const EvalReportRow& r : rows) {
        out << r.arm << ',' << r.n << ',' << r.seed << ',' << r.fold << ','
            << format_double(r.probe_accuracy) << ',' << format_double(r.alignment) << '\n';
    }
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

std::vector<EvalReportRow> read_eval_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    std::vector<EvalReportRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header_seen) {
            if (line != "arm,N,seed,fold,probe_accuracy,alignment") {
                throw IoError(path + ": unexpected header '" + line + "'");
            }
            header_seen = true;
            continue;
        }
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 6) {
            throw IoError(path + ": expected 6 fields, got " + std::to_string(fields.size()));
        }
        EvalReportRow row;
        row.arm = fields[0];
        row.n = static_cast<std::size_t>(parse_double(fields[1], path));
        row.seed = static_cast<std::uint64_t>(parse_double(fields[2], path));
        row.fold = static_cast<std::size_t>(parse_double(fields[3], path));
        row.probe_accuracy = parse_double(fields[4], path);
        row.alignment = parse_double(fields[5], path);
        rows.push_back(std::move(row));
    }
    if (!header_seen) {
        throw IoError(path + ": missing header");
    }
    return rows;
}

std::vector<EvalSummaryRow> summarize_eval(const std::vector<EvalReportRow>& rows) {
    std::map<std::pair<std::string, std::size_t>, std::vector<const EvalReportRow*>> cells;
    for (const EvalReportRow& r : rows) {
        cells[{r.arm, r.n}].push_back(&r);
    }
    std::vector<EvalSummaryRow> summary;
    for (const auto& [key, groups] : cells) {
        EvalSummaryRow s;
        s.arm = key.first;
        s.n = key.second;
        s.cells = groups.size();
        double acc_sum = 0.0;
        double align_sum = 0.0;
        for (const EvalReportRow* r : groups) {
            acc_sum += r->probe_accuracy;
            align_sum += r->alignment;
        }
        s.accuracy_mean = acc_sum / static_cast<double>(groups.size());
        s.alignment_mean = align_sum / static_cast<double>(groups.size());
        double sq = 0.0;
        for (const EvalReportRow* r : groups) {
            const double d = r->probe_accuracy - s.accuracy_mean;
            sq += d * d;
        }
        s.accuracy_std =
            groups.size() > 1 ? std::sqrt(sq / static_cast<double>(groups.size() - 1)) : 0.0;
        summary.push_back(std::move(s));
    }
    return summary;
}

std::string render_eval_summary(const std::vector<EvalReportRow>& rows) {
    const std::vector<EvalSummaryRow> summary = summarize_eval(rows);
    std::ostringstream out;
    out << "arm          N   cells  probe_accuracy        alignment\n";
    for (const EvalSummaryRow& s : summary) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-12s %-3zu %-6zu %.4f +/- %.4f     %+.4f\n",
                      s.arm.c_str(), s.n, s.cells, s.accuracy_mean, s.accuracy_std,
                      s.alignment_mean);
        out << line;
    }

    // Paired comparisons against the full pipeline, per budget.
    std::map<std::size_t, std::map<std::string, const EvalSummaryRow*>> by_n;
    for (const EvalSummaryRow& s : summary) {
        by_n[s.n][s.arm] = &s;
    }
    for (const auto& [n, arms] : by_n) {
        auto it = arms.find("fe_gsm");
        if (it == arms.end() || arms.size() < 2) {
            continue;
        }
        out << "paired vs fe_gsm at N=" << n << ":";
        for (const auto& [arm, s] : arms) {
            if (arm == "fe_gsm") {
                continue;
            }
            char buf[96];
            std::snprintf(buf, sizeof(buf), " %s %+.4f;", arm.c_str(),
                          it->second->accuracy_mean - s->accuracy_mean);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace fcl
