#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "fcl/errors.hpp"
#include "fcl/report.hpp"

using namespace fcl;

TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456.789, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("eval csv write/read round-trip and summary") {
    std::vector<EvalReportRow> rows = {
        {"fe_gsm", 1, 1, 0, 0.9, 0.5},  {"fe_gsm", 1, 1, 1, 0.8, 0.5},
        {"fe_gsm", 1, 2, 0, 1.0, 0.6},  {"local_cl", 1, 1, 0, 0.7, 0.1},
        {"local_cl", 1, 1, 1, 0.6, 0.1},
    };
    const auto path = std::filesystem::temp_directory_path() / "fcl_test_eval.csv";
    write_eval_csv(path.string(), rows, {"config_hash=deadbeef", "seed=1"});

    const std::vector<EvalReportRow> back = read_eval_csv(path.string());
    std::filesystem::remove(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].arm == rows[i].arm);
        CHECK(back[i].n == rows[i].n);
        CHECK(back[i].seed == rows[i].seed);
        CHECK(back[i].fold == rows[i].fold);
        CHECK(back[i].probe_accuracy == rows[i].probe_accuracy);
        CHECK(back[i].alignment == rows[i].alignment);
    }

    const auto summary = summarize_eval(rows);
    REQUIRE(summary.size() == 2);
    CHECK(summary[0].arm == "fe_gsm");
    CHECK(summary[0].cells == 3);
    CHECK(summary[0].accuracy_mean == doctest::Approx(0.9));
    CHECK(summary[1].arm == "local_cl");
    CHECK(summary[1].accuracy_mean == doctest::Approx(0.65));

    const std::string rendered = render_eval_summary(rows);
    CHECK(rendered.find("fe_gsm") != std::string::npos);
    CHECK(rendered.find("paired vs fe_gsm") != std::string::npos);
    CHECK(rendered.find("local_cl +0.25") != std::string::npos);
}

TEST_CASE("round csv writer emits the pinned column set") {
    std::vector<RoundReportRow> rows = {{0, 0, 2.5, 1.5, 0.25, 0.1}};
    const auto path = std::filesystem::temp_directory_path() / "fcl_test_rounds.csv";
    write_round_csv(path.string(), rows);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "round,client,mean_loss_local,mean_loss_remote,bank_fill,alignment_metric");
    std::string row;
    std::getline(in, row);
    CHECK(row == "0,0,2.5,1.5,0.25,0.1");
    in.close();
    std::filesystem::remove(path);
}

TEST_CASE("read_eval_csv rejects malformed files") {
    const auto path = std::filesystem::temp_directory_path() / "fcl_test_bad.csv";
    {
        std::ofstream out(path);
        out << "arm,N\nfe_gsm,1\n";
    }
    CHECK_THROWS_AS(read_eval_csv(path.string()), IoError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_eval_csv("/nonexistent.csv"), IoError);
}
