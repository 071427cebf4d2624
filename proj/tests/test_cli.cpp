#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mephd/cli.hpp"
#include "mephd/divergence.hpp"
#include "mephd/estimator.hpp"
#include "mephd/model.hpp"
#include "mephd/rng.hpp"

using namespace mephd;
using nlohmann::json;

namespace {

int run_cli(const std::vector<std::string>& args, std::string& out_text,
            std::string& err_text) {
    std::vector<const char*> argv;
    argv.push_back("mephd");
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    out_text = out.str();
    err_text = err.str();
    return code;
}

std::string write_data(const std::string& name, int n, double mean, double sd,
                       std::uint64_t seed) {
    SplitMix64 rng(seed);
    const std::string path = "/tmp/mephd_cli_" + name + ".csv";
    std::ofstream f(path);
    f.precision(17);
    for (int i = 0; i < n; ++i) f << mean + sd * rng.normal() << "\n";
    return path;
}

} // namespace

TEST_CASE("help exits cleanly for every subcommand") {
    std::string out, err;
    CHECK(run_cli({"--help"}, out, err) == 0);
    CHECK(out.find("Subcommands") != std::string::npos);
    for (const std::string sub :
         {"estimate", "project", "verify", "test-model", "test-point", "test-composite",
          "cr", "cdf", "simulate"}) {
        CHECK(run_cli({sub, "--help"}, out, err) == 0);
        CHECK(out.find("Usage") != std::string::npos);
    }
}

TEST_CASE("usage errors exit with code 2") {
    std::string out, err;
    CHECK(run_cli({"estimate", "--model", "qinlawless"}, out, err) == 2);
    CHECK(run_cli({"estimate", "--data", "/tmp/none.csv", "--model", "nope"}, out, err) == 2);
    CHECK(run_cli({"bogus-subcommand"}, out, err) == 2);
}

TEST_CASE("estimate round-trips exactly through its JSON output") {
    const auto path = write_data("est", 100, 1.0, std::sqrt(2.0), 8899);
    const std::string out_json = "/tmp/mephd_cli_est_out.json";
    std::string out, err;
    const int code = run_cli({"estimate", "--data", path, "--model", "qinlawless",
                              "--divergence", "hellinger", "--out", out_json},
                             out, err);
    REQUIRE(code == 0);

    std::ifstream f(out_json);
    json j = json::parse(f);
    const double theta_file = j["theta_hat"][0].get<double>();

    auto sample = load_sample(path, 1);
    auto res = estimate(builtin_model("qinlawless"), divergence_by_name("hellinger"), sample);
    CHECK(theta_file == res.theta_hat[0]); // bit-exact round trip
    CHECK(j["value"].get<double>() == res.value);
    CHECK(j.contains("variance_theta"));
    CHECK(j.contains("profile_trace"));
    std::remove(path.c_str());
    std::remove(out_json.c_str());
}

TEST_CASE("project reports the dual solution or a typed failure") {
    const auto path = write_data("proj", 60, 1.0, std::sqrt(2.0), 515);
    std::string out, err;

    SUBCASE("happy path") {
        const int code = run_cli({"project", "--data", path, "--model", "qinlawless",
                                  "--divergence", "klm", "--theta", "1.0"},
                                 out, err);
        REQUIRE(code == 0);
        json j = json::parse(out);
        CHECK(j["converged"].get<bool>());
        CHECK(j["weights"].size() == 60);
        double wsum = 0.0;
        for (const auto& w : j["weights"]) wsum += w.get<double>();
        CHECK(std::fabs(wsum - 1.0) <= 1e-8);
    }

    SUBCASE("infeasible projection exits 3 with a JSON body") {
        const int code = run_cli({"project", "--data", path, "--model", "mean1",
                                  "--divergence", "klm", "--theta", "99"},
                                 out, err);
        CHECK(code == 3);
        json j = json::parse(out);
        CHECK(j["error"] == "NotConverged");
        CHECK(j["reason"] == "dual-unbounded");
    }
    std::remove(path.c_str());
}

TEST_CASE("verify reports a small dual-primal gap") {
    const auto path = write_data("ver", 25, 1.0, std::sqrt(2.0), 99);
    std::string out, err;
    const int code = run_cli({"verify", "--data", path, "--model", "qinlawless",
                              "--divergence", "chi2", "--theta", "1.0"},
                             out, err);
    REQUIRE(code == 0);
    json j = json::parse(out);
    CHECK(j["value_gap"].get<double>() <= 1e-8);
    CHECK(j["max_weight_gap"].get<double>() <= 1e-6);
    std::remove(path.c_str());
}

TEST_CASE("test subcommands emit full reports") {
    const auto path = write_data("tests", 120, 1.0, std::sqrt(2.0), 2211);
    std::string out, err;

    REQUIRE(run_cli({"test-model", "--data", path, "--model", "qinlawless",
                     "--divergence", "hellinger"},
                    out, err) == 0);
    json jm = json::parse(out);
    CHECK(jm["df"] == 1);
    CHECK(jm.contains("p_value"));
    CHECK(jm.contains("critical_value"));

    REQUIRE(run_cli({"test-point", "--data", path, "--model", "qinlawless",
                     "--divergence", "klm", "--theta", "1.0", "--alpha", "0.10"},
                    out, err) == 0);
    json jp = json::parse(out);
    CHECK(jp["alpha"].get<double>() == 0.10);
    CHECK(jp["df"] == 1);

    // model test at l = d is a usage-level error
    CHECK(run_cli({"test-model", "--data", path, "--model", "mean1", "--divergence", "klm"},
                  out, err) == 2);
    std::remove(path.c_str());
}

TEST_CASE("composite test runs through the CLI for normal2") {
    const auto path = write_data("comp", 150, 1.0, std::sqrt(2.0), 31415);
    std::string out, err;
    REQUIRE(run_cli({"test-composite", "--data", path, "--model", "normal2",
                     "--divergence", "chi2", "--fix", "mu=1.0"},
                    out, err) == 0);
    json j = json::parse(out);
    CHECK(j["df"] == 1);
    CHECK(j["statistic"].get<double>() >= 0.0);
    std::remove(path.c_str());
}

TEST_CASE("cr subcommand extracts intervals") {
    const auto path = write_data("cr", 50, 0.5, 1.0, 321);
    std::string out, err;
    REQUIRE(run_cli({"cr", "--data", path, "--model", "mean1", "--divergence", "klm",
                     "--level", "0.95", "--grid", "-0.5:1.5:41"},
                    out, err) == 0);
    json j = json::parse(out);
    REQUIRE(j["intervals"].size() == 1);
    const double lo = j["intervals"][0]["lo"].get<double>();
    const double hi = j["intervals"][0]["hi"].get<double>();
    auto sample = load_sample(path, 1);
    double mean = 0.0;
    for (int i = 0; i < sample.n; ++i) mean += sample.row(i)[0];
    mean /= sample.n;
    CHECK(lo < mean);
    CHECK(hi > mean);
    std::remove(path.c_str());
}

TEST_CASE("cdf subcommand emits the x,Fhat,Fn,W table") {
    const auto path = write_data("cdf", 80, 1.0, std::sqrt(2.0), 646);
    std::string out, err;
    REQUIRE(run_cli({"cdf", "--data", path, "--model", "qinlawless", "--divergence",
                     "klm", "--at", "-10,1.0,50"},
                    out, err) == 0);
    std::istringstream lines(out);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "x,Fhat,Fn,W");
    std::string row;
    std::vector<std::vector<double>> rows;
    while (std::getline(lines, row)) {
        std::stringstream rs(row);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(rs, cell, ',')) vals.push_back(std::stod(cell));
        rows.push_back(vals);
    }
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][1] == 0.0);
    CHECK(std::fabs(rows[2][1] - 1.0) <= 1e-8);
    CHECK(rows[2][2] == 1.0);
    std::remove(path.c_str());
}

TEST_CASE("simulate accepts a custom scenario file") {
    const std::string cfg_path = "/tmp/mephd_cli_scenario.json";
    {
        std::ofstream f(cfg_path);
        f << R"({"name":"tilted","theta0":1.0,"sizes":[30],"reps":5,)"
          << R"("divergences":["chi2"],"seed":12,)"
          << R"("contamination":{"kind":"point_mass","eps":0.1,"at":4.0}})";
    }
    std::string out, err;
    REQUIRE(run_cli({"simulate", "--config", cfg_path, "--csv"}, out, err) == 0);
    CHECK(out.find("chi2 mean") != std::string::npos);
    // --scenario and --config are mutually exclusive
    CHECK(run_cli({"simulate", "--config", cfg_path, "--scenario", "example1a"}, out,
                  err) == 2);
    std::remove(cfg_path.c_str());
}

TEST_CASE("cr grid evaluation is worker-count invariant") {
    const auto path = write_data("crj", 40, 0.5, 1.0, 11);
    std::string out1, out2, err;
    REQUIRE(run_cli({"cr", "--data", path, "--model", "mean1", "--divergence", "chi2",
                     "--grid", "-0.5:1.5:31", "--jobs", "1"},
                    out1, err) == 0);
    REQUIRE(run_cli({"cr", "--data", path, "--model", "mean1", "--divergence", "chi2",
                     "--grid", "-0.5:1.5:31", "--jobs", "3"},
                    out2, err) == 0);
    CHECK(out1 == out2);
    std::remove(path.c_str());
}

TEST_CASE("simulate respects the MEPHD_SEED override") {
    std::string out_env, out_flag, err;
    setenv("MEPHD_SEED", "777", 1);
    REQUIRE(run_cli({"simulate", "--scenario", "example1b", "--reps", "4", "--sizes",
                     "25", "--seed", "1", "--csv"},
                    out_env, err) == 0);
    unsetenv("MEPHD_SEED");
    REQUIRE(run_cli({"simulate", "--scenario", "example1b", "--reps", "4", "--sizes",
                     "25", "--seed", "777", "--csv"},
                    out_flag, err) == 0);
    CHECK(out_env == out_flag);
    CHECK(out_env.find("hellinger mean") != std::string::npos);
}
