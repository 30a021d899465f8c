#include "redlab/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using redlab::io::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(const std::vector<std::string>& args)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = redlab::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string config_path(const std::string& name)
{
    return std::string(REDLAB_SOURCE_DIR) + "/configs/" + name;
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "redlab_cli_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<json> json_lines(const std::string& text)
{
    std::vector<json> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            out.push_back(json::parse(line));
        }
    }
    return out;
}

}  // namespace

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(cli({}).code, 1);
    EXPECT_EQ(cli({"--help"}).code, 0);
    EXPECT_EQ(cli({"stability", "--no-such-flag"}).code, 1);
    EXPECT_EQ(cli({"verify", "thm9"}).code, 1);
    EXPECT_EQ(cli({"stability", "--d", "5"}).code, 1);
    EXPECT_EQ(cli({"stability", "--dist", "weibull:scale=1"}).code, 1);
    EXPECT_EQ(cli({"stability", "--scenario", "/nonexistent/model.json"}).code, 1);
    EXPECT_EQ(cli({"simulate", "--horizon", "5000"}).code, 1);
    const auto r = cli({"stability", "--scenario", "fs:n=3,rslow=0"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Cli, StabilityReport)
{
    const auto r = cli({"stability"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j.at("lambda_star").get<double>(), 2.0, 1e-9);
    EXPECT_NEAR(j.at("known_types_d1").at("lambda_sup").get<double>(), 3.0, 1e-9);
    EXPECT_NEAR(j.at("unknown_types_d1").at("lambda_sup").get<double>(), 1.8, 1e-9);
    EXPECT_NEAR(j.at("gamma_thresholds").at("lambda_sup").get<double>(), 27.0 / 14.0, 1e-9);
    EXPECT_TRUE(j.contains("lemma1_gap"));

    const auto diag = json::parse(cli({"stability", "--policy", "diag"}).out);
    EXPECT_NEAR(diag.at("gamma_thresholds").at("lambda_sup").get<double>(), 3.0, 1e-9);
    EXPECT_FALSE(diag.contains("lemma1_gap"));
}

TEST(Cli, StabilityFromConfigFiles)
{
    const auto r = cli({"stability", "--scenario", config_path("fast_slow_nwu.json"), "--policy",
                        config_path("skewed_pairs.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j.at("policy").at("d"), 2);
    const auto same = json::parse(cli({"stability", "--dist", "nwu"}).out);
    EXPECT_NEAR(j.at("lambda_star").get<double>(), same.at("lambda_star").get<double>(), 1e-9);

    const auto routed = cli({"stability", "--policy", config_path("fast_server_routing.json")});
    ASSERT_EQ(routed.code, 0) << routed.err;
    // each server gets 0.8 + 0.1/0.5 + 0.1/0.5 = 1.2 jobs' work per three arrivals
    EXPECT_NEAR(json::parse(routed.out).at("gamma_thresholds").at("lambda_sup").get<double>(), 2.5, 1e-9);

    EXPECT_EQ(cli({"stability", "--scenario", config_path("heterogeneous_nbu.json"), "--d", "3"}).code, 0);
}

TEST(Cli, SimulateWritesStatsAndTrace)
{
    const auto trace = scratch("trace.jsonl");
    const auto r = cli({"simulate", "--lambda", "1.0", "--horizon", "20000", "--seed", "3", "--trace", trace.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_GT(j.at("mean_latency").get<double>(), 0.0);
    EXPECT_EQ(j.at("seed"), 3);
    const auto lines = json_lines(slurp(trace));
    ASSERT_FALSE(lines.empty());
    EXPECT_EQ(lines.front().at("kind"), "arrival");

    EXPECT_EQ(cli({"simulate", "--lambda", "3.5", "--horizon", "50000"}).code, 3);
}

TEST(Cli, SeedFallsBackToEnvironment)
{
    ::setenv("REDLAB_SEED", "11", 1);
    const auto a = json::parse(cli({"simulate", "--horizon", "10000"}).out);
    const auto b = json::parse(cli({"simulate", "--horizon", "10000", "--seed", "11"}).out);
    EXPECT_EQ(a.at("seed"), 11);
    EXPECT_EQ(a.at("trace_hash"), b.at("trace_hash"));
    ::setenv("REDLAB_SEED", "eleven", 1);
    EXPECT_EQ(cli({"simulate", "--horizon", "10000"}).code, 1);
    ::unsetenv("REDLAB_SEED");
}

TEST(Cli, BoundarySingleServer)
{
    const auto r = cli({"boundary", "--scenario", "hom:n=1", "--d", "1", "--horizon", "200000"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j.at("boundary").get<double>(), 1.0, 0.06);
    EXPECT_NEAR(j.at("proxy_threshold").get<double>(), 1.0, 1e-12);
}

TEST(Cli, FiguresWriteCsv)
{
    const auto fig2 = scratch("fig2.csv");
    const auto r = cli({"figure", "fig2", "--horizon", "10000", "--out", fig2.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(fig2);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,WeibullNBU,Exp,WeibullNWU");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41);
    const auto meta = json::parse(r.out);
    EXPECT_NEAR(meta.at("thresholds").at("Exp").get<double>(), 27.0 / 14.0, 1e-9);

    const auto stem = scratch("fig3.csv");
    const auto f3 = cli({"figure", "fig3", "--horizon", "10000", "--out", stem.string()});
    ASSERT_EQ(f3.code, 0) << f3.err;
    for (const char* suffix : {"fig3_rslow_01.csv", "fig3_rslow_05.csv"}) {
        const auto text = slurp(scratch(suffix));
        EXPECT_EQ(text.substr(0, text.find('\n')), "lambda,d1,d2,d3") << suffix;
    }
    EXPECT_EQ(cli({"figure", "fig7"}).code, 1);
}

TEST(Cli, VerifyAnalyticClaims)
{
    const auto lemma = cli({"verify", "lemma1", "--trials", "10000", "--seed", "7"});
    ASSERT_EQ(lemma.code, 0) << lemma.err;
    const auto v = json_lines(lemma.out);
    ASSERT_EQ(v.size(), 1U);
    EXPECT_EQ(v[0].at("status"), "supported");
    EXPECT_EQ(v[0].at("data").at("trials"), 10000);

    const auto thm3 = json_lines(cli({"verify", "thm3"}).out);
    ASSERT_EQ(thm3.size(), 1U);
    EXPECT_EQ(thm3[0].at("status"), "supported");
    EXPECT_EQ(cli({"verify", "thm3", "--dist", "nbu"}).code, 1);
}

TEST(Cli, VerifySimulatedClaims)
{
    const auto thm2 = cli({"verify", "thm2", "--horizon", "200000"});
    EXPECT_EQ(thm2.code, 0) << thm2.out;
    const auto conj1 = cli({"verify", "conj1", "--horizon", "200000"});
    EXPECT_EQ(conj1.code, 0) << conj1.out;
    const auto lines = json_lines(conj1.out);
    ASSERT_EQ(lines.size(), 3U);
    EXPECT_EQ(lines[0].at("claim"), "conj1");
    EXPECT_EQ(lines[1].at("claim"), "conj1.full_replication");
    EXPECT_EQ(lines[2].at("claim"), "conj1.nbu_reversal");
    const auto prop1 = cli({"verify", "prop1", "--horizon", "200000"});
    EXPECT_EQ(prop1.code, 0) << prop1.out;
}

TEST(Cli, OutputSuffix)
{
    using redlab::cli::detail::with_suffix;
    EXPECT_EQ(with_suffix("out/fig3.csv", "_rslow_01"), "out/fig3_rslow_01.csv");
    EXPECT_EQ(with_suffix("fig3", "_rslow_05"), "fig3_rslow_05.csv");
}
