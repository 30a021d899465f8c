#include "redlab/simulator.hpp"
#include "redlab/experiments.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <map>
#include <sstream>

using namespace redlab;

namespace {

const auto one = Distribution::deterministic(1.0);
const auto expo = Distribution::exponential(1.0);
const auto nbu = Distribution::weibull(1.128, 2.0);
const auto nwu = Distribution::weibull(0.5, 0.5);

SimConfig config(std::uint64_t horizon, std::uint64_t seed = 1)
{
    SimConfig c;
    c.horizon_arrivals = horizon;
    c.seed = seed;
    return c;
}

/// sum_i r_ij tau_ij for type j over one batch
double weighted_busy(const SystemModel& m, const BatchView& b, std::size_t j)
{
    double s = 0.0;
    for (std::size_t i = 0; i < m.servers; ++i) {
        s += m.speed(i, j) * b.tau(i, j);
    }
    return s;
}

}  // namespace

TEST(Simulator, SingleServerMatchesQueueingFormula)
{
    const auto m = build_homogeneous(1, one, expo);
    const auto s = run(m, uniform_power_of_d(1, 1), 0.5, config(1'000'000, 3));
    ASSERT_FALSE(s.divergent());
    // M/M/1 sojourn 1 / (mu - lambda)
    EXPECT_NEAR(s.mean_latency, 2.0, 3.0 * s.latency_std_error + 0.01);
    EXPECT_NEAR(s.overall.server_tau(0), 0.5, 0.01);
    EXPECT_NEAR(s.pi0_bar, 0.5, 0.01);
}

TEST(Simulator, FullReplicationIsSingleQueueWithMinimumService)
{
    // all servers start and stop together, so latency follows Pollaczek-Khinchine with B = min_i Y_i / r_i
    for (const auto& [law, lam] : {std::pair{expo, 1.4}, std::pair{nbu, 1.0}}) {
        const auto m = build_fs_scenario(3, 1.0, 0.5, one, law);
        const std::vector<double> speeds{1.0, 0.5, 0.5};
        const double b1 = expected_min_weighted(law, speeds);
        const double b2 = second_moment_min_weighted(law, speeds);
        const double oracle = b1 + lam * b2 / (2.0 * (1.0 - lam * b1));
        const auto s = run(m, uniform_power_of_d(3, 3), lam, config(1'000'000, 5));
        ASSERT_FALSE(s.divergent());
        EXPECT_NEAR(s.mean_latency, oracle, 3.0 * s.latency_std_error + 0.01 * oracle);
        // every replica starts with the job, so the concurrent stretch is the whole service time
        EXPECT_NEAR(s.mean_overlap, b1, 0.01 * b1);
    }
}

TEST(Simulator, ZeroRateIsEmpty)
{
    const auto m = build_fs_scenario(3, 1.0, 0.5, one, expo);
    const auto s = run(m, uniform_power_of_d(3, 2), 0.0, config(10'000));
    EXPECT_EQ(s.jobs_completed, 0U);
    EXPECT_DOUBLE_EQ(s.pi0_bar, 0.0);
    for (const auto& row : s.tau) {
        for (double x : row) {
            EXPECT_DOUBLE_EQ(x, 0.0);
        }
    }
    EXPECT_FALSE(s.divergent());
}

TEST(Simulator, RejectsBadConfigurations)
{
    const auto m = build_homogeneous(2, one, expo);
    const auto p = uniform_power_of_d(2, 1);
    EXPECT_THROW(run(m, p, 1.0, config(9'999)), std::invalid_argument);
    EXPECT_THROW(run(m, p, -1.0, config(10'000)), std::invalid_argument);
    EXPECT_THROW(run(m, uniform_power_of_d(3, 1), 1.0, config(10'000)), std::invalid_argument);
    auto warm = config(10'000);
    warm.warmup_fraction = 1.0;
    EXPECT_THROW(run(m, p, 1.0, warm), std::invalid_argument);
}

TEST(Simulator, NoReplicationWastesNothing)
{
    const auto m = build_fs_scenario(3, 1.0, 0.5, one, nwu);
    const auto s = run(m, uniform_power_of_d(3, 1), 1.0, config(200'000));
    for (const auto& row : s.tau2) {
        for (double x : row) {
            EXPECT_DOUBLE_EQ(x, 0.0);
        }
    }
    // uniform routing: mean of 1 / r over {1, 0.5, 0.5} times E[Y] = 1
    EXPECT_NEAR(s.mean_overlap, 5.0 / 3.0, 0.05);
}

TEST(Simulator, AccountingInvariantsOnRandomSystems)
{
    Stream rng(17, "invariants");
    for (int t = 0; t < 25; ++t) {
        const auto m = experiments::random_model(rng, 5, {expo, nbu, nwu, one});
        const auto p = experiments::random_policy(rng, m.servers);
        const double lam = 0.6 * gamma_thresholds(m, p).lambda_sup;
        auto cfg = config(20'000, 100 + t);
        cfg.assert_invariants = true;
        const auto s = run(m, p, lam, cfg);
        EXPECT_GT(s.property_checks, 0U);
        EXPECT_EQ(s.property_violations, 0U);
        EXPECT_FALSE(s.first_violation.has_value());
        EXPECT_GE(s.pi0_star, -1e-12);
        EXPECT_LE(s.pi0_star, s.pi0_bar + 1e-12);
        EXPECT_LE(s.pi0_bar, 1.0 + 1e-12);
        for (std::size_t i = 0; i < m.servers; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < m.type_count(); ++j) {
                EXPECT_NEAR(s.tau[i][j], s.tau1[i][j] + s.tau2[i][j], 1e-12);
                EXPECT_GE(s.tau1[i][j], 0.0);
                EXPECT_GE(s.tau2[i][j], 0.0);
                row += s.tau[i][j];
            }
            EXPECT_LE(row, 1.0 + 1e-9);
            // a server busy at all is busy only while the system is non-empty
            EXPECT_LE(row, s.pi0_bar + 1e-9);
        }
        EXPECT_GE(s.mean_overlap, 0.0);
        EXPECT_LE(s.mean_overlap, s.mean_latency + 1e-12);
    }
}

TEST(Simulator, OldestJobCheckFlagsIdleReplica)
{
    const std::vector<std::uint8_t> subset{0, 2};
    const std::vector<std::int64_t> serving{4, -1, 4};
    SystemSnapshot ok{4, subset, serving};
    EXPECT_FALSE(assert_oldest_job_property(ok).has_value());
    const std::vector<std::int64_t> broken{4, -1, 7};
    SystemSnapshot bad{4, subset, broken};
    const auto v = assert_oldest_job_property(bad);
    ASSERT_TRUE(v.has_value());
    EXPECT_EQ(v->server, 2U);
    SystemSnapshot empty{std::nullopt, {}, broken};
    EXPECT_FALSE(assert_oldest_job_property(empty).has_value());
}

TEST(Simulator, SeedDeterminesTrajectory)
{
    const auto m = build_fs_scenario(3, 1.0, 0.5, one, nbu);
    const auto p = uniform_power_of_d(3, 2);
    const auto a = run(m, p, 1.0, config(20'000, 42));
    const auto b = run(m, p, 1.0, config(20'000, 42));
    const auto c = run(m, p, 1.0, config(20'000, 43));
    EXPECT_EQ(a.trace_hash, b.trace_hash);
    EXPECT_EQ(a.events, b.events);
    EXPECT_DOUBLE_EQ(a.mean_latency, b.mean_latency);
    EXPECT_NE(a.trace_hash, c.trace_hash);
}

TEST(Simulator, TraceIsJsonLines)
{
    const auto m = build_fs_scenario(3, 1.0, 0.5, one, expo);
    std::ostringstream out;
    auto cfg = config(10'000, 2);
    cfg.trace = &out;
    const auto s = run(m, uniform_power_of_d(3, 2), 0.8, cfg);
    std::istringstream in(out.str());
    std::string line;
    std::uint64_t lines = 0;
    std::map<std::string, std::uint64_t> kinds;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        ASSERT_TRUE(j.contains("t"));
        ++kinds[j.at("kind").get<std::string>()];
        if (j.at("server").is_number()) {
            EXPECT_GE(j.at("server").get<int>(), 1);
            EXPECT_LE(j.at("server").get<int>(), 3);
        }
        ++lines;
    }
    EXPECT_GT(lines, 0U);
    // the run drains after the last arrival
    EXPECT_EQ(kinds["arrival"], 10'000U);
    EXPECT_EQ(kinds["completion"], 10'000U);
    EXPECT_GT(kinds["cancel"], 0U);
    EXPECT_GE(kinds["start"], kinds["completion"] + kinds["cancel"]);
    EXPECT_EQ(s.jobs_completed, 10'000U);
}

TEST(Simulator, IdenticalReplicasWorkIdentity)
{
    // the finishing replica serves the whole job alone, so speed-weighted effective time equals offered work
    const auto m = build_fs_scenario(3, 1.0, 0.5, one, one);
    const double lam = 0.9;
    const auto s = run(m, uniform_power_of_d(3, 2), lam, config(1'000'000, 9));
    ASSERT_FALSE(s.divergent());
    for (std::size_t j = 0; j < 3; ++j) {
        const auto eff = batch_estimate(s, [&](const BatchView& b) {
            double x = 0.0;
            for (std::size_t i = 0; i < 3; ++i) {
                x += m.speed(i, j) * b.effective(i, j);
            }
            return x;
        });
        EXPECT_NEAR(eff.mean, lam / 3.0, 3.0 * eff.std_error + 1e-3);
        const auto all = batch_estimate(s, [&](const BatchView& b) { return weighted_busy(m, b, j); });
        EXPECT_GT(all.mean, lam / 3.0);
    }
}

TEST(Simulator, NbuReplicasOverspendWork)
{
    const auto m = build_fs_scenario(3, 1.0, 0.5, one, nbu);
    const double lam = 1.1;
    const auto s = run(m, uniform_power_of_d(3, 2), lam, config(1'000'000, 4));
    ASSERT_FALSE(s.divergent());
    for (std::size_t j = 0; j < 3; ++j) {
        const auto w = batch_estimate(s, [&](const BatchView& b) { return weighted_busy(m, b, j); });
        EXPECT_GT(w.mean - 3.0 * w.std_error, lam / 3.0);
    }
}

TEST(Simulator, OverloadIsDetected)
{
    const auto m = build_homogeneous(1, one, expo);
    EXPECT_TRUE(run(m, uniform_power_of_d(1, 1), 1.2, config(200'000)).divergent());
    EXPECT_FALSE(run(m, uniform_power_of_d(1, 1), 0.8, config(200'000)).divergent());
}

TEST(Boundary, SingleServerCapacity)
{
    const auto m = build_homogeneous(1, one, expo);
    BoundaryConfig cfg;
    cfg.probe = config(1'000'000, 7);
    cfg.hint = 0.5;
    const auto b = estimate_boundary(m, uniform_power_of_d(1, 1), cfg);
    EXPECT_NEAR(b.value, 1.0, 0.05);
    EXPECT_LE(b.lo, b.hi);
    EXPECT_LE(b.hi - b.lo, 0.02 * b.value + 1e-12);
    EXPECT_FALSE(b.probes.empty());
}

TEST(Boundary, BatchStatistics)
{
    EXPECT_NEAR(detail::t_quantile_975(31), 2.0395, 2e-3);
    EXPECT_NEAR(detail::t_quantile_975(1000000), 1.95996, 1e-4);
    EXPECT_NEAR(detail::batch_std_error({1.0, 2.0, 3.0, 4.0}), std::sqrt(5.0 / 3.0 / 4.0), 1e-12);
}
