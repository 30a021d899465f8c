#include "redlab/assignment.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace redlab;

TEST(Catalog, SizesAndOrder)
{
    EXPECT_EQ(binomial(5, 2), 10U);
    EXPECT_EQ(binomial(32, 16), 601080390U);
    for (std::size_t n = 1; n <= 7; ++n) {
        for (std::size_t d = 1; d <= n; ++d) {
            SubsetCatalog c(n, d);
            ASSERT_EQ(c.size(), binomial(n, d));
            std::set<std::vector<std::uint8_t>> seen;
            for (std::size_t h = 0; h < c.size(); ++h) {
                const auto& s = c.subset(h);
                ASSERT_EQ(s.size(), d);
                EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
                EXPECT_TRUE(seen.insert(s).second);
                if (h > 0) {
                    EXPECT_LT(c.subset(h - 1), s);
                }
                EXPECT_EQ(c.index_of(s), h);
                for (std::size_t i = 0; i < n; ++i) {
                    EXPECT_EQ(c.contains(h, i), std::find(s.begin(), s.end(), i) != s.end());
                }
            }
        }
    }
    SubsetCatalog c(3, 2);
    EXPECT_EQ(c.subset(0), (std::vector<std::uint8_t>{0, 1}));
    EXPECT_EQ(c.subset(1), (std::vector<std::uint8_t>{0, 2}));
    EXPECT_EQ(c.subset(2), (std::vector<std::uint8_t>{1, 2}));
}

TEST(Catalog, Limits)
{
    EXPECT_THROW(SubsetCatalog(3, 0), std::invalid_argument);
    EXPECT_THROW(SubsetCatalog(3, 4), std::invalid_argument);
    EXPECT_THROW(SubsetCatalog(32, 16), std::invalid_argument);
    EXPECT_NO_THROW(SubsetCatalog(20, 10));
}

TEST(Policy, UniformMarginals)
{
    for (std::size_t n = 1; n <= 6; ++n) {
        for (std::size_t d = 1; d <= n; ++d) {
            const auto p = uniform_power_of_d(n, d);
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_NEAR(marginal(p, i), static_cast<double>(d) / static_cast<double>(n), 1e-12);
            }
        }
    }
}

TEST(Policy, RejectsBadVectors)
{
    auto c = std::make_shared<const SubsetCatalog>(3, 2);
    EXPECT_THROW(Policy::type_blind(c, {0.5, 0.5}), std::invalid_argument);
    EXPECT_THROW(Policy::type_blind(c, {0.5, 0.6, -0.1}), std::invalid_argument);
    EXPECT_THROW(Policy::type_blind(c, {0.5, 0.4, 0.0}), std::invalid_argument);
    EXPECT_THROW(Policy::by_type(c, {}), std::invalid_argument);
    EXPECT_NO_THROW(Policy::type_blind(c, {0.2, 0.3, 0.5}));
}

TEST(Policy, TypeBlindIgnoresTypeAndKnownKeepsIt)
{
    auto c = std::make_shared<const SubsetCatalog>(3, 1);
    const auto blind = Policy::type_blind(c, {0.2, 0.3, 0.5});
    EXPECT_EQ(blind.visibility(), TypeVisibility::unknown);
    EXPECT_EQ(blind.probs(2), blind.probs(0));
    const auto known = blind.as_known(3);
    EXPECT_EQ(known.visibility(), TypeVisibility::known);
    EXPECT_EQ(known.vector_count(), 3U);
    const auto by = Policy::by_type(c, {{1, 0, 0}, {0, 1, 0}});
    EXPECT_DOUBLE_EQ(marginal(by, 1, 1), 1.0);
    EXPECT_DOUBLE_EQ(marginal(by, 1, 0), 0.0);
    EXPECT_THROW(static_cast<void>(by.probs(2)), std::out_of_range);
}

TEST(Policy, SamplingFrequencies)
{
    auto c = std::make_shared<const SubsetCatalog>(4, 2);
    const std::vector<double> probs{0.05, 0.25, 0.0, 0.3, 0.1, 0.3};
    const auto p = Policy::type_blind(c, probs);
    Stream rng(9, "sampling");
    std::vector<double> counts(probs.size(), 0.0);
    const int n = 200'000;
    for (int k = 0; k < n; ++k) {
        counts[p.sample(0, rng)] += 1.0;
    }
    for (std::size_t h = 0; h < probs.size(); ++h) {
        const double sd = std::sqrt(probs[h] * (1 - probs[h]) / n);
        EXPECT_NEAR(counts[h] / n, probs[h], 5 * sd + 1e-12);
    }
}

TEST(Policy, DiagonalRouting)
{
    const auto m = build_fs_scenario(3, 1.0, 0.5, Distribution::deterministic(1.0), Distribution::exponential(1.0));
    const auto p = diag_d1_policy(m);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_DOUBLE_EQ(marginal(p, j, j), 1.0);
    }
    const auto h = build_homogeneous(2, Distribution::deterministic(1.0), Distribution::exponential(1.0));
    EXPECT_THROW(diag_d1_policy(h), std::invalid_argument);
}
