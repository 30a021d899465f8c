#include "redlab/workload.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace redlab;

namespace {

const auto one = Distribution::deterministic(1.0);
const auto expo = Distribution::exponential(1.0);

bool mentions(const std::vector<std::string>& errors, const std::string& needle)
{
    return std::any_of(errors.begin(), errors.end(),
                       [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

}  // namespace

TEST(Workload, FastSlowBuilder)
{
    const auto m = build_fs_scenario(3, 1.0, 0.5, one, expo);
    ASSERT_EQ(m.servers, 3U);
    ASSERT_EQ(m.type_count(), 3U);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_DOUBLE_EQ(m.types[j].probability, 1.0 / 3.0);
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_DOUBLE_EQ(m.speed(i, j), i == j ? 1.0 : 0.5);
        }
    }
    EXPECT_EQ(m.replica_mode, ReplicaMode::iid);
    EXPECT_TRUE(validate(m).empty());
    EXPECT_EQ(build_fs_scenario(2, 1.0, 0.5, one, one).replica_mode, ReplicaMode::identical);
    EXPECT_THROW(build_fs_scenario(3, 0.5, 1.0, one, expo), std::invalid_argument);
    EXPECT_THROW(build_fs_scenario(3, 1.0, 0.0, one, expo), std::invalid_argument);
}

TEST(Workload, HomogeneousBuilder)
{
    const auto m = build_homogeneous(4, one, expo);
    EXPECT_EQ(m.type_count(), 1U);
    EXPECT_EQ(m.types[0].speeds, std::vector<double>(4, 1.0));
    EXPECT_DOUBLE_EQ(m.types[0].mean_work(), 1.0);
}

TEST(Workload, ValidationEnumeratesViolations)
{
    SystemModel m = build_fs_scenario(3, 1.0, 0.5, one, expo);
    m.types[1].speeds[2] = 0.0;
    m.types[0].probability = 0.5;
    const auto errors = validate(m);
    EXPECT_TRUE(mentions(errors, "zero speed at server 3"));
    EXPECT_TRUE(mentions(errors, "probabilities sum"));
    EXPECT_THROW(require_valid(m), std::invalid_argument);

    SystemModel id = build_homogeneous(2, one, expo);
    id.replica_mode = ReplicaMode::identical;
    EXPECT_TRUE(mentions(validate(id), "identical replicas require"));

    SystemModel short_speeds = build_homogeneous(2, one, expo);
    short_speeds.types[0].speeds.pop_back();
    EXPECT_TRUE(mentions(validate(short_speeds), "speed vector length"));

    SystemModel empty;
    EXPECT_FALSE(validate(empty).empty());
}

TEST(Workload, PermuteRelabelsJointly)
{
    const auto m = build_fs_scenario(3, 1.0, 0.25, one, expo);
    const std::vector<std::size_t> perm{2, 0, 1};
    const auto p = permute(m, perm, perm);
    for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_DOUBLE_EQ(p.speed(perm[i], perm[j]), m.speed(i, j));
        }
    }
    EXPECT_TRUE(validate(p).empty());
}
