#pragma once

#include "redlab/distributions.hpp"

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace redlab {

inline constexpr std::size_t max_servers = 32;
inline constexpr std::size_t max_types = 64;

/// identical: every replica of a job shares the variation c_j.
/// iid: each (job, server) pair draws its own Y_ij.
enum class ReplicaMode { identical, iid };

enum class TypeVisibility { known, unknown };

inline const char* to_string(ReplicaMode mode) { return mode == ReplicaMode::identical ? "identical" : "iid"; }
inline const char* to_string(TypeVisibility v) { return v == TypeVisibility::known ? "known" : "unknown"; }

struct JobTypeSpec {
    double probability;
    Distribution size_law;
    Distribution variation_law;
    std::vector<double> speeds;  // r_ij, one per server

    /// E[X_j] E[S_j]
    [[nodiscard]] double mean_work() const { return mean(size_law) * mean(variation_law); }
};

struct SystemModel {
    std::size_t servers = 0;
    std::vector<JobTypeSpec> types;
    ReplicaMode replica_mode = ReplicaMode::iid;

    [[nodiscard]] std::size_t type_count() const noexcept { return types.size(); }
    [[nodiscard]] double speed(std::size_t server, std::size_t type) const { return types[type].speeds[server]; }
};

/// Every violated invariant, empty when the model is valid.
inline std::vector<std::string> validate(const SystemModel& model)
{
    std::vector<std::string> errors;
    if (model.servers < 1) {
        errors.emplace_back("at least one server required");
    }
    if (model.servers > max_servers) {
        errors.emplace_back("at most " + std::to_string(max_servers) + " servers supported");
    }
    if (model.types.empty()) {
        errors.emplace_back("at least one job type required");
    }
    if (model.types.size() > max_types) {
        errors.emplace_back("at most " + std::to_string(max_types) + " job types supported");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < model.types.size(); ++j) {
        const auto& type = model.types[j];
        const std::string tag = "type " + std::to_string(j + 1) + ": ";
        if (!(type.probability > 0.0 && type.probability <= 1.0)) {
            errors.push_back(tag + "probability outside (0, 1]");
        }
        total += type.probability;
        if (type.speeds.size() != model.servers) {
            errors.push_back(tag + "speed vector length " + std::to_string(type.speeds.size()) + " != "
                             + std::to_string(model.servers));
        }
        for (std::size_t i = 0; i < type.speeds.size(); ++i) {
            if (!(type.speeds[i] > 0.0) || !std::isfinite(type.speeds[i])) {
                errors.push_back(tag + "zero speed at server " + std::to_string(i + 1));
            }
        }
        if (model.replica_mode == ReplicaMode::identical && !type.variation_law.is<Deterministic>()) {
            errors.push_back(tag + "identical replicas require a deterministic variation law");
        }
    }
    if (!model.types.empty() && std::fabs(total - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "probabilities sum " << total;
        errors.push_back(os.str());
    }
    return errors;
}

inline void require_valid(const SystemModel& model)
{
    const auto errors = validate(model);
    if (!errors.empty()) {
        std::string msg = "invalid model:";
        for (const auto& e : errors) {
            msg += " " + e + ";";
        }
        throw std::invalid_argument(msg);
    }
}

inline ReplicaMode default_mode(const Distribution& variation)
{
    return variation.is<Deterministic>() ? ReplicaMode::identical : ReplicaMode::iid;
}

/// Fast-slow scenario: type j is served at r_fast on server j, r_slow elsewhere.
inline SystemModel build_fs_scenario(std::size_t n, double r_fast, double r_slow, const Distribution& size_law,
                                     const Distribution& variation_law)
{
    if (!(r_fast > 0.0) || !(r_slow > 0.0)) {
        throw std::invalid_argument("fast-slow scenario needs positive speeds");
    }
    if (r_slow > r_fast) {
        throw std::invalid_argument("fast-slow scenario needs r_slow <= r_fast");
    }
    if (n < 1) {
        throw std::invalid_argument("fast-slow scenario needs at least one server");
    }
    SystemModel model;
    model.servers = n;
    model.replica_mode = default_mode(variation_law);
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> speeds(n, r_slow);
        speeds[j] = r_fast;
        model.types.push_back({1.0 / static_cast<double>(n), size_law, variation_law, std::move(speeds)});
    }
    require_valid(model);
    return model;
}

inline SystemModel build_homogeneous(std::size_t n, const Distribution& size_law, const Distribution& variation_law)
{
    if (n < 1) {
        throw std::invalid_argument("homogeneous scenario needs at least one server");
    }
    SystemModel model;
    model.servers = n;
    model.replica_mode = default_mode(variation_law);
    model.types.push_back({1.0, size_law, variation_law, std::vector<double>(n, 1.0)});
    require_valid(model);
    return model;
}

/// Relabels servers and types jointly: new server perm[i] is old server i,
/// new type perm[j] is old type j.
inline SystemModel permute(const SystemModel& model, const std::vector<std::size_t>& server_perm,
                           const std::vector<std::size_t>& type_perm)
{
    SystemModel out = model;
    for (std::size_t j = 0; j < model.types.size(); ++j) {
        auto& target = out.types[type_perm[j]];
        target = model.types[j];
        for (std::size_t i = 0; i < model.servers; ++i) {
            target.speeds[server_perm[i]] = model.types[j].speeds[i];
        }
    }
    return out;
}

}  // namespace redlab
