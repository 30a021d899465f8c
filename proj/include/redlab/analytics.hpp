#pragma once

#include "redlab/assignment.hpp"
#include "redlab/distributions.hpp"
#include "redlab/lp.hpp"
#include "redlab/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace redlab {

/// Per-(server, type) busy-time fractions measured at arrival rate lambda0.
struct TauMatrix {
    std::size_t servers = 0;
    std::size_t types = 0;
    double lambda0 = 0.0;
    std::vector<double> tau;   // row-major [i * types + j]
    std::vector<double> tau1;  // effective: the server finished the job
    std::vector<double> tau2;  // wasted: a sibling finished first
    bool has_split = false;

    TauMatrix() = default;
    TauMatrix(std::size_t n, std::size_t m, double lambda)
        : servers(n), types(m), lambda0(lambda), tau(n * m, 0.0), tau1(n * m, 0.0), tau2(n * m, 0.0)
    {
    }

    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return tau[i * types + j]; }
    double& at(std::size_t i, std::size_t j) { return tau[i * types + j]; }
    [[nodiscard]] double server_total(std::size_t i) const
    {
        double s = 0.0;
        for (std::size_t j = 0; j < types; ++j) {
            s += at(i, j);
        }
        return s;
    }
};

/// Load proxies for a static policy under simultaneous replica starts.
struct LoadProxies {
    std::size_t servers = 0;
    std::size_t types = 0;
    std::size_t subsets = 0;
    std::vector<std::vector<double>> theta;      // [j][h], E[min_l Y_l / r_lj] over subset h
    std::vector<std::vector<double>> hat_theta;  // [j][h], E[S_j] / sum_l r_lj
    std::vector<std::vector<std::optional<double>>> gamma_ij;  // [i][j]
    std::vector<std::optional<double>> gamma_i;
    std::vector<std::optional<double>> hat_gamma_i;
    /// sum_j p_j E[X_j] sum_{h ∋ i} p_{h|j} theta_jh: offered load at server i per unit arrival rate
    std::vector<double> load;
    std::vector<double> hat_load;
    double gamma_0 = 0.0;
    double hat_gamma_0 = 0.0;
};

struct StabilityReport {
    std::string kind;
    double lambda_sup = 0.0;
    /// rows are job types for type-dependent witnesses; a single row otherwise
    std::vector<std::vector<double>> witness;
    std::vector<double> per_server_thresholds;
};

namespace detail {

inline std::vector<double> subset_speeds(const SystemModel& model, const SubsetCatalog& catalog, std::size_t h,
                                         std::size_t type)
{
    std::vector<double> speeds;
    for (auto i : catalog.subset(h)) {
        speeds.push_back(model.speed(i, type));
    }
    return speeds;
}

inline double threshold_from_load(double load)
{
    return load > 0.0 ? 1.0 / load : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// theta_j with all N servers: E[min_i Y_ij / r_ij].
inline double full_replication_theta(const SystemModel& model, std::size_t type)
{
    return expected_min_weighted(model.types[type].variation_law, model.types[type].speeds);
}

inline LoadProxies compute_proxies(const SystemModel& model, const Policy& policy)
{
    require_valid(model);
    if (policy.servers() != model.servers) {
        throw std::invalid_argument("policy and model disagree on server count");
    }
    if (policy.visibility() == TypeVisibility::known && policy.vector_count() != model.type_count()) {
        throw std::invalid_argument("type-dependent policy needs one vector per job type");
    }
    const auto& catalog = policy.catalog();
    const std::size_t n = model.servers;
    const std::size_t m = model.type_count();
    const std::size_t k = catalog.size();

    LoadProxies out;
    out.servers = n;
    out.types = m;
    out.subsets = k;
    out.theta.assign(m, std::vector<double>(k, 0.0));
    out.hat_theta.assign(m, std::vector<double>(k, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        const auto& type = model.types[j];
        const double es = mean(type.variation_law);
        for (std::size_t h = 0; h < k; ++h) {
            if (policy.probs(j)[h] == 0.0) {
                continue;
            }
            const auto speeds = detail::subset_speeds(model, catalog, h, j);
            out.theta[j][h] = expected_min_weighted(type.variation_law, speeds);
            double rate = 0.0;
            for (double r : speeds) {
                rate += r;
            }
            out.hat_theta[j][h] = es / rate;
        }
    }

    out.gamma_ij.assign(n, std::vector<std::optional<double>>(m));
    out.gamma_i.assign(n, std::nullopt);
    out.hat_gamma_i.assign(n, std::nullopt);
    out.load.assign(n, 0.0);
    out.hat_load.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double assigned = 0.0;  // sum_j p_j * marginal_j(i)
        for (std::size_t j = 0; j < m; ++j) {
            const auto& probs = policy.probs(j);
            const double px = model.types[j].probability * mean(model.types[j].size_law);
            double weight = 0.0;
            double weighted = 0.0;
            double hat_weighted = 0.0;
            for (std::size_t h = 0; h < k; ++h) {
                if (probs[h] > 0.0 && catalog.contains(h, i)) {
                    weight += probs[h];
                    weighted += probs[h] * out.theta[j][h];
                    hat_weighted += probs[h] * out.hat_theta[j][h];
                }
            }
            if (weight > 0.0) {
                out.gamma_ij[i][j] = weighted / weight;
            }
            out.load[i] += px * weighted;
            out.hat_load[i] += px * hat_weighted;
            assigned += model.types[j].probability * weight;
        }
        if (assigned > 0.0) {
            out.gamma_i[i] = out.load[i] / assigned;
            out.hat_gamma_i[i] = out.hat_load[i] / assigned;
        }
    }

    for (std::size_t j = 0; j < m; ++j) {
        const auto& type = model.types[j];
        const double px = type.probability * mean(type.size_law);
        double rate = 0.0;
        for (double r : type.speeds) {
            rate += r;
        }
        out.gamma_0 += px * full_replication_theta(model, j);
        out.hat_gamma_0 += px * mean(type.variation_law) / rate;
    }
    return out;
}

/// Supremal arrival rate under full replication: the system is M/G/1.
inline double lambda_star(const SystemModel& model)
{
    require_valid(model);
    double gamma0 = 0.0;
    for (std::size_t j = 0; j < model.type_count(); ++j) {
        gamma0 += model.types[j].probability * mean(model.types[j].size_law) * full_replication_theta(model, j);
    }
    return 1.0 / gamma0;
}

inline StabilityReport lambda_star_report(const SystemModel& model)
{
    StabilityReport rep;
    rep.kind = "full_replication";
    rep.lambda_sup = lambda_star(model);
    rep.per_server_thresholds.assign(model.servers, rep.lambda_sup);
    rep.witness = {std::vector<double>{1.0}};
    return rep;
}

/// No replication, known types: maximize lambda over type-dependent routing.
///
/// Flow variables f_ij = lambda p_j p_ij turn the region into a linear program:
/// max lambda s.t. sum_i f_ij = lambda p_j, sum_j f_ij E[X_j]E[S_j]/r_ij <= 1.
inline StabilityReport stability_known_d1(const SystemModel& model)
{
    require_valid(model);
    const std::size_t n = model.servers;
    const std::size_t m = model.type_count();
    const std::size_t vars = n * m + 1;
    if (vars > lp::max_variables) {
        throw std::invalid_argument("model too large for the dense simplex");
    }
    const std::size_t lambda_var = n * m;
    auto flow = [n](std::size_t i, std::size_t j) { return j * n + i; };

    lp::Problem problem;
    problem.objective.assign(vars, 0.0);
    problem.objective[lambda_var] = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        lp::Row row{std::vector<double>(vars, 0.0), lp::Relation::equal, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            row.coeffs[flow(i, j)] = 1.0;
        }
        row.coeffs[lambda_var] = -model.types[j].probability;
        problem.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < n; ++i) {
        lp::Row row{std::vector<double>(vars, 0.0), lp::Relation::less_equal, 1.0};
        for (std::size_t j = 0; j < m; ++j) {
            row.coeffs[flow(i, j)] = model.types[j].mean_work() / model.speed(i, j);
        }
        problem.rows.push_back(std::move(row));
    }
    const auto sol = lp::solve(problem);
    if (sol.status != lp::Status::optimal) {
        throw std::runtime_error("known-type routing program did not reach an optimum");
    }

    StabilityReport rep;
    rep.kind = "known_types_d1";
    rep.lambda_sup = sol.x[lambda_var];
    rep.witness.assign(m, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        const double total = rep.lambda_sup * model.types[j].probability;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double share = sol.x[flow(i, j)] / total;
            // simplex round-off leaves ~1e-16 on nonbasic flows
            rep.witness[j][i] = share > 1e-12 ? share : 0.0;
            sum += rep.witness[j][i];
        }
        for (double& p : rep.witness[j]) {
            p /= sum;
        }
    }
    rep.per_server_thresholds.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double load = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            load += model.types[j].probability * rep.witness[j][i] * model.types[j].mean_work() / model.speed(i, j);
        }
        rep.per_server_thresholds[i] = detail::threshold_from_load(load);
    }
    return rep;
}

/// Exact d = 1 load per assigned job: sum_j p_j E[X_j]E[S_j] / r_ij.
inline std::vector<double> d1_server_loads(const SystemModel& model)
{
    std::vector<double> out(model.servers, 0.0);
    for (std::size_t i = 0; i < model.servers; ++i) {
        for (std::size_t j = 0; j < model.type_count(); ++j) {
            out[i] += model.types[j].probability * model.types[j].mean_work() / model.speed(i, j);
        }
    }
    return out;
}

/// No replication, unknown types; the harmonic allocation p_i ∝ 1/load_i is optimal.
inline StabilityReport stability_unknown_d1(const SystemModel& model)
{
    require_valid(model);
    const auto loads = d1_server_loads(model);
    double inv_sum = 0.0;
    for (double g : loads) {
        inv_sum += 1.0 / g;
    }
    StabilityReport rep;
    rep.kind = "unknown_types_d1";
    rep.lambda_sup = inv_sum;
    rep.witness.assign(1, std::vector<double>(model.servers, 0.0));
    rep.per_server_thresholds.assign(model.servers, 0.0);
    for (std::size_t i = 0; i < model.servers; ++i) {
        rep.witness[0][i] = (1.0 / loads[i]) / inv_sum;
        rep.per_server_thresholds[i] = 1.0 / (rep.witness[0][i] * loads[i]);
    }
    return rep;
}

/// Proxy stability boundary: server i saturates at 1 / (gamma_i * marginal_i).
inline StabilityReport gamma_thresholds(const SystemModel& model, const Policy& policy)
{
    const auto proxies = compute_proxies(model, policy);
    StabilityReport rep;
    rep.kind = "gamma_proxy";
    rep.lambda_sup = std::numeric_limits<double>::infinity();
    rep.per_server_thresholds.assign(model.servers, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < model.servers; ++i) {
        if (!proxies.gamma_i[i]) {
            continue;
        }
        rep.per_server_thresholds[i] = detail::threshold_from_load(proxies.load[i]);
        rep.lambda_sup = std::min(rep.lambda_sup, rep.per_server_thresholds[i]);
    }
    for (std::size_t j = 0; j < policy.vector_count(); ++j) {
        rep.witness.push_back(policy.probs(j));
    }
    return rep;
}

/// max_i hat_gamma_i * marginal_i - hat_gamma_0, nonnegative for every policy.
inline double lemma1_gap(std::span<const std::optional<double>> hat_gammas, double hat_gamma_0, const Policy& policy)
{
    if (policy.visibility() != TypeVisibility::unknown) {
        throw std::invalid_argument("lemma1_gap takes a type-blind policy");
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hat_gammas.size(); ++i) {
        if (!hat_gammas[i]) {
            continue;
        }
        worst = std::max(worst, *hat_gammas[i] * marginal(policy, i));
    }
    return worst - hat_gamma_0;
}

inline double lemma1_gap(const LoadProxies& proxies, const Policy& policy)
{
    return lemma1_gap(proxies.hat_gamma_i, proxies.hat_gamma_0, policy);
}

// ---------------------------------------------------------------------------
// Constructive de-replication

class InequalityViolation : public std::invalid_argument {
public:
    InequalityViolation(std::size_t type, double sigma)
        : std::invalid_argument("type " + std::to_string(type + 1) + ": measured busy time below offered load (sigma="
                                + std::to_string(sigma) + ")"),
          type_(type), sigma_(sigma)
    {
    }
    [[nodiscard]] std::size_t type() const noexcept { return type_; }
    [[nodiscard]] double sigma() const noexcept { return sigma_; }

private:
    std::size_t type_;
    double sigma_;
};

struct DeReplication {
    Policy policy;                            // d = 1, type dependent, at rate lambda0 + delta_lambda
    double lambda0 = 0.0;
    double delta_lambda = 0.0;
    double kappa = 0.0;
    double epsilon = 0.0;                     // tight slack in the aggregate inequality
    std::vector<double> sigma{};                // per type
    std::vector<double> delta_tau{};            // per server
    std::vector<double> server_speed{};         // time-average speed r_i
    std::vector<std::vector<double>> p_tilde{}; // [j][i]
    std::vector<double> p_hat{};                // [i]
    std::vector<double> loads{};                // per server at lambda0 + delta_lambda
};

inline constexpr double sigma_acceptance = 1.0 + 1e-9;

/// Builds a d = 1 policy sustaining lambda0 + delta_lambda from busy fractions
/// measured under a stable replicated policy.
inline DeReplication prop1_derive_d1(const SystemModel& model, const TauMatrix& tau)
{
    require_valid(model);
    const std::size_t n = model.servers;
    const std::size_t m = model.type_count();
    if (tau.servers != n || tau.types != m) {
        throw std::invalid_argument("busy-time matrix shape differs from model");
    }
    if (!(tau.lambda0 > 0.0)) {
        throw std::invalid_argument("busy-time matrix needs a positive measurement rate");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (!(tau.at(i, j) >= 0.0)) {
                throw std::invalid_argument("busy-time fractions must be nonnegative");
            }
        }
        if (!(tau.server_total(i) < 1.0)) {
            throw std::invalid_argument("server " + std::to_string(i + 1) + " is saturated in the measured run");
        }
    }

    const double lambda0 = tau.lambda0;
    std::vector<double> offered(m);  // p_j E[X_j] E[S_j]
    double offered_total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        offered[j] = model.types[j].probability * model.types[j].mean_work();
        offered_total += offered[j];
    }

    std::vector<double> weighted(m, 0.0);  // sum_i r_ij tau_ij
    double weighted_total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            weighted[j] += model.speed(i, j) * tau.at(i, j);
        }
        weighted_total += weighted[j];
    }

    DeReplication out{Policy::by_type(std::make_shared<const SubsetCatalog>(n, 1),
                                      std::vector<std::vector<double>>(m, std::vector<double>(n, 1.0 / n)))};
    out.lambda0 = lambda0;
    out.sigma.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        out.sigma[j] = weighted[j] > 0.0 ? lambda0 * offered[j] / weighted[j] : std::numeric_limits<double>::infinity();
        if (out.sigma[j] > sigma_acceptance) {
            throw InequalityViolation(j, out.sigma[j]);
        }
        out.sigma[j] = std::min(out.sigma[j], 1.0);
    }
    out.epsilon = weighted_total / (lambda0 * offered_total) - 1.0;

    out.p_tilde.assign(m, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            out.p_tilde[j][i] = model.speed(i, j) * tau.at(i, j) / weighted[j];
        }
    }

    out.delta_tau.assign(n, 0.0);
    out.server_speed.assign(n, 0.0);
    double max_speed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double inv = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            out.delta_tau[i] += (1.0 - out.sigma[j]) * tau.at(i, j);
            inv += offered[j] / model.speed(i, j);
            max_speed = std::max(max_speed, model.speed(i, j));
        }
        out.server_speed[i] = offered_total / inv;
    }
    out.kappa = *std::min_element(out.server_speed.begin(), out.server_speed.end()) / max_speed;

    double slack = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        slack += out.server_speed[i] * out.delta_tau[i];
    }
    out.delta_lambda = slack / offered_total;
    out.p_hat.assign(n, 0.0);
    if (slack > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            out.p_hat[i] = out.server_speed[i] * out.delta_tau[i] / slack;
        }
    }

    const double total_rate = lambda0 + out.delta_lambda;
    std::vector<std::vector<double>> mixed(m, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mixed[j][i] = (lambda0 * out.p_tilde[j][i] + out.delta_lambda * out.p_hat[i]) / total_rate;
            sum += mixed[j][i];
        }
        for (double& p : mixed[j]) {
            p /= sum;
        }
    }
    out.loads.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            out.loads[i] += total_rate * model.types[j].probability * mixed[j][i] * model.types[j].mean_work()
                          / model.speed(i, j);
        }
    }
    out.policy = Policy::by_type(std::make_shared<const SubsetCatalog>(n, 1), std::move(mixed));
    return out;
}

/// Aggregate weighted service time per unit size under simultaneous starts,
/// the minimum over start offsets for NWU variations.
inline double lemma2_bound(const SystemModel& model, const std::vector<std::size_t>& subset, std::size_t type)
{
    require_valid(model);
    if (type >= model.type_count() || subset.empty()) {
        throw std::invalid_argument("lemma2_bound: bad subset or type");
    }
    const auto& law = model.types[type].variation_law;
    if (!is_nwu(law)) {
        throw std::invalid_argument("lemma2_bound applies to NWU variation laws only");
    }
    std::vector<double> speeds;
    double rate = 0.0;
    for (auto i : subset) {
        if (i >= model.servers) {
            throw std::invalid_argument("lemma2_bound: server index out of range");
        }
        speeds.push_back(model.speed(i, type));
        rate += model.speed(i, type);
    }
    return rate * expected_min_weighted(law, speeds);
}

}  // namespace redlab
