#pragma once

#include "redlab/quadrature.hpp"
#include "redlab/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace redlab {

struct Deterministic {
    double value;
};

struct Exponential {
    double rate;
};

/// ccdf exp(-(t/scale)^shape)
struct Weibull {
    double scale;
    double shape;
};

/// Takes the value k with probability 1/k and 0 otherwise.
struct ScaledBernoulli {
    double k;
};

using Law = std::variant<Deterministic, Exponential, Weibull, ScaledBernoulli>;

/// A validated probability law for intrinsic sizes or speed variations.
class Distribution {
public:
    static Distribution deterministic(double value)
    {
        require(value > 0.0 && std::isfinite(value), "deterministic value must be positive");
        return Distribution(Deterministic{value});
    }
    static Distribution exponential(double rate)
    {
        require(rate > 0.0 && std::isfinite(rate), "exponential rate must be positive");
        return Distribution(Exponential{rate});
    }
    static Distribution weibull(double scale, double shape)
    {
        require(scale > 0.0 && std::isfinite(scale), "weibull scale must be positive");
        require(shape > 0.0 && std::isfinite(shape), "weibull shape must be positive");
        return Distribution(Weibull{scale, shape});
    }
    static Distribution scaled_bernoulli(double k)
    {
        require(k > 1.0 && std::isfinite(k), "scaled bernoulli K must exceed 1");
        return Distribution(ScaledBernoulli{k});
    }

    [[nodiscard]] const Law& law() const noexcept { return law_; }

    template <class T>
    [[nodiscard]] bool is() const noexcept
    {
        return std::holds_alternative<T>(law_);
    }

    template <class T>
    [[nodiscard]] const T& as() const
    {
        return std::get<T>(law_);
    }

    [[nodiscard]] std::string describe() const
    {
        std::ostringstream os;
        os.precision(12);
        std::visit(
            [&os](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, Deterministic>) {
                    os << "deterministic(" << l.value << ")";
                } else if constexpr (std::is_same_v<T, Exponential>) {
                    os << "exponential(rate=" << l.rate << ")";
                } else if constexpr (std::is_same_v<T, Weibull>) {
                    os << "weibull(scale=" << l.scale << ",shape=" << l.shape << ")";
                } else {
                    os << "scaled_bernoulli(K=" << l.k << ")";
                }
            },
            law_);
        return os.str();
    }

    friend bool operator==(const Distribution& a, const Distribution& b)
    {
        if (a.law_.index() != b.law_.index()) {
            return false;
        }
        return std::visit(
            [&b](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                const auto& r = std::get<T>(b.law_);
                if constexpr (std::is_same_v<T, Deterministic>) {
                    return l.value == r.value;
                } else if constexpr (std::is_same_v<T, Exponential>) {
                    return l.rate == r.rate;
                } else if constexpr (std::is_same_v<T, Weibull>) {
                    return l.scale == r.scale && l.shape == r.shape;
                } else {
                    return l.k == r.k;
                }
            },
            a.law_);
    }

private:
    explicit Distribution(Law law) : law_(law) {}

    static void require(bool ok, const char* what)
    {
        if (!ok) {
            throw std::invalid_argument(what);
        }
    }

    Law law_;
};

inline double mean(const Distribution& dist)
{
    return std::visit(
        [](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return l.value;
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return 1.0 / l.rate;
            } else if constexpr (std::is_same_v<T, Weibull>) {
                return l.scale * std::tgamma(1.0 + 1.0 / l.shape);
            } else {
                return 1.0;
            }
        },
        dist.law());
}

inline double second_moment(const Distribution& dist)
{
    return std::visit(
        [](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return l.value * l.value;
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return 2.0 / (l.rate * l.rate);
            } else if constexpr (std::is_same_v<T, Weibull>) {
                return l.scale * l.scale * std::tgamma(1.0 + 2.0 / l.shape);
            } else {
                return l.k;
            }
        },
        dist.law());
}

/// P(S > t).
inline double ccdf(const Distribution& dist, double t)
{
    if (!(t >= 0.0)) {
        throw std::domain_error("ccdf requires t >= 0");
    }
    return std::visit(
        [t](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return t < l.value ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return std::exp(-l.rate * t);
            } else if constexpr (std::is_same_v<T, Weibull>) {
                return std::exp(-std::pow(t / l.scale, l.shape));
            } else {
                return t < l.k ? 1.0 / l.k : 0.0;
            }
        },
        dist.law());
}

/// Generalized inverse of the cdf, q in (0, 1).
inline double quantile(const Distribution& dist, double q)
{
    if (!(q > 0.0 && q < 1.0)) {
        throw std::domain_error("quantile level must lie in (0, 1)");
    }
    return std::visit(
        [q](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return l.value;
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return -std::log1p(-q) / l.rate;
            } else if constexpr (std::is_same_v<T, Weibull>) {
                return l.scale * std::pow(-std::log1p(-q), 1.0 / l.shape);
            } else {
                return q <= 1.0 - 1.0 / l.k ? 0.0 : l.k;
            }
        },
        dist.law());
}

inline double sample(const Distribution& dist, Stream& rng)
{
    return std::visit(
        [&rng](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return l.value;
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return -std::log(rng.uniform()) / l.rate;
            } else if constexpr (std::is_same_v<T, Weibull>) {
                return l.scale * std::pow(-std::log(rng.uniform()), 1.0 / l.shape);
            } else {
                return rng.uniform() * l.k < 1.0 ? l.k : 0.0;
            }
        },
        dist.law());
}

// ---------------------------------------------------------------------------
// Aging classes

enum class AgingTag { nbu, nwu, both, indeterminate };

struct AgingClass {
    AgingTag tag;
    bool strict;

    friend bool operator==(const AgingClass&, const AgingClass&) = default;
};

inline const char* to_string(AgingTag tag)
{
    switch (tag) {
    case AgingTag::nbu: return "NBU";
    case AgingTag::nwu: return "NWU";
    case AgingTag::both: return "Both";
    case AgingTag::indeterminate: return "Indeterminate";
    }
    return "?";
}

inline constexpr std::size_t aging_grid_size = 64;
inline constexpr double aging_grid_tolerance = 1e-12;

/// Checks the submultiplicative (NBU) or supermultiplicative (NWU) ccdf
/// inequality on all pairs of a quantile grid.
inline bool aging_grid_holds(const Distribution& dist, AgingTag tag)
{
    std::array<double, aging_grid_size> grid{};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = quantile(dist, (static_cast<double>(i) + 0.5) / static_cast<double>(grid.size()));
    }
    for (double t1 : grid) {
        for (double t2 : grid) {
            const double joint = ccdf(dist, t1 + t2);
            const double product = ccdf(dist, t1) * ccdf(dist, t2);
            if ((tag == AgingTag::nbu || tag == AgingTag::both) && joint > product + aging_grid_tolerance) {
                return false;
            }
            if ((tag == AgingTag::nwu || tag == AgingTag::both) && joint < product - aging_grid_tolerance) {
                return false;
            }
        }
    }
    return true;
}

inline AgingClass classify_aging(const Distribution& dist)
{
    const AgingClass rule = std::visit(
        [](const auto& l) -> AgingClass {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return {AgingTag::nbu, true};
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return {AgingTag::both, false};
            } else if constexpr (std::is_same_v<T, Weibull>) {
                if (l.shape > 1.0) {
                    return {AgingTag::nbu, true};
                }
                if (l.shape < 1.0) {
                    return {AgingTag::nwu, true};
                }
                return {AgingTag::both, false};
            } else {
                // equality holds on the nonzero support point
                return {AgingTag::nwu, false};
            }
        },
        dist.law());
    if (!aging_grid_holds(dist, rule.tag)) {
        return {AgingTag::indeterminate, false};
    }
    return rule;
}

inline bool is_nwu(const Distribution& dist)
{
    const auto tag = classify_aging(dist).tag;
    return tag == AgingTag::nwu || tag == AgingTag::both;
}

inline bool is_nbu(const Distribution& dist)
{
    const auto tag = classify_aging(dist).tag;
    return tag == AgingTag::nbu || tag == AgingTag::both;
}

// ---------------------------------------------------------------------------
// Moments of weighted minima min_l Y_l / r_l with independent Y_l

namespace detail {

inline constexpr double quadrature_rel_tol = 1e-9;
inline constexpr std::size_t max_bernoulli_factors = 20;

/// E[min^power] for the minimum of independent Y_l / r_l.
inline double min_moment(std::span<const Distribution> dists, std::span<const double> speeds, int power,
                         bool closed_form = true)
{
    if (dists.size() != speeds.size() || dists.empty()) {
        throw std::invalid_argument("weighted minimum needs equally sized, nonempty inputs");
    }
    for (double r : speeds) {
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw std::invalid_argument("speeds must be positive");
        }
    }

    // Atoms at zero (scaled Bernoulli) make the minimum vanish unless every
    // such factor takes its upper value; only that outcome of the lattice
    // contributes, with the cap min K_l / r_l.
    double atom_weight = 1.0;
    double cap = std::numeric_limits<double>::infinity();
    std::size_t bernoulli = 0;
    std::vector<std::size_t> continuous;
    for (std::size_t l = 0; l < dists.size(); ++l) {
        const auto& law = dists[l].law();
        if (const auto* b = std::get_if<ScaledBernoulli>(&law)) {
            ++bernoulli;
            atom_weight /= b->k;
            cap = std::min(cap, b->k / speeds[l]);
        } else if (const auto* c = std::get_if<Deterministic>(&law)) {
            cap = std::min(cap, c->value / speeds[l]);
        } else {
            continuous.push_back(l);
        }
    }
    if (bernoulli > max_bernoulli_factors) {
        throw std::invalid_argument("too many scaled Bernoulli factors for exact enumeration");
    }

    if (continuous.empty()) {
        return atom_weight * std::pow(cap, power);
    }

    // Exponentials are Weibull with shape 1; a common shape gives a Weibull minimum.
    bool common_shape = true;
    double shape = 0.0;
    double rate_sum = 0.0;  // sum of (r_l / scale_l)^shape
    for (std::size_t idx = 0; idx < continuous.size(); ++idx) {
        const std::size_t l = continuous[idx];
        double s_scale = 0.0;
        double s_shape = 0.0;
        if (const auto* e = std::get_if<Exponential>(&dists[l].law())) {
            s_scale = 1.0 / e->rate;
            s_shape = 1.0;
        } else {
            const auto& w = std::get<Weibull>(dists[l].law());
            s_scale = w.scale;
            s_shape = w.shape;
        }
        if (idx == 0) {
            shape = s_shape;
        } else if (s_shape != shape) {
            common_shape = false;
        }
        rate_sum += std::pow(speeds[l] / s_scale, s_shape);
    }

    if (closed_form && common_shape && std::isinf(cap)) {
        const double scale = std::pow(rate_sum, -1.0 / shape);
        return atom_weight * std::pow(scale, power) * std::tgamma(1.0 + power / shape);
    }

    auto survival = [&](double t) {
        double prod = 1.0;
        for (std::size_t l : continuous) {
            prod *= ccdf(dists[l], speeds[l] * t);
        }
        return prod;
    };
    auto integrand = [&](double t) { return power == 1 ? survival(t) : 2.0 * t * survival(t); };

    double value = 0.0;
    if (std::isfinite(cap)) {
        value = quadrature::integrate_geometric(integrand, 0.0, cap, quadrature_rel_tol);
    } else {
        double scale_hint = std::numeric_limits<double>::infinity();
        for (std::size_t l : continuous) {
            scale_hint = std::min(scale_hint, mean(dists[l]) / speeds[l]);
        }
        value = quadrature::integrate_to_infinity(integrand, scale_hint, quadrature_rel_tol);
    }
    return atom_weight * value;
}

}  // namespace detail

/// E[min{Y_1/r_1, ..., Y_d/r_d}] for independent Y_l ~ dists[l].
inline double expected_min_weighted(std::span<const Distribution> dists, std::span<const double> speeds)
{
    return detail::min_moment(dists, speeds, 1);
}

/// E[min{Y_1/r_1, ..., Y_d/r_d}^2].
inline double second_moment_min_weighted(std::span<const Distribution> dists, std::span<const double> speeds)
{
    return detail::min_moment(dists, speeds, 2);
}

/// Same law on every server.
inline double expected_min_weighted(const Distribution& dist, std::span<const double> speeds)
{
    const std::vector<Distribution> copies(speeds.size(), dist);
    return expected_min_weighted(copies, speeds);
}

inline double second_moment_min_weighted(const Distribution& dist, std::span<const double> speeds)
{
    const std::vector<Distribution> copies(speeds.size(), dist);
    return second_moment_min_weighted(copies, speeds);
}

/// Aggregate resource usage d * E[min of d i.i.d. copies] on unit-speed servers.
inline double g_metric(const Distribution& dist, std::size_t d)
{
    if (d == 0) {
        throw std::invalid_argument("g_metric requires d >= 1");
    }
    const std::vector<double> unit(d, 1.0);
    return static_cast<double>(d) * expected_min_weighted(dist, unit);
}

}  // namespace redlab
