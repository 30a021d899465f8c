#pragma once

#include "redlab/rng.hpp"
#include "redlab/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace redlab {

inline constexpr std::size_t max_catalog_size = std::size_t{1} << 20;

inline std::uint64_t binomial(std::size_t n, std::size_t k)
{
    if (k > n) {
        return 0;
    }
    k = std::min(k, n - k);
    std::uint64_t out = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        out = out * (n - k + i) / i;
    }
    return out;
}

/// All C(N, d) server subsets in lexicographic order (0-based indices).
class SubsetCatalog {
public:
    SubsetCatalog(std::size_t n, std::size_t d) : n_(n), d_(d)
    {
        if (d < 1 || d > n) {
            throw std::invalid_argument("replication degree must satisfy 1 <= d <= N");
        }
        if (n > max_servers) {
            throw std::invalid_argument("too many servers for a subset catalog");
        }
        if (binomial(n, d) > max_catalog_size) {
            throw std::invalid_argument("subset catalog too large to enumerate");
        }
        std::vector<std::uint8_t> current(d);
        std::iota(current.begin(), current.end(), std::uint8_t{0});
        while (true) {
            subsets_.push_back(current);
            std::size_t pos = d;
            while (pos > 0 && current[pos - 1] == n - d + pos - 1) {
                --pos;
            }
            if (pos == 0) {
                break;
            }
            ++current[pos - 1];
            for (std::size_t q = pos; q < d; ++q) {
                current[q] = static_cast<std::uint8_t>(current[q - 1] + 1);
            }
        }
        masks_.reserve(subsets_.size());
        for (const auto& s : subsets_) {
            std::uint32_t mask = 0;
            for (auto i : s) {
                mask |= std::uint32_t{1} << i;
            }
            masks_.push_back(mask);
        }
    }

    [[nodiscard]] std::size_t servers() const noexcept { return n_; }
    [[nodiscard]] std::size_t degree() const noexcept { return d_; }
    [[nodiscard]] std::size_t size() const noexcept { return subsets_.size(); }
    [[nodiscard]] const std::vector<std::uint8_t>& subset(std::size_t h) const { return subsets_.at(h); }
    [[nodiscard]] bool contains(std::size_t h, std::size_t server) const
    {
        return (masks_.at(h) >> server) & 1U;
    }

    /// Position of a subset given as sorted 0-based indices.
    [[nodiscard]] std::size_t index_of(const std::vector<std::uint8_t>& subset) const
    {
        const auto it = std::lower_bound(subsets_.begin(), subsets_.end(), subset);
        if (it == subsets_.end() || *it != subset) {
            throw std::invalid_argument("subset not present in catalog");
        }
        return static_cast<std::size_t>(it - subsets_.begin());
    }

private:
    std::size_t n_;
    std::size_t d_;
    std::vector<std::vector<std::uint8_t>> subsets_;
    std::vector<std::uint32_t> masks_;
};

/// Static probabilistic placement of d replicas over the subset catalog.
///
/// A type-blind policy holds one probability vector; a type-dependent one
/// holds one vector per job type and is only constructible with known types.
class Policy {
public:
    static Policy type_blind(std::shared_ptr<const SubsetCatalog> catalog, std::vector<double> probs)
    {
        Policy p(std::move(catalog), TypeVisibility::unknown);
        p.check_vector(probs);
        p.probs_.push_back(std::move(probs));
        p.build_cumulative();
        return p;
    }

    static Policy by_type(std::shared_ptr<const SubsetCatalog> catalog, std::vector<std::vector<double>> probs)
    {
        Policy p(std::move(catalog), TypeVisibility::known);
        if (probs.empty()) {
            throw std::invalid_argument("type-dependent policy needs at least one vector");
        }
        for (const auto& v : probs) {
            p.check_vector(v);
        }
        p.probs_ = std::move(probs);
        p.build_cumulative();
        return p;
    }

    [[nodiscard]] std::size_t degree() const noexcept { return catalog_->degree(); }
    [[nodiscard]] std::size_t servers() const noexcept { return catalog_->servers(); }
    [[nodiscard]] TypeVisibility visibility() const noexcept { return visibility_; }
    [[nodiscard]] const SubsetCatalog& catalog() const noexcept { return *catalog_; }
    [[nodiscard]] std::shared_ptr<const SubsetCatalog> catalog_ptr() const noexcept { return catalog_; }
    [[nodiscard]] std::size_t vector_count() const noexcept { return probs_.size(); }

    /// p_{h|j}; type-blind policies ignore the type.
    [[nodiscard]] const std::vector<double>& probs(std::size_t type = 0) const
    {
        if (visibility_ == TypeVisibility::unknown) {
            return probs_.front();
        }
        return probs_.at(type);
    }

    [[nodiscard]] std::size_t sample(std::size_t type, Stream& rng) const
    {
        const auto& cum = visibility_ == TypeVisibility::unknown ? cumulative_.front() : cumulative_.at(type);
        const double u = rng.uniform() * cum.back();
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        return std::min(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
    }

    /// The same placement with types visible to the dispatcher.
    [[nodiscard]] Policy as_known(std::size_t types) const
    {
        if (visibility_ == TypeVisibility::known) {
            return *this;
        }
        return by_type(catalog_, std::vector<std::vector<double>>(types, probs_.front()));
    }

private:
    Policy(std::shared_ptr<const SubsetCatalog> catalog, TypeVisibility v) : catalog_(std::move(catalog)), visibility_(v)
    {
        if (!catalog_) {
            throw std::invalid_argument("policy needs a catalog");
        }
    }

    void check_vector(const std::vector<double>& v) const
    {
        if (v.size() != catalog_->size()) {
            throw std::invalid_argument("policy vector length differs from catalog size");
        }
        double sum = 0.0;
        for (double x : v) {
            if (!(x >= 0.0) || !std::isfinite(x)) {
                throw std::invalid_argument("policy probabilities must be nonnegative");
            }
            sum += x;
        }
        if (std::fabs(sum - 1.0) > 1e-12 * static_cast<double>(v.size())) {
            throw std::invalid_argument("policy probabilities must sum to 1");
        }
    }

    void build_cumulative()
    {
        cumulative_.clear();
        for (const auto& v : probs_) {
            std::vector<double> cum(v.size());
            std::partial_sum(v.begin(), v.end(), cum.begin());
            cumulative_.push_back(std::move(cum));
        }
    }

    std::shared_ptr<const SubsetCatalog> catalog_;
    TypeVisibility visibility_;
    std::vector<std::vector<double>> probs_;
    std::vector<std::vector<double>> cumulative_;
};

/// Power-of-d: d distinct servers uniformly at random.
inline Policy uniform_power_of_d(std::size_t n, std::size_t d)
{
    auto catalog = std::make_shared<const SubsetCatalog>(n, d);
    const double p = 1.0 / static_cast<double>(catalog->size());
    return Policy::type_blind(catalog, std::vector<double>(catalog->size(), p));
}

/// Sum of p_{h|j} over the subsets containing `server`.
inline double marginal(const Policy& policy, std::size_t server, std::size_t type = 0)
{
    const auto& probs = policy.probs(type);
    double sum = 0.0;
    for (std::size_t h = 0; h < probs.size(); ++h) {
        if (policy.catalog().contains(h, server)) {
            sum += probs[h];
        }
    }
    return sum;
}

/// d = 1, known types: every type routed to its fastest (diagonal) server.
inline Policy diag_d1_policy(const SystemModel& model)
{
    if (model.type_count() != model.servers) {
        throw std::invalid_argument("diagonal routing needs a fast-slow model with M = N");
    }
    for (std::size_t j = 0; j < model.type_count(); ++j) {
        for (std::size_t i = 0; i < model.servers; ++i) {
            if (model.speed(i, j) > model.speed(j, j)) {
                throw std::invalid_argument("diagonal routing needs type j fastest on server j");
            }
        }
    }
    auto catalog = std::make_shared<const SubsetCatalog>(model.servers, 1);
    std::vector<std::vector<double>> probs(model.type_count(), std::vector<double>(model.servers, 0.0));
    for (std::size_t j = 0; j < model.type_count(); ++j) {
        probs[j][j] = 1.0;
    }
    return Policy::by_type(catalog, std::move(probs));
}

}  // namespace redlab
