#pragma once

#include "redlab/analytics.hpp"
#include "redlab/assignment.hpp"
#include "redlab/distributions.hpp"
#include "redlab/rng.hpp"
#include "redlab/workload.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace redlab {

struct SimConfig {
    std::uint64_t horizon_arrivals = 1'000'000;
    double warmup_fraction = 0.2;
    std::uint64_t seed = 1;
    bool assert_invariants = false;
    std::size_t batches = 32;
    /// queued replicas beyond this abort the run
    std::uint64_t divergence_limit = 1'000'000;
    /// jobs per arrival; a steeper late-half occupancy trend counts as divergent
    double growth_tolerance = 0.005;
    std::ostream* trace = nullptr;
};

inline constexpr std::uint64_t min_horizon = 10'000;
inline constexpr std::size_t occupancy_blocks = 64;

struct PropertyViolation {
    std::uint64_t job;
    std::size_t server;
};

/// What the oldest-job check needs to see of the system at an event boundary.
struct SystemSnapshot {
    std::optional<std::uint64_t> oldest_job;
    std::span<const std::uint8_t> oldest_subset;
    std::span<const std::int64_t> in_service;  // job id per server, -1 when idle
};

/// The oldest job in the system must be in service at every server holding one of its replicas.
inline std::optional<PropertyViolation> assert_oldest_job_property(const SystemSnapshot& snap)
{
    if (!snap.oldest_job) {
        return std::nullopt;
    }
    const auto job = static_cast<std::int64_t>(*snap.oldest_job);
    for (auto server : snap.oldest_subset) {
        if (server >= snap.in_service.size() || snap.in_service[server] != job) {
            return PropertyViolation{*snap.oldest_job, server};
        }
    }
    return std::nullopt;
}

/// Statistics over one batch (or the entire window).
struct BatchView {
    std::size_t servers = 0;
    std::size_t types = 0;
    double duration = 0.0;
    std::vector<double> tau1;  // [i * types + j]
    std::vector<double> tau2;
    double pi0_bar = 0.0;
    double pi0_star = 0.0;
    double mean_latency = 0.0;
    double mean_overlap = 0.0;
    std::uint64_t jobs = 0;
    std::vector<std::uint64_t> arrivals_by_type;

    [[nodiscard]] double tau(std::size_t i, std::size_t j) const { return tau1[i * types + j] + tau2[i * types + j]; }
    [[nodiscard]] double effective(std::size_t i, std::size_t j) const { return tau1[i * types + j]; }
    [[nodiscard]] double wasted(std::size_t i, std::size_t j) const { return tau2[i * types + j]; }
    [[nodiscard]] double server_tau(std::size_t i) const
    {
        double s = 0.0;
        for (std::size_t j = 0; j < types; ++j) {
            s += tau(i, j);
        }
        return s;
    }
};

struct SimStats {
    double lambda = 0.0;
    std::uint64_t horizon = 0;
    std::uint64_t warmup = 0;
    std::uint64_t seed = 0;
    bool diverged = false;  // the queued-replica guard tripped
    double growth_slope = 0.0;
    double growth_tolerance = 0.0;
    std::uint64_t jobs_completed = 0;
    std::uint64_t events = 0;
    std::uint64_t max_queued_replicas = 0;
    double window_start = 0.0;
    double window_end = 0.0;

    double mean_latency = 0.0;
    double latency_half_width = 0.0;
    double latency_std_error = 0.0;
    double pi0_bar = 0.0;
    double pi0_star = 0.0;
    double mean_overlap = 0.0;
    std::vector<std::vector<double>> tau;   // [i][j]
    std::vector<std::vector<double>> tau1;
    std::vector<std::vector<double>> tau2;

    BatchView overall;
    std::vector<BatchView> batches;

    std::uint64_t trace_hash = 0;
    std::uint64_t property_checks = 0;
    std::uint64_t property_violations = 0;
    std::optional<PropertyViolation> first_violation;

    /// Guard tripped or the occupancy kept growing: treat the rate as unstable.
    [[nodiscard]] bool divergent() const { return diverged || growth_slope > growth_tolerance; }
};

struct BatchEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    /// 95% Student-t half-width
    double half_width = 0.0;
};

namespace detail {

/// Two-sided 95% Student-t quantile (Cornish-Fisher expansion around the normal).
inline double t_quantile_975(std::size_t dof)
{
    const double z = 1.959963984540054;
    const double v = static_cast<double>(std::max<std::size_t>(dof, 1));
    const double z3 = z * z * z;
    const double z5 = z3 * z * z;
    return z + (z3 + z) / (4.0 * v) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * v * v);
}

inline double batch_std_error(const std::vector<double>& values)
{
    const std::size_t n = values.size();
    if (n < 2) {
        return 0.0;
    }
    double m = 0.0;
    for (double v : values) {
        m += v;
    }
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - m) * (v - m);
    }
    return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace detail

/// Point estimate from the whole window, standard error from the batch spread.
template <class F>
BatchEstimate batch_estimate(const SimStats& stats, F&& functional)
{
    BatchEstimate out;
    out.mean = functional(stats.overall);
    std::vector<double> values;
    values.reserve(stats.batches.size());
    for (const auto& b : stats.batches) {
        values.push_back(functional(b));
    }
    out.std_error = detail::batch_std_error(values);
    out.half_width = detail::t_quantile_975(values.size() > 0 ? values.size() - 1 : 1) * out.std_error;
    return out;
}

inline TauMatrix measure_tau(const SimStats& stats)
{
    TauMatrix out(stats.overall.servers, stats.overall.types, stats.lambda);
    out.has_split = true;
    for (std::size_t i = 0; i < out.servers; ++i) {
        for (std::size_t j = 0; j < out.types; ++j) {
            const std::size_t k = i * out.types + j;
            out.tau1[k] = stats.overall.tau1[k];
            out.tau2[k] = stats.overall.tau2[k];
            out.tau[k] = out.tau1[k] + out.tau2[k];
        }
    }
    return out;
}

namespace detail {

enum class EventKind : std::uint8_t { arrival = 0, start = 1, completion = 2, cancel = 3 };

inline const char* to_string(EventKind k)
{
    switch (k) {
    case EventKind::arrival: return "arrival";
    case EventKind::start: return "start";
    case EventKind::completion: return "completion";
    case EventKind::cancel: return "cancel";
    }
    return "?";
}

class Engine {
public:
    Engine(const SystemModel& model, const Policy& policy, double lambda, const SimConfig& cfg)
        : model_(model), policy_(policy), catalog_(policy.catalog()), lambda_(lambda), cfg_(cfg),
          n_(model.servers), m_(model.type_count()), d_(policy.degree()),
          arrivals_rng_(Stream(cfg.seed).split("arrivals")), types_rng_(Stream(cfg.seed).split("types")),
          sizes_rng_(Stream(cfg.seed).split("sizes")), subsets_rng_(Stream(cfg.seed).split("subsets")),
          variations_rng_(Stream(cfg.seed).split("variations"))
    {
        warm_ = static_cast<std::uint64_t>(std::floor(cfg.warmup_fraction * static_cast<double>(cfg.horizon_arrivals)));
        batch_len_ = (cfg.horizon_arrivals - warm_) / cfg.batches;
        queues_.resize(n_);
        serving_.assign(n_, -1);
        end_time_.assign(n_, inf);
        start_time_.assign(n_, 0.0);
        busy1_.assign(cfg.batches, std::vector<double>(n_ * m_, 0.0));
        busy2_.assign(cfg.batches, std::vector<double>(n_ * m_, 0.0));
        nonempty_.assign(cfg.batches, 0.0);
        allbusy_.assign(cfg.batches, 0.0);
        latency_sum_.assign(cfg.batches, 0.0);
        overlap_sum_.assign(cfg.batches, 0.0);
        latency_count_.assign(cfg.batches, 0);
        arrivals_by_type_.assign(cfg.batches, std::vector<std::uint64_t>(m_, 0));
        occupancy_sum_.assign(occupancy_blocks, 0.0);
        occupancy_count_.assign(occupancy_blocks, 0);
        double acc = 0.0;
        for (const auto& t : model.types) {
            acc += t.probability;
            type_cumulative_.push_back(acc);
        }
        if (policy.visibility() == TypeVisibility::known && policy.vector_count() != m_) {
            throw std::invalid_argument("type-dependent policy needs one vector per job type");
        }
    }

    SimStats run()
    {
        next_arrival_ = arrivals_rng_.exponential(lambda_);
        bool arrivals_open = true;
        while (true) {
            std::size_t server = n_;
            double tc = inf;
            for (std::size_t i = 0; i < n_; ++i) {
                if (end_time_[i] < tc) {
                    tc = end_time_[i];
                    server = i;
                }
            }
            if (server < n_ && (!arrivals_open || tc <= next_arrival_)) {
                advance(tc);
                complete(server);
            } else if (arrivals_open) {
                advance(next_arrival_);
                arrivals_open = arrive();
            } else {
                break;
            }
            if (diverged_) {
                break;
            }
            ++events_;
            if (cfg_.assert_invariants) {
                check_property();
            }
        }
        return collect();
    }

private:
    static constexpr double inf = std::numeric_limits<double>::infinity();

    struct Job {
        double arrival;
        double size;
        double last_start;
        std::uint32_t subset;
        std::uint32_t started_mask;
        std::uint16_t type;
        std::uint8_t started;
        bool done;
        std::int32_t batch;
    };

    Job& job(std::uint64_t id) { return jobs_[id - base_id_]; }
    bool live(std::uint64_t id) const { return id >= base_id_ && !jobs_[id - base_id_].done; }

    void record(EventKind kind, std::uint64_t jid, std::size_t server)
    {
        const std::uint64_t words[4] = {std::bit_cast<std::uint64_t>(now_), static_cast<std::uint64_t>(kind), jid,
                                        static_cast<std::uint64_t>(server)};
        for (auto w : words) {
            hash_ ^= w;
            hash_ *= 0x100000001b3ULL;
        }
        if (cfg_.trace) {
            char buf[160];
            if (server < n_) {
                std::snprintf(buf, sizeof buf, "{\"t\":%.17g,\"kind\":\"%s\",\"job\":%llu,\"server\":%zu}\n", now_,
                              to_string(kind), static_cast<unsigned long long>(jid), server + 1);
            } else {
                std::snprintf(buf, sizeof buf, "{\"t\":%.17g,\"kind\":\"%s\",\"job\":%llu,\"server\":null}\n", now_,
                              to_string(kind), static_cast<unsigned long long>(jid));
            }
            *cfg_.trace << buf;
        }
    }

    /// Split [a, b) over the batch boundaries seen so far.
    template <class Fn>
    void credit(double a, double b, Fn&& fn) const
    {
        if (bounds_.empty()) {
            return;
        }
        a = std::max(a, bounds_.front());
        if (bounds_.size() == cfg_.batches + 1) {
            b = std::min(b, bounds_.back());
        }
        if (!(b > a)) {
            return;
        }
        auto k = static_cast<std::size_t>(std::upper_bound(bounds_.begin(), bounds_.end(), a) - bounds_.begin()) - 1;
        while (true) {
            const double hi = k + 1 < bounds_.size() ? bounds_[k + 1] : inf;
            const double seg = std::min(b, hi) - std::max(a, bounds_[k]);
            if (seg > 0.0) {
                fn(std::min(k, cfg_.batches - 1), seg);
            }
            if (b <= hi || k + 1 >= cfg_.batches) {
                break;
            }
            ++k;
        }
    }

    void advance(double t)
    {
        const bool nonempty = live_jobs_ > 0;
        const bool allbusy = busy_count_ == n_;
        if (nonempty || allbusy) {
            credit(now_, t, [&](std::size_t k, double seg) {
                if (nonempty) {
                    nonempty_[k] += seg;
                }
                if (allbusy) {
                    allbusy_[k] += seg;
                }
            });
        }
        now_ = t;
    }

    void start(std::size_t server, std::uint64_t jid)
    {
        Job& jb = job(jid);
        const auto& type = model_.types[jb.type];
        const double y = model_.replica_mode == ReplicaMode::identical ? mean(type.variation_law)
                                                                       : sample(type.variation_law, variations_rng_);
        serving_[server] = static_cast<std::int64_t>(jid);
        start_time_[server] = now_;
        end_time_[server] = now_ + jb.size * y / type.speeds[server];
        jb.started_mask |= std::uint32_t{1} << server;
        ++jb.started;
        jb.last_start = now_;
        ++busy_count_;
        record(EventKind::start, jid, server);
    }

    void start_next(std::size_t server)
    {
        auto& q = queues_[server];
        while (!q.empty()) {
            const std::uint64_t jid = q.front();
            q.pop_front();
            if (live(jid)) {
                --queued_;
                start(server, jid);
                return;
            }
        }
    }

    void release(std::size_t server, std::size_t type, bool effective)
    {
        auto& acc = effective ? busy1_ : busy2_;
        const std::size_t cell = server * m_ + type;
        credit(start_time_[server], now_, [&](std::size_t k, double seg) { acc[k][cell] += seg; });
        serving_[server] = -1;
        end_time_[server] = inf;
        --busy_count_;
    }

    void complete(std::size_t server)
    {
        const auto jid = static_cast<std::uint64_t>(serving_[server]);
        Job& jb = job(jid);
        record(EventKind::completion, jid, server);
        jb.done = true;
        --live_jobs_;
        ++completed_;
        if (jb.batch >= 0) {
            latency_sum_[jb.batch] += now_ - jb.arrival;
            latency_count_[jb.batch] += 1;
            if (jb.started == d_) {
                overlap_sum_[jb.batch] += now_ - jb.last_start;
            }
        }
        const auto& subset = catalog_.subset(jb.subset);
        std::uint32_t freed = 0;
        for (auto i : subset) {
            if (serving_[i] == static_cast<std::int64_t>(jid)) {
                if (i != server) {
                    record(EventKind::cancel, jid, i);
                }
                release(i, jb.type, i == server);
                freed |= std::uint32_t{1} << i;
            } else if (!((jb.started_mask >> i) & 1U)) {
                --queued_;  // the stale queue entry is skipped when reached
            }
        }
        for (auto i : subset) {
            if ((freed >> i) & 1U) {
                start_next(i);
            }
        }
        while (!jobs_.empty() && jobs_.front().done) {
            jobs_.pop_front();
            ++base_id_;
        }
    }

    bool arrive()
    {
        const std::uint64_t index = arrival_index_++;
        const std::uint64_t horizon = cfg_.horizon_arrivals;
        if (index >= warm_) {
            const std::uint64_t offset = index - warm_;
            if (index == horizon) {
                bounds_.push_back(now_);
            } else if (offset % batch_len_ == 0 && offset / batch_len_ < cfg_.batches) {
                bounds_.push_back(now_);
            }
        }
        if (index == horizon) {
            return false;
        }

        const std::size_t block = static_cast<std::size_t>(index * occupancy_blocks / horizon);
        occupancy_sum_[block] += static_cast<double>(live_jobs_);
        occupancy_count_[block] += 1;

        const double u = types_rng_.uniform() * type_cumulative_.back();
        const auto type = std::min(
            static_cast<std::size_t>(std::upper_bound(type_cumulative_.begin(), type_cumulative_.end(), u)
                                     - type_cumulative_.begin()),
            m_ - 1);
        const double size = sample(model_.types[type].size_law, sizes_rng_);
        const auto h = policy_.sample(type, subsets_rng_);

        std::int32_t batch = -1;
        if (index >= warm_) {
            batch = static_cast<std::int32_t>(std::min<std::uint64_t>((index - warm_) / batch_len_, cfg_.batches - 1));
            arrivals_by_type_[batch][type] += 1;
        }
        const std::uint64_t jid = next_id_++;
        jobs_.push_back(Job{now_, size, 0.0, static_cast<std::uint32_t>(h), 0, static_cast<std::uint16_t>(type), 0,
                            false, batch});
        ++live_jobs_;
        record(EventKind::arrival, jid, n_);
        for (auto i : catalog_.subset(h)) {
            if (serving_[i] < 0) {
                start(i, jid);
            } else {
                queues_[i].push_back(jid);
                ++queued_;
            }
        }
        max_queued_ = std::max(max_queued_, queued_);
        if (queued_ > cfg_.divergence_limit) {
            diverged_ = true;
        }
        next_arrival_ = now_ + arrivals_rng_.exponential(lambda_);
        return true;
    }

    void check_property()
    {
        ++property_checks_;
        SystemSnapshot snap;
        snap.in_service = serving_;
        if (!jobs_.empty()) {
            snap.oldest_job = base_id_;
            const auto& s = catalog_.subset(jobs_.front().subset);
            snap.oldest_subset = std::span<const std::uint8_t>(s.data(), s.size());
        }
        if (auto v = assert_oldest_job_property(snap)) {
            ++property_violations_;
            if (!first_violation_) {
                first_violation_ = v;
            }
        }
    }

    SimStats collect()
    {
        SimStats s;
        s.lambda = lambda_;
        s.horizon = cfg_.horizon_arrivals;
        s.warmup = warm_;
        s.seed = cfg_.seed;
        s.diverged = diverged_;
        s.growth_tolerance = cfg_.growth_tolerance;
        s.jobs_completed = completed_;
        s.events = events_;
        s.max_queued_replicas = max_queued_;
        s.trace_hash = hash_;
        s.property_checks = property_checks_;
        s.property_violations = property_violations_;
        s.first_violation = first_violation_;

        if (diverged_) {
            s.growth_slope = inf;
        } else {
            auto block_mean = [&](std::size_t lo, std::size_t hi) {
                double acc = 0.0;
                std::size_t used = 0;
                for (std::size_t b = lo; b < hi; ++b) {
                    if (occupancy_count_[b] > 0) {
                        acc += occupancy_sum_[b] / static_cast<double>(occupancy_count_[b]);
                        ++used;
                    }
                }
                return used > 0 ? acc / static_cast<double>(used) : 0.0;
            };
            const double early = block_mean(occupancy_blocks / 4, occupancy_blocks / 2);
            const double late = block_mean(occupancy_blocks / 2, occupancy_blocks);
            s.growth_slope = (late - early) / (0.375 * static_cast<double>(cfg_.horizon_arrivals));
        }

        const std::size_t cells = n_ * m_;
        s.overall.servers = n_;
        s.overall.types = m_;
        s.overall.tau1.assign(cells, 0.0);
        s.overall.tau2.assign(cells, 0.0);
        s.overall.arrivals_by_type.assign(m_, 0);
        double latency_total = 0.0;
        double overlap_total = 0.0;
        std::uint64_t count_total = 0;
        const bool window_closed = bounds_.size() == cfg_.batches + 1;
        if (window_closed) {
            s.window_start = bounds_.front();
            s.window_end = bounds_.back();
            for (std::size_t k = 0; k < cfg_.batches; ++k) {
                BatchView b;
                b.servers = n_;
                b.types = m_;
                b.duration = bounds_[k + 1] - bounds_[k];
                const double inv = b.duration > 0.0 ? 1.0 / b.duration : 0.0;
                b.tau1.resize(cells);
                b.tau2.resize(cells);
                for (std::size_t c = 0; c < cells; ++c) {
                    b.tau1[c] = busy1_[k][c] * inv;
                    b.tau2[c] = busy2_[k][c] * inv;
                    s.overall.tau1[c] += busy1_[k][c];
                    s.overall.tau2[c] += busy2_[k][c];
                }
                b.pi0_bar = nonempty_[k] * inv;
                b.pi0_star = allbusy_[k] * inv;
                b.jobs = latency_count_[k];
                b.mean_latency = b.jobs > 0 ? latency_sum_[k] / static_cast<double>(b.jobs) : 0.0;
                b.mean_overlap = b.jobs > 0 ? overlap_sum_[k] / static_cast<double>(b.jobs) : 0.0;
                b.arrivals_by_type = arrivals_by_type_[k];
                for (std::size_t j = 0; j < m_; ++j) {
                    s.overall.arrivals_by_type[j] += arrivals_by_type_[k][j];
                }
                s.overall.pi0_bar += nonempty_[k];
                s.overall.pi0_star += allbusy_[k];
                latency_total += latency_sum_[k];
                overlap_total += overlap_sum_[k];
                count_total += latency_count_[k];
                s.batches.push_back(std::move(b));
            }
            const double span = s.window_end - s.window_start;
            s.overall.duration = span;
            const double inv = span > 0.0 ? 1.0 / span : 0.0;
            for (std::size_t c = 0; c < cells; ++c) {
                s.overall.tau1[c] *= inv;
                s.overall.tau2[c] *= inv;
            }
            s.overall.pi0_bar *= inv;
            s.overall.pi0_star *= inv;
            s.overall.jobs = count_total;
            s.overall.mean_latency = count_total > 0 ? latency_total / static_cast<double>(count_total) : 0.0;
            s.overall.mean_overlap = count_total > 0 ? overlap_total / static_cast<double>(count_total) : 0.0;
        }

        s.tau.assign(n_, std::vector<double>(m_, 0.0));
        s.tau1 = s.tau;
        s.tau2 = s.tau;
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < m_; ++j) {
                s.tau1[i][j] = s.overall.effective(i, j);
                s.tau2[i][j] = s.overall.wasted(i, j);
                s.tau[i][j] = s.overall.tau(i, j);
            }
        }
        s.pi0_bar = s.overall.pi0_bar;
        s.pi0_star = s.overall.pi0_star;
        s.mean_overlap = s.overall.mean_overlap;
        s.mean_latency = s.overall.mean_latency;
        if (window_closed) {
            const auto lat = batch_estimate(s, [](const BatchView& b) { return b.mean_latency; });
            s.latency_std_error = lat.std_error;
            s.latency_half_width = lat.half_width;
        }
        return s;
    }

    const SystemModel& model_;
    const Policy& policy_;
    const SubsetCatalog& catalog_;
    double lambda_;
    SimConfig cfg_;
    std::size_t n_;
    std::size_t m_;
    std::size_t d_;
    Stream arrivals_rng_;
    Stream types_rng_;
    Stream sizes_rng_;
    Stream subsets_rng_;
    Stream variations_rng_;
    std::vector<double> type_cumulative_;

    std::uint64_t warm_ = 0;
    std::uint64_t batch_len_ = 1;
    double now_ = 0.0;
    double next_arrival_ = inf;
    std::uint64_t arrival_index_ = 0;
    std::uint64_t next_id_ = 0;
    std::uint64_t base_id_ = 0;
    std::deque<Job> jobs_;
    std::vector<std::deque<std::uint64_t>> queues_;
    std::vector<std::int64_t> serving_;
    std::vector<double> end_time_;
    std::vector<double> start_time_;
    std::size_t busy_count_ = 0;
    std::uint64_t live_jobs_ = 0;
    std::uint64_t queued_ = 0;
    std::uint64_t max_queued_ = 0;
    std::uint64_t completed_ = 0;
    std::uint64_t events_ = 0;
    bool diverged_ = false;

    std::vector<double> bounds_;
    std::vector<std::vector<double>> busy1_;
    std::vector<std::vector<double>> busy2_;
    std::vector<double> nonempty_;
    std::vector<double> allbusy_;
    std::vector<double> latency_sum_;
    std::vector<double> overlap_sum_;
    std::vector<std::uint64_t> latency_count_;
    std::vector<std::vector<std::uint64_t>> arrivals_by_type_;
    std::vector<double> occupancy_sum_;
    std::vector<std::uint64_t> occupancy_count_;

    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
    std::uint64_t property_checks_ = 0;
    std::uint64_t property_violations_ = 0;
    std::optional<PropertyViolation> first_violation_;
};

}  // namespace detail

/// Simulates the redundancy-d cancel-on-completion system at Poisson rate lambda.
inline SimStats run(const SystemModel& model, const Policy& policy, double lambda, const SimConfig& cfg)
{
    require_valid(model);
    if (policy.servers() != model.servers) {
        throw std::invalid_argument("policy and model disagree on server count");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("arrival rate must be finite and nonnegative");
    }
    if (cfg.horizon_arrivals < min_horizon) {
        throw std::invalid_argument("horizon must be at least " + std::to_string(min_horizon) + " arrivals");
    }
    if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0)) {
        throw std::invalid_argument("warmup fraction must lie in [0, 1)");
    }
    if (cfg.batches < 2 || cfg.batches > (cfg.horizon_arrivals / 4)) {
        throw std::invalid_argument("batch count out of range");
    }
    if (lambda == 0.0) {
        SimStats s;
        s.horizon = cfg.horizon_arrivals;
        s.seed = cfg.seed;
        s.growth_tolerance = cfg.growth_tolerance;
        s.overall.servers = model.servers;
        s.overall.types = model.type_count();
        s.overall.tau1.assign(model.servers * model.type_count(), 0.0);
        s.overall.tau2 = s.overall.tau1;
        s.overall.arrivals_by_type.assign(model.type_count(), 0);
        s.tau.assign(model.servers, std::vector<double>(model.type_count(), 0.0));
        s.tau1 = s.tau;
        s.tau2 = s.tau;
        return s;
    }
    detail::Engine engine(model, policy, lambda, cfg);
    return engine.run();
}

struct BoundaryConfig {
    SimConfig probe;
    double hint = 1.0;
    double resolution = 0.02;
    double step = 1.5;
    std::size_t max_probes = 60;
};

struct BoundaryProbe {
    double lambda;
    bool stable;
};

struct BoundaryResult {
    double value = 0.0;
    double lo = 0.0;  // largest rate judged stable
    double hi = 0.0;  // smallest rate judged divergent
    std::vector<BoundaryProbe> probes;
};

/// Bisection between a stable and a divergent probe rate.
inline BoundaryResult estimate_boundary(const SystemModel& model, const Policy& policy, const BoundaryConfig& cfg)
{
    if (!(cfg.hint > 0.0) || !(cfg.resolution > 0.0) || !(cfg.step > 1.0)) {
        throw std::invalid_argument("boundary search needs positive hint, resolution and step > 1");
    }
    BoundaryResult out;
    auto probe = [&](double lambda) {
        if (out.probes.size() >= cfg.max_probes) {
            throw std::runtime_error("boundary search exceeded its probe budget");
        }
        const bool stable = !run(model, policy, lambda, cfg.probe).divergent();
        out.probes.push_back({lambda, stable});
        return stable;
    };
    double lo = 0.0;
    double hi = 0.0;
    double x = cfg.hint;
    if (probe(x)) {
        lo = x;
        while (true) {
            x *= cfg.step;
            if (!probe(x)) {
                hi = x;
                break;
            }
            lo = x;
        }
    } else {
        hi = x;
        while (true) {
            x /= cfg.step;
            if (probe(x)) {
                lo = x;
                break;
            }
            hi = x;
        }
    }
    while (hi - lo > cfg.resolution) {
        const double mid = 0.5 * (lo + hi);
        if (probe(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.lo = lo;
    out.hi = hi;
    out.value = 0.5 * (lo + hi);
    return out;
}

}  // namespace redlab
