#pragma once

#include "redlab/analytics.hpp"
#include "redlab/experiments.hpp"
#include "redlab/io.hpp"
#include "redlab/simulator.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace redlab::cli {

using io::json;

enum ExitCode : int { ok = 0, usage = 1, violated = 2, divergence = 3 };

struct Options {
    std::string scenario = "fs:n=3,rslow=0.5";
    std::string dist = "exp";
    std::string size = "det:value=1";
    std::string mode = "auto";
    std::size_t d = 2;
    std::string policy = "uniform";
    double lambda = 1.0;
    std::uint64_t horizon = 1'000'000;
    double warmup = 0.2;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    std::string out = "-";
    double tolerance = 0.05;
    std::size_t trials = 10'000;
    std::string trace;
    bool boundaries = false;

    // which flags the user set, so verify recipes can keep their own defaults
    bool has_scenario = false;
    bool has_dist = false;
    bool has_lambda = false;
    bool has_d = false;
};

namespace detail {

inline void add_model_flags(CLI::App* app, Options& o)
{
    app->add_option("--scenario", o.scenario,
                    "fs:n=N,rslow=X[,rfast=Y] | hom:n=N | path to a JSON scenario")
        ->capture_default_str();
    app->add_option("--dist", o.dist,
                    "speed variation law: exp[:rate=R] | weibull:scale=S,shape=K | det[:value=C] | bernoulli:k=K | nbu | nwu")
        ->capture_default_str();
    app->add_option("--size", o.size, "intrinsic job size law, same syntax as --dist")->capture_default_str();
    app->add_option("--mode", o.mode, "replica mode: auto (identical iff --dist is deterministic) | identical | iid")
        ->check(CLI::IsMember({"auto", "identical", "iid"}))
        ->capture_default_str();
}

inline void add_policy_flags(CLI::App* app, Options& o)
{
    app->add_option("--d", o.d, "replication degree (1..N) for uniform placement")->capture_default_str();
    app->add_option("--policy", o.policy, "uniform | diag (d=1, type j to server j) | path to a JSON policy")
        ->capture_default_str();
}

inline void add_sim_flags(CLI::App* app, Options& o)
{
    app->add_option("--lambda", o.lambda, "Poisson arrival rate (jobs per unit time)")->capture_default_str();
    app->add_option("--horizon", o.horizon, "arrivals per simulation run (>= 10000)")->capture_default_str();
    app->add_option("--warmup", o.warmup, "fraction of arrivals discarded before measuring, in [0,1)")
        ->capture_default_str();
    app->add_option("--seed", o.seed, "base random seed (falls back to $REDLAB_SEED, then 1)");
    app->add_option("--jobs", o.jobs, "worker threads for independent runs")->capture_default_str();
    app->add_option("--tolerance", o.tolerance, "boundary comparison tolerance (arrival-rate units)")
        ->capture_default_str();
}

inline void add_out_flag(CLI::App* app, Options& o)
{
    app->add_option("--out", o.out, "output path, '-' for stdout")->capture_default_str();
}

inline SystemModel build_model(const Options& o, const std::string& scenario, const std::string& dist)
{
    auto model = io::parse_scenario(scenario, io::parse_distribution(dist), io::parse_distribution(o.size));
    if (o.mode == "identical") {
        model.replica_mode = ReplicaMode::identical;
    } else if (o.mode == "iid") {
        model.replica_mode = ReplicaMode::iid;
    }
    const auto errors = validate(model);
    if (!errors.empty()) {
        throw io::ConfigError("invalid scenario: " + errors.front());
    }
    return model;
}

inline experiments::ExperimentConfig experiment_config(const Options& o)
{
    experiments::ExperimentConfig cfg;
    cfg.horizon = o.horizon;
    cfg.warmup_fraction = o.warmup;
    cfg.seed = o.seed;
    cfg.jobs = o.jobs;
    return cfg;
}

inline SimConfig sim_config(const Options& o)
{
    SimConfig c;
    c.horizon_arrivals = o.horizon;
    c.warmup_fraction = o.warmup;
    c.seed = o.seed;
    return c;
}

/// Writes to --out, or to `out` when it is "-".
inline void emit(const Options& o, std::ostream& out, const std::string& text)
{
    if (o.out == "-") {
        out << text;
    } else {
        io::write_file(o.out, text);
    }
}

inline std::string with_suffix(const std::string& path, const std::string& suffix)
{
    const auto dot = path.rfind(".csv");
    const std::string stem = dot != std::string::npos && dot + 4 == path.size() ? path.substr(0, dot) : path;
    return stem + suffix + ".csv";
}

inline int cmd_stability(const Options& o, std::ostream& out)
{
    const auto model = build_model(o, o.scenario, o.dist);
    const auto policy = io::parse_policy(o.policy, o.d, model);
    json doc{{"lambda_star", io::number(lambda_star(model))},
             {"known_types_d1", io::to_json(stability_known_d1(model))},
             {"unknown_types_d1", io::to_json(stability_unknown_d1(model))},
             {"policy", io::to_json(policy)},
             {"gamma_thresholds", io::to_json(gamma_thresholds(model, policy))}};
    const auto proxies = compute_proxies(model, policy);
    doc["proxies"] = io::to_json(proxies);
    if (policy.visibility() == TypeVisibility::unknown) {
        doc["lemma1_gap"] = io::number(lemma1_gap(proxies, policy));
    }
    emit(o, out, doc.dump(2) + "\n");
    return ok;
}

inline int cmd_simulate(const Options& o, std::ostream& out)
{
    const auto model = build_model(o, o.scenario, o.dist);
    const auto policy = io::parse_policy(o.policy, o.d, model);
    auto cfg = sim_config(o);
    std::ofstream trace;
    if (!o.trace.empty()) {
        trace.open(o.trace);
        if (!trace) {
            throw io::ConfigError("cannot write trace '" + o.trace + "'");
        }
        cfg.trace = &trace;
    }
    SimStats stats;
    try {
        stats = run(model, policy, o.lambda, cfg);
    } catch (const std::invalid_argument& e) {
        throw io::ConfigError(e.what());
    }
    emit(o, out, io::to_json(stats).dump(2) + "\n");
    return stats.divergent() ? divergence : ok;
}

inline int cmd_boundary(const Options& o, std::ostream& out)
{
    const auto model = build_model(o, o.scenario, o.dist);
    const auto policy = io::parse_policy(o.policy, o.d, model);
    BoundaryConfig bc;
    bc.probe = sim_config(o);
    bc.hint = gamma_thresholds(model, policy).lambda_sup;
    if (!std::isfinite(bc.hint)) {
        bc.hint = 1.0;
    }
    const auto r = estimate_boundary(model, policy, bc);
    json probes = json::array();
    for (const auto& p : r.probes) {
        probes.push_back({{"lambda", io::number(p.lambda)}, {"stable", p.stable}});
    }
    json doc{{"boundary", io::number(r.value)},
             {"stable_below", io::number(r.lo)},
             {"divergent_at", io::number(r.hi)},
             {"proxy_threshold", io::number(bc.hint)},
             {"probes", probes}};
    emit(o, out, doc.dump(2) + "\n");
    return ok;
}

inline json thresholds_json(const std::vector<experiments::Threshold>& ts)
{
    json out = json::object();
    for (const auto& t : ts) {
        out[t.label] = io::number(t.value);
    }
    return out;
}

inline int cmd_figure(const Options& o, const std::string& which, std::ostream& out)
{
    const auto cfg = experiment_config(o);
    if (which == "fig2") {
        const auto fig = experiments::reproduce_fig2(cfg);
        emit(o, out, fig.table.to_csv());
        json doc{{"figure", "fig2"}, {"thresholds", thresholds_json(fig.thresholds)}};
        if (o.out != "-") {
            doc["csv"] = o.out;
        }
        out << doc.dump(2) << "\n";
        return ok;
    }
    const auto panels = experiments::reproduce_fig3(cfg);
    json doc{{"figure", "fig3"}, {"panels", json::array()}};
    for (const auto& p : panels) {
        const std::string tag = p.r_slow < 0.3 ? "_rslow_01" : "_rslow_05";
        json panel{{"r_slow", p.r_slow}, {"thresholds", thresholds_json(p.thresholds)}};
        if (o.out == "-") {
            out << "# r_slow=" << io::format_sig(p.r_slow) << "\n" << p.table.to_csv();
        } else {
            const auto path = with_suffix(o.out, tag);
            io::write_file(path, p.table.to_csv());
            panel["csv"] = path;
        }
        doc["panels"].push_back(panel);
    }
    if (o.boundaries) {
        std::vector<double> xs;
        for (const auto& p : panels) {
            xs.push_back(p.r_slow);
        }
        json cells = json::array();
        for (const auto& c : experiments::fs_boundaries(cfg, xs, {1, 2, 3})) {
            cells.push_back({{"r_slow", c.r_slow}, {"d", c.d}, {"boundary", io::number(c.result.value)}});
        }
        doc["boundaries"] = cells;
    }
    out << doc.dump(2) << "\n";
    return ok;
}

inline int cmd_verify(const Options& o, const std::string& claim, std::ostream& out)
{
    auto cfg = experiment_config(o);
    std::vector<experiments::Verdict> verdicts;
    auto model_or = [&](const std::string& scenario, const std::string& dist) {
        return build_model(o, o.has_scenario ? o.scenario : scenario, o.has_dist ? o.dist : dist);
    };
    const std::size_t d = o.has_d ? o.d : 2;

    if (claim == "thm1" || claim == "thm2") {
        const auto model = model_or("fs:n=3,rslow=0.5", claim == "thm1" ? "det:value=1" : "nbu");
        const auto policy = io::parse_policy(o.policy, d, model);
        verdicts.push_back(experiments::check_theorem1_2(model, policy, cfg,
                                                         o.has_lambda ? std::optional<double>(o.lambda) : std::nullopt));
    } else if (claim == "conj1") {
        const auto model = model_or("fs:n=3,rslow=0.5", "nwu");
        const auto policy = io::parse_policy(o.policy, d, model);
        const double lam = o.has_lambda ? o.lambda : 2.0;
        verdicts.push_back(experiments::check_conjecture1(model, policy, lam, cfg));
        verdicts.push_back(experiments::check_full_replication_control(model, lam, cfg));
        const auto nbu = experiments::fig2_model(io::nbu_reference_law());
        const auto nbu_policy = uniform_power_of_d(nbu.servers, 2);
        verdicts.push_back(experiments::check_nbu_reversal(nbu, nbu_policy,
                                                           experiments::stable_probe_rate(nbu, nbu_policy), cfg));
    } else if (claim == "conj2" || claim == "thm3") {
        const auto model = model_or("hom:n=3", "nwu");
        verdicts.push_back(experiments::check_theorem3(model));
        if (claim == "conj2") {
            verdicts.push_back(experiments::check_conjecture2(model, cfg, o.tolerance));
        }
    } else if (claim == "thm4") {
        verdicts.push_back(experiments::check_theorem4(cfg, {0.5, 0.2, 0.1, 0.05},
                                                       io::parse_distribution(o.has_dist ? o.dist : "nbu")));
    } else if (claim == "lemma1") {
        verdicts.push_back(experiments::check_lemma1(o.trials, o.seed));
    } else if (claim == "prop1") {
        const auto model = model_or("fs:n=3,rslow=0.5", "nbu");
        const auto policy = io::parse_policy(o.policy, d, model);
        verdicts.push_back(experiments::check_prop1(model, policy, o.has_lambda ? o.lambda : 1.0, cfg));
    }

    int code = ok;
    std::string text;
    for (const auto& v : verdicts) {
        text += experiments::to_json(v).dump() + "\n";
        if (v.status == experiments::Status::violated) {
            code = violated;
        }
    }
    emit(o, out, text);
    return code;
}

}  // namespace detail

/// Parses argv and dispatches; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"redlab: stability regions and simulation of redundancy-d cancel-on-completion systems"};
    app.require_subcommand(1, 1);
    Options o;
    std::string figure;
    std::string claim;

    auto* stability = app.add_subcommand("stability", "analytic stability regions and load-proxy thresholds");
    detail::add_model_flags(stability, o);
    detail::add_policy_flags(stability, o);
    detail::add_out_flag(stability, o);

    auto* simulate = app.add_subcommand("simulate", "simulate one arrival rate; exit 3 if the run diverges");
    detail::add_model_flags(simulate, o);
    detail::add_policy_flags(simulate, o);
    detail::add_sim_flags(simulate, o);
    detail::add_out_flag(simulate, o);
    simulate->add_option("--trace", o.trace, "write one JSON record per event to this path");

    auto* boundary = app.add_subcommand("boundary", "bisect for the empirical stability boundary");
    detail::add_model_flags(boundary, o);
    detail::add_policy_flags(boundary, o);
    detail::add_sim_flags(boundary, o);
    detail::add_out_flag(boundary, o);

    auto* fig = app.add_subcommand("figure", "latency-versus-rate sweeps as CSV");
    fig->add_option("name", figure, "fig2 | fig3")->required()->check(CLI::IsMember({"fig2", "fig3"}));
    detail::add_sim_flags(fig, o);
    detail::add_out_flag(fig, o);
    fig->add_flag("--boundaries", o.boundaries, "fig3: also bisect the six empirical boundaries");

    auto* verify = app.add_subcommand("verify", "numeric probes of the stability results and conjectures");
    verify
        ->add_option("claim", claim, "thm1 | thm2 | thm3 | thm4 | conj1 | conj2 | lemma1 | prop1")
        ->required()
        ->check(CLI::IsMember({"thm1", "thm2", "thm3", "thm4", "conj1", "conj2", "lemma1", "prop1"}));
    detail::add_model_flags(verify, o);
    detail::add_policy_flags(verify, o);
    detail::add_sim_flags(verify, o);
    detail::add_out_flag(verify, o);
    verify->add_option("--trials", o.trials, "lemma1: random (model, policy) pairs")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }

    CLI::App* active = app.get_subcommands().front();
    auto given = [active](const char* flag) {
        try {
            return active->get_option(flag)->count() > 0;
        } catch (const CLI::OptionNotFound&) {
            return false;
        }
    };
    o.has_scenario = given("--scenario");
    o.has_dist = given("--dist");
    o.has_lambda = given("--lambda");
    o.has_d = given("--d");
    if (!given("--seed")) {
        if (const char* env = std::getenv("REDLAB_SEED")) {
            try {
                o.seed = std::stoull(env);
            } catch (const std::exception&) {
                err << "error: REDLAB_SEED is not an unsigned integer\n";
                return usage;
            }
        }
    }

    try {
        if (active == stability) {
            return detail::cmd_stability(o, out);
        }
        if (active == simulate) {
            return detail::cmd_simulate(o, out);
        }
        if (active == boundary) {
            return detail::cmd_boundary(o, out);
        }
        if (active == fig) {
            return detail::cmd_figure(o, figure, out);
        }
        return detail::cmd_verify(o, claim, out);
    } catch (const io::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    }
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv{"redlab"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace redlab::cli
