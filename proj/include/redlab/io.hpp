#pragma once

#include "redlab/analytics.hpp"
#include "redlab/assignment.hpp"
#include "redlab/distributions.hpp"
#include "redlab/simulator.hpp"
#include "redlab/workload.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace redlab::io {

using json = nlohmann::ordered_json;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Rounds to `digits` significant digits so serialized reports are stable.
inline double round_sig(double x, int digits = 12)
{
    if (!std::isfinite(x) || x == 0.0) {
        return x;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return std::strtod(buf, nullptr);
}

/// JSON has no infinity; divergent or unbounded values become strings.
inline json number(double x)
{
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    return round_sig(x);
}

inline std::string format_sig(double x, int digits = 6)
{
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

// ---------------------------------------------------------------------------
// distributions

inline json to_json(const Distribution& dist)
{
    return std::visit(
        [](const auto& l) -> json {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Deterministic>) {
                return {{"type", "deterministic"}, {"value", l.value}};
            } else if constexpr (std::is_same_v<T, Exponential>) {
                return {{"type", "exponential"}, {"rate", l.rate}};
            } else if constexpr (std::is_same_v<T, Weibull>) {
                return {{"type", "weibull"}, {"scale", l.scale}, {"shape", l.shape}};
            } else {
                return {{"type", "scaled_bernoulli"}, {"k", l.k}};
            }
        },
        dist.law());
}

inline double required_number(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key) || !j[key].is_number()) {
        throw ConfigError(where + ": missing numeric field '" + key + "'");
    }
    return j[key].get<double>();
}

inline Distribution distribution_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw ConfigError("distribution needs a string 'type'");
    }
    const auto type = j["type"].get<std::string>();
    try {
        if (type == "deterministic" || type == "det") {
            return Distribution::deterministic(required_number(j, "value", type));
        }
        if (type == "exponential" || type == "exp") {
            return Distribution::exponential(j.contains("rate") ? required_number(j, "rate", type) : 1.0);
        }
        if (type == "weibull") {
            return Distribution::weibull(required_number(j, "scale", type), required_number(j, "shape", type));
        }
        if (type == "scaled_bernoulli" || type == "bernoulli") {
            return Distribution::scaled_bernoulli(required_number(j, "k", type));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    throw ConfigError("unknown distribution type '" + type + "'");
}

namespace detail {

/// "name:key=value,key=value" into (name, map).
inline std::pair<std::string, std::map<std::string, double>> parse_shorthand(const std::string& text)
{
    const auto colon = text.find(':');
    std::pair<std::string, std::map<std::string, double>> out;
    out.first = text.substr(0, colon);
    if (colon == std::string::npos) {
        return out;
    }
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("expected key=value in '" + text + "'");
        }
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != value.size() || value.empty()) {
            throw ConfigError("'" + value + "' is not a number in '" + text + "'");
        }
        out.second[key] = v;
    }
    return out;
}

inline double take(std::map<std::string, double>& kv, const std::string& key, double fallback)
{
    const auto it = kv.find(key);
    if (it == kv.end()) {
        return fallback;
    }
    const double v = it->second;
    kv.erase(it);
    return v;
}

inline void require_consumed(const std::map<std::string, double>& kv, const std::string& text)
{
    if (!kv.empty()) {
        throw ConfigError("unknown key '" + kv.begin()->first + "' in '" + text + "'");
    }
}

}  // namespace detail

/// The two Weibull laws used throughout the experiments (both have mean close to 1).
inline Distribution nbu_reference_law() { return Distribution::weibull(1.128, 2.0); }
inline Distribution nwu_reference_law() { return Distribution::weibull(0.5, 0.5); }

/// exp[:rate=], weibull:scale=,shape=, det[:value=], bernoulli:k=, nbu, nwu
inline Distribution parse_distribution(const std::string& text)
{
    auto [name, kv] = detail::parse_shorthand(text);
    std::optional<Distribution> out;
    try {
        if (name == "exp" || name == "exponential") {
            out = Distribution::exponential(detail::take(kv, "rate", 1.0));
        } else if (name == "weibull") {
            const double scale = detail::take(kv, "scale", std::nan(""));
            const double shape = detail::take(kv, "shape", std::nan(""));
            if (std::isnan(scale) || std::isnan(shape)) {
                throw ConfigError("weibull needs scale= and shape=");
            }
            out = Distribution::weibull(scale, shape);
        } else if (name == "det" || name == "deterministic") {
            out = Distribution::deterministic(detail::take(kv, "value", 1.0));
        } else if (name == "bernoulli" || name == "scaled_bernoulli") {
            const double k = detail::take(kv, "k", std::nan(""));
            if (std::isnan(k)) {
                throw ConfigError("bernoulli needs k=");
            }
            out = Distribution::scaled_bernoulli(k);
        } else if (name == "nbu") {
            out = nbu_reference_law();
        } else if (name == "nwu") {
            out = nwu_reference_law();
        } else {
            throw ConfigError("unknown distribution '" + name + "'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    detail::require_consumed(kv, text);
    return *out;
}

// ---------------------------------------------------------------------------
// models

inline json to_json(const SystemModel& model)
{
    json types = json::array();
    for (const auto& t : model.types) {
        types.push_back({{"p", t.probability},
                         {"size_law", to_json(t.size_law)},
                         {"variation_law", to_json(t.variation_law)},
                         {"speeds", t.speeds}});
    }
    return {{"n_servers", model.servers}, {"replica_mode", to_string(model.replica_mode)}, {"types", types}};
}

inline ReplicaMode parse_replica_mode(const std::string& s)
{
    if (s == "identical") {
        return ReplicaMode::identical;
    }
    if (s == "iid") {
        return ReplicaMode::iid;
    }
    throw ConfigError("replica_mode must be 'identical' or 'iid'");
}

inline SystemModel model_from_json(const json& j)
{
    if (!j.is_object()) {
        throw ConfigError("scenario must be a JSON object");
    }
    auto law_or = [](const json& obj, const char* key, const Distribution& fallback) {
        return obj.contains(key) ? distribution_from_json(obj[key]) : fallback;
    };
    const auto one = Distribution::deterministic(1.0);
    SystemModel model;
    try {
        if (j.contains("fs")) {
            const auto& f = j["fs"];
            const auto variation = law_or(f, "variation_law", Distribution::exponential(1.0));
            model = build_fs_scenario(f.value("n", std::size_t{3}), f.value("r_fast", 1.0), f.value("r_slow", 0.5),
                                      law_or(f, "size_law", one), variation);
        } else if (j.contains("homogeneous")) {
            const auto& h = j["homogeneous"];
            model = build_homogeneous(h.value("n", std::size_t{2}), law_or(h, "size_law", one),
                                      law_or(h, "variation_law", Distribution::exponential(1.0)));
        } else {
            if (!j.contains("n_servers") || !j.contains("types") || !j["types"].is_array()) {
                throw ConfigError("scenario needs n_servers and types[] (or an fs/homogeneous shorthand)");
            }
            model.servers = j["n_servers"].get<std::size_t>();
            for (const auto& t : j["types"]) {
                if (!t.contains("speeds") || !t["speeds"].is_array()) {
                    throw ConfigError("each type needs a speeds array");
                }
                model.types.push_back({required_number(t, "p", "type"), law_or(t, "size_law", one),
                                       distribution_from_json(t.at("variation_law")),
                                       t["speeds"].get<std::vector<double>>()});
            }
            model.replica_mode = j.contains("replica_mode")
                                     ? parse_replica_mode(j["replica_mode"].get<std::string>())
                                     : (model.types.empty() ? ReplicaMode::iid
                                                            : default_mode(model.types.front().variation_law));
        }
        if (j.contains("replica_mode") && (j.contains("fs") || j.contains("homogeneous"))) {
            model.replica_mode = parse_replica_mode(j["replica_mode"].get<std::string>());
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto errors = validate(model);
    if (!errors.empty()) {
        std::string msg = "invalid scenario:";
        for (const auto& e : errors) {
            msg += " " + e + ";";
        }
        throw ConfigError(msg);
    }
    return model;
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

/// fs:n=3,rslow=0.5[,rfast=1] | hom:n=2 | path to a JSON scenario
inline SystemModel parse_scenario(const std::string& text, const Distribution& variation,
                                  const Distribution& size = Distribution::deterministic(1.0))
{
    if (text.rfind("fs", 0) == 0 && (text.size() == 2 || text[2] == ':')) {
        auto [name, kv] = detail::parse_shorthand(text);
        const double n = detail::take(kv, "n", 3);
        const double r_slow = detail::take(kv, "rslow", 0.5);
        const double r_fast = detail::take(kv, "rfast", 1.0);
        detail::require_consumed(kv, text);
        if (n < 1 || n > max_servers || n != std::floor(n)) {
            throw ConfigError("fs: n must be an integer in [1, " + std::to_string(max_servers) + "]");
        }
        try {
            return build_fs_scenario(static_cast<std::size_t>(n), r_fast, r_slow, size, variation);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (text.rfind("hom", 0) == 0 && (text.size() == 3 || text[3] == ':')) {
        auto [name, kv] = detail::parse_shorthand(text);
        const double n = detail::take(kv, "n", 2);
        detail::require_consumed(kv, text);
        if (n < 1 || n > max_servers || n != std::floor(n)) {
            throw ConfigError("hom: n must be an integer in [1, " + std::to_string(max_servers) + "]");
        }
        try {
            return build_homogeneous(static_cast<std::size_t>(n), size, variation);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    return model_from_json(read_json_file(text));
}

// ---------------------------------------------------------------------------
// policies

inline json to_json(const Policy& policy)
{
    json subsets = json::array();
    const auto& catalog = policy.catalog();
    for (std::size_t h = 0; h < catalog.size(); ++h) {
        json s = json::array();
        for (auto i : catalog.subset(h)) {
            s.push_back(i + 1);
        }
        subsets.push_back(s);
    }
    json out{{"d", policy.degree()}, {"visibility", to_string(policy.visibility())}, {"subsets", subsets}};
    if (policy.visibility() == TypeVisibility::unknown) {
        json p = json::array();
        for (double x : policy.probs()) {
            p.push_back(round_sig(x));
        }
        out["p"] = p;
    } else {
        json rows = json::array();
        for (std::size_t j = 0; j < policy.vector_count(); ++j) {
            json p = json::array();
            for (double x : policy.probs(j)) {
                p.push_back(round_sig(x));
            }
            rows.push_back(p);
        }
        out["by_type"] = rows;
    }
    return out;
}

namespace detail {

inline std::vector<double> probs_over_catalog(const SubsetCatalog& catalog, const json& subsets, const json& p)
{
    if (!subsets.is_array() || !p.is_array() || subsets.size() != p.size()) {
        throw ConfigError("policy 'subsets' and 'p' must be arrays of equal length");
    }
    std::vector<double> out(catalog.size(), 0.0);
    for (std::size_t k = 0; k < subsets.size(); ++k) {
        std::vector<std::uint8_t> s;
        for (const auto& v : subsets[k]) {
            const auto server = v.get<long long>();
            if (server < 1 || static_cast<std::size_t>(server) > catalog.servers()) {
                throw ConfigError("policy subset references a server outside 1.." + std::to_string(catalog.servers()));
            }
            s.push_back(static_cast<std::uint8_t>(server - 1));
        }
        std::sort(s.begin(), s.end());
        if (s.size() != catalog.degree() || std::adjacent_find(s.begin(), s.end()) != s.end()) {
            throw ConfigError("policy subset must list d distinct servers");
        }
        out[catalog.index_of(s)] += p[k].get<double>();
    }
    return out;
}

}  // namespace detail

/// {"d":2,"probs":"uniform"} | {"d":2,"subsets":[[1,2],...],"p":[...]} |
/// {"d":1,"by_type":[[...],...]} with one catalog-ordered vector (or {"subsets","p"} object) per type
inline Policy policy_from_json(const json& j, const SystemModel& model)
{
    if (!j.is_object() || !j.contains("d")) {
        throw ConfigError("policy needs a replication degree 'd'");
    }
    try {
        const auto d = j["d"].get<std::size_t>();
        auto catalog = std::make_shared<const SubsetCatalog>(model.servers, d);
        if (j.contains("by_type")) {
            const auto& rows = j["by_type"];
            if (!rows.is_array() || rows.size() != model.type_count()) {
                throw ConfigError("policy 'by_type' needs one entry per job type");
            }
            std::vector<std::vector<double>> probs;
            for (const auto& row : rows) {
                if (row.is_object()) {
                    probs.push_back(detail::probs_over_catalog(*catalog, row.at("subsets"), row.at("p")));
                } else {
                    probs.push_back(row.get<std::vector<double>>());
                }
            }
            return Policy::by_type(catalog, std::move(probs));
        }
        if (j.contains("subsets")) {
            return Policy::type_blind(catalog, detail::probs_over_catalog(*catalog, j["subsets"], j.at("p")));
        }
        if (j.contains("p")) {
            return Policy::type_blind(catalog, j["p"].get<std::vector<double>>());
        }
        if (!j.contains("probs") || j["probs"] == "uniform") {
            return uniform_power_of_d(model.servers, d);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("policy: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    throw ConfigError("policy: unrecognised 'probs' value");
}

/// uniform | diag | path to a JSON policy; `d` applies to uniform.
inline Policy parse_policy(const std::string& text, std::size_t d, const SystemModel& model)
{
    try {
        if (text == "uniform") {
            return uniform_power_of_d(model.servers, d);
        }
        if (text == "diag") {
            return diag_d1_policy(model);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return policy_from_json(read_json_file(text), model);
}

// ---------------------------------------------------------------------------
// reports

inline json matrix(const std::vector<std::vector<double>>& m)
{
    json out = json::array();
    for (const auto& row : m) {
        json r = json::array();
        for (double x : row) {
            r.push_back(number(x));
        }
        out.push_back(r);
    }
    return out;
}

inline json vector(const std::vector<double>& v)
{
    json out = json::array();
    for (double x : v) {
        out.push_back(number(x));
    }
    return out;
}

inline json to_json(const StabilityReport& rep)
{
    return {{"kind", rep.kind},
            {"lambda_sup", number(rep.lambda_sup)},
            {"per_server_thresholds", vector(rep.per_server_thresholds)},
            {"witness", matrix(rep.witness)}};
}

inline json to_json(const LoadProxies& p)
{
    json gamma = json::array();
    json hat = json::array();
    for (std::size_t i = 0; i < p.servers; ++i) {
        gamma.push_back(p.gamma_i[i] ? number(*p.gamma_i[i]) : json(nullptr));
        hat.push_back(p.hat_gamma_i[i] ? number(*p.hat_gamma_i[i]) : json(nullptr));
    }
    return {{"gamma_i", gamma},
            {"hat_gamma_i", hat},
            {"gamma_0", number(p.gamma_0)},
            {"hat_gamma_0", number(p.hat_gamma_0)},
            {"load_per_unit_rate", vector(p.load)}};
}

inline json to_json(const TauMatrix& t)
{
    auto rows = [&t](const std::vector<double>& flat) {
        std::vector<std::vector<double>> m(t.servers, std::vector<double>(t.types));
        for (std::size_t i = 0; i < t.servers; ++i) {
            for (std::size_t j = 0; j < t.types; ++j) {
                m[i][j] = flat[i * t.types + j];
            }
        }
        return matrix(m);
    };
    json out{{"lambda0", number(t.lambda0)}, {"tau", rows(t.tau)}};
    if (t.has_split) {
        out["tau1"] = rows(t.tau1);
        out["tau2"] = rows(t.tau2);
    }
    return out;
}

inline json to_json(const SimStats& s)
{
    json out{{"lambda", number(s.lambda)},
             {"horizon", s.horizon},
             {"warmup", s.warmup},
             {"seed", s.seed},
             {"diverged", s.diverged},
             {"divergent", s.divergent()},
             {"growth_slope", number(s.growth_slope)},
             {"jobs_completed", s.jobs_completed},
             {"events", s.events},
             {"max_queued_replicas", s.max_queued_replicas},
             {"window", {number(s.window_start), number(s.window_end)}},
             {"mean_latency", number(s.mean_latency)},
             {"latency_half_width", number(s.latency_half_width)},
             {"pi0_bar", number(s.pi0_bar)},
             {"pi0_star", number(s.pi0_star)},
             {"mean_overlap", number(s.mean_overlap)},
             {"tau", matrix(s.tau)},
             {"tau1", matrix(s.tau1)},
             {"tau2", matrix(s.tau2)},
             {"batches", s.batches.size()},
             {"trace_hash", s.trace_hash}};
    if (s.property_checks > 0) {
        out["property_checks"] = s.property_checks;
        out["property_violations"] = s.property_violations;
    }
    return out;
}

/// Writes `text` to `path`; "-" leaves it to the caller.
inline void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write '" + path + "'");
    }
    out << text;
}

}  // namespace redlab::io
