#pragma once

// Run configuration: a JSON document with blocks model, production, grid,
// monte_carlo, tolerances and output. See configs/reference.json.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "basecap/errors.hpp"
#include "basecap/model.hpp"

namespace basecap {

struct GridSettings {
    double T = 10.0;
    std::size_t n_steps = 200;
    std::size_t n_ypoints = 400;
    int oracle_substeps = 16;
};

struct MonteCarloSettings {
    std::size_t n_paths = 20000;
    std::size_t policy_paths = 20000;
    std::uint64_t seed = 1;
    bool antithetic = false;
};

struct ToleranceSettings {
    double tol_mono_k = 3.0;   ///< monotonicity / bound slack in root standard errors
    double match_tol = 1e-9;   ///< oracle stopping set, relative to 1/f_C
    double foc_band = 2.0;     ///< verdict band in standard errors
    double cross_rel = 0.05;
    double cross_abs = 0.02;
    double profit_band = 3.0;
};

struct ProductionSettings {
    std::string kind = "cobb_douglas";
    double alpha = 0.5;
    double alpha2 = 0.25;
    double weight = 1.0;

    ProductionFunction build() const {
        if (kind == "cobb_douglas") return ProductionFunction::cobb_douglas(alpha);
        if (kind == "two_power") return ProductionFunction::two_power(alpha, alpha2, weight);
        throw ValidationError("production.kind", "unknown production function '" + kind + "'");
    }
};

struct RunConfig {
    ModelParams model;
    ProductionSettings production;
    GridSettings grid;
    MonteCarloSettings monte_carlo;
    ToleranceSettings tolerances;
    std::string output_dir = "out";
    nlohmann::json source;  ///< canonical document the run was built from

    /// Throws ValidationError naming the first offending field.
    void validate() const {
        model.validate();
        (void)production.build();
        if (!(grid.T > 0.0) || std::isnan(grid.T)) throw ValidationError("grid.T", "must be > 0");
        if (grid.n_steps < 1) throw ValidationError("grid.n_steps", "must be >= 1");
        if (grid.n_ypoints < 2) throw ValidationError("grid.n_ypoints", "must be >= 2");
        if (grid.oracle_substeps < 1) throw ValidationError("grid.oracle_substeps", "must be >= 1");
        if (monte_carlo.n_paths < 1) throw ValidationError("monte_carlo.n_paths", "must be >= 1");
        if (monte_carlo.policy_paths < 1) throw ValidationError("monte_carlo.policy_paths", "must be >= 1");
        auto positive = [](double v, const char* field) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(field, "must be > 0");
        };
        positive(tolerances.tol_mono_k, "tolerances.tol_mono_k");
        positive(tolerances.match_tol, "tolerances.match_tol");
        positive(tolerances.foc_band, "tolerances.foc_band");
        positive(tolerances.cross_rel, "tolerances.cross_rel");
        positive(tolerances.cross_abs, "tolerances.cross_abs");
        positive(tolerances.profit_band, "tolerances.profit_band");
    }

    bool finite_horizon() const { return std::isfinite(grid.T); }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& block, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw ValidationError(block, "must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw ValidationError(block + "." + k, "unknown key");
}

inline double number_at(const json& obj, const std::string& block, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity"))
        return std::numeric_limits<double>::infinity();
    throw ValidationError(block + "." + key, "must be a number");
}

inline std::size_t count_at(const json& obj, const std::string& block, const char* key, std::size_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ValidationError(block + "." + key, "must be a non-negative integer");
    return v.get<std::size_t>();
}

/// A coefficient is a number or {"breakpoints": [...], "values": [...]}.
inline PiecewiseConstant coefficient_at(const json& obj, const char* key, double fallback) {
    const std::string field = std::string("model.") + key;
    if (!obj.contains(key)) return PiecewiseConstant(fallback);
    const json& v = obj.at(key);
    if (v.is_number()) return PiecewiseConstant(v.get<double>());
    if (v.is_object()) {
        reject_unknown(v, field, {"breakpoints", "values"});
        try {
            return PiecewiseConstant(v.at("breakpoints").get<std::vector<double>>(),
                                     v.at("values").get<std::vector<double>>());
        } catch (const DomainError& e) {
            throw ValidationError(field, e.what());
        } catch (const json::exception& e) {
            throw ValidationError(field, std::string("expects numeric arrays 'breakpoints' and 'values': ") + e.what());
        }
    }
    throw ValidationError(field, "must be a number or a piecewise-constant object");
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc) {
    using detail::count_at;
    using detail::number_at;
    if (!doc.is_object()) throw ValidationError("config", "top level must be an object");
    detail::reject_unknown(doc, "config", {"model", "production", "grid", "monte_carlo", "tolerances", "output"});
    RunConfig c;
    c.source = doc;

    const auto block = [&](const char* name) { return doc.contains(name) ? doc.at(name) : nlohmann::json::object(); };

    const auto m = block("model");
    detail::reject_unknown(m, "model", {"mu_C", "sigma_C", "f_C", "mu_F", "y0"});
    c.model.mu_C = detail::coefficient_at(m, "mu_C", 0.0);
    c.model.sigma_C = detail::coefficient_at(m, "sigma_C", 0.0);
    c.model.f_C = detail::coefficient_at(m, "f_C", 1.0);
    c.model.mu_F = detail::coefficient_at(m, "mu_F", 0.0);
    c.model.y0 = number_at(m, "model", "y0", 1.0);

    const auto p = block("production");
    detail::reject_unknown(p, "production", {"kind", "alpha", "alpha2", "weight"});
    if (p.contains("kind")) {
        if (!p.at("kind").is_string()) throw ValidationError("production.kind", "must be a string");
        c.production.kind = p.at("kind").get<std::string>();
    }
    c.production.alpha = number_at(p, "production", "alpha", c.production.alpha);
    c.production.alpha2 = number_at(p, "production", "alpha2", c.production.alpha2);
    c.production.weight = number_at(p, "production", "weight", c.production.weight);

    const auto g = block("grid");
    detail::reject_unknown(g, "grid", {"T", "n_steps", "n_ypoints", "oracle_substeps"});
    c.grid.T = number_at(g, "grid", "T", c.grid.T);
    c.grid.n_steps = count_at(g, "grid", "n_steps", c.grid.n_steps);
    c.grid.n_ypoints = count_at(g, "grid", "n_ypoints", c.grid.n_ypoints);
    c.grid.oracle_substeps = static_cast<int>(count_at(g, "grid", "oracle_substeps", 16));
    c.model.horizon = c.grid.T;

    const auto mc = block("monte_carlo");
    detail::reject_unknown(mc, "monte_carlo", {"n_paths", "policy_paths", "seed", "antithetic"});
    c.monte_carlo.n_paths = count_at(mc, "monte_carlo", "n_paths", c.monte_carlo.n_paths);
    c.monte_carlo.policy_paths = count_at(mc, "monte_carlo", "policy_paths", c.monte_carlo.n_paths);
    if (mc.contains("seed")) {
        if (!mc.at("seed").is_number_unsigned()) throw ValidationError("monte_carlo.seed", "must be an unsigned integer");
        c.monte_carlo.seed = mc.at("seed").get<std::uint64_t>();
    }
    if (mc.contains("antithetic")) {
        if (!mc.at("antithetic").is_boolean()) throw ValidationError("monte_carlo.antithetic", "must be true or false");
        c.monte_carlo.antithetic = mc.at("antithetic").get<bool>();
    }

    const auto t = block("tolerances");
    detail::reject_unknown(t, "tolerances",
                           {"tol_mono_k", "match_tol", "foc_band", "cross_rel", "cross_abs", "profit_band"});
    auto& tol = c.tolerances;
    tol.tol_mono_k = number_at(t, "tolerances", "tol_mono_k", tol.tol_mono_k);
    tol.match_tol = number_at(t, "tolerances", "match_tol", tol.match_tol);
    tol.foc_band = number_at(t, "tolerances", "foc_band", tol.foc_band);
    tol.cross_rel = number_at(t, "tolerances", "cross_rel", tol.cross_rel);
    tol.cross_abs = number_at(t, "tolerances", "cross_abs", tol.cross_abs);
    tol.profit_band = number_at(t, "tolerances", "profit_band", tol.profit_band);

    if (doc.contains("output")) {
        if (!doc.at("output").is_string()) throw ValidationError("output", "must be a directory path string");
        c.output_dir = doc.at("output").get<std::string>();
    }
    c.validate();
    return c;
}

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config", std::string("not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Replaces the seed in both the settings and the canonical document.
inline void override_seed(RunConfig& c, std::uint64_t seed) {
    c.monte_carlo.seed = seed;
    c.source["monte_carlo"]["seed"] = seed;
}

/// 64-bit FNV-1a of the canonical (key-sorted, compact) JSON dump.
inline std::uint64_t config_hash(const RunConfig& c) {
    const std::string text = c.source.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    auto res = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, res.ptr);
    return std::string(16 - s.size(), '0') + s;
}

}  // namespace basecap
