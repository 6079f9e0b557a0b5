#pragma once

// Command implementations behind tools/basecap_cli. Each command takes a
// validated RunConfig and an output directory, writes its artifacts and
// returns a process exit code: 0 success, 1 validation or check failure,
// 2 solver or numerical failure.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "basecap/boundary.hpp"
#include "basecap/config.hpp"
#include "basecap/errors.hpp"
#include "basecap/model.hpp"
#include "basecap/paths.hpp"
#include "basecap/policy.hpp"
#include "basecap/stopping_oracle.hpp"

namespace basecap::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kSolverFailed = 2 };

/// Shortest round-trip decimal form; "nan"/"inf" for non-finite values.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct Context {
    RunConfig cfg;
    std::filesystem::path out;
    std::ostream* log;
    bool write_surface = false;

    std::ostream& msg() const { return *log; }
};

namespace detail {

inline std::ofstream open_artifact(const Context& ctx, const std::string& name) {
    std::filesystem::create_directories(ctx.out);
    std::ofstream os(ctx.out / name, std::ios::binary);
    if (!os) throw Error("cannot write " + (ctx.out / name).string());
    os << "# config_hash=" << hex64(config_hash(ctx.cfg)) << " seed=" << ctx.cfg.monte_carlo.seed << '\n';
    return os;
}

inline void write_meta(const Context& ctx, const std::string& command) {
    std::filesystem::create_directories(ctx.out);
    std::ofstream os(ctx.out / "run.meta", std::ios::binary);
    os << "version=" << kVersion << '\n'
       << "command=" << command << '\n'
       << "config_hash=" << hex64(config_hash(ctx.cfg)) << '\n'
       << "seed=" << ctx.cfg.monte_carlo.seed << '\n'
       << "f_C_discontinuous=" << (ctx.cfg.model.f_C_discontinuous() ? "true" : "false") << '\n'
       << "config=" << ctx.cfg.source.dump() << '\n';
}

inline TimeGrid time_grid(const RunConfig& cfg) {
    if (!cfg.finite_horizon()) throw ValidationError("grid.T", "this command needs a finite horizon");
    return TimeGrid::uniform(cfg.grid.T, cfg.grid.n_steps);
}

inline std::uint64_t policy_seed(const RunConfig& cfg) { return cfg.monte_carlo.seed + 0x9E3779B97F4A7C15ull; }

inline BoundaryCurve solve_representation(const RunConfig& cfg) {
    const auto grid = std::make_shared<const TimeGrid>(time_grid(cfg));
    const auto pf = cfg.production.build();
    const auto ens = simulate_c0(cfg.model, grid, cfg.monte_carlo.n_paths, cfg.monte_carlo.seed, Measure::Tilted,
                                 cfg.monte_carlo.antithetic);
    return solve_boundary_backward(cfg.model, pf, *grid, ens);
}

inline OracleConfig oracle_config(const RunConfig& cfg) {
    OracleConfig oc;
    oc.substeps = cfg.grid.oracle_substeps;
    oc.match_tol = cfg.tolerances.match_tol;
    return oc;
}

inline bool has_closed_form(const RunConfig& cfg) {
    const auto& m = cfg.model;
    return m.constant_coefficients() && m.f_C(0.0) == 1.0 && m.sigma_C(0.0) > 0.0 && m.mu_F(0.0) > 0.0;
}

inline std::vector<InvestmentPolicy> alternatives(const BoundaryCurve& c) {
    return {NoInvest{}, ScaledBoundary{c, 0.5}, ScaledBoundary{c, 2.0}, LumpAtZero{2.0 * c.values[0]}};
}

}  // namespace detail

inline void write_boundary_csv(std::ostream& os, const BoundaryCurve& c, const ModelParams& params,
                               const ProductionFunction& pf) {
    os << "t,y_hat,stderr,y_star,residual\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double ystar = pf.is_cobb_douglas() ? upper_bound_curve(params, pf, c.grid[i]) : std::nan("");
        os << fmt(c.grid[i]) << ',' << fmt(c.values[i]) << ',' << fmt(c.stderr_[i]) << ',' << fmt(ystar) << ','
           << fmt(c.residual[i]) << '\n';
    }
}

inline int cmd_boundary_solve(const Context& ctx) {
    const auto pf = ctx.cfg.production.build();
    const BoundaryCurve curve = detail::solve_representation(ctx.cfg);
    auto os = detail::open_artifact(ctx, "boundary.csv");
    write_boundary_csv(os, curve, ctx.cfg.model, pf);
    detail::write_meta(ctx, "boundary solve");
    ctx.msg() << "boundary: y_hat(0) = " << fmt(curve.values[0]) << " (stderr " << fmt(curve.stderr_[0]) << "), "
              << curve.size() << " knots -> " << (ctx.out / "boundary.csv").string() << '\n';
    if (ctx.cfg.model.f_C_discontinuous())
        ctx.msg() << "warning: f_C is discontinuous; solver guarantees assume a continuous f_C\n";
    return kOk;
}

inline int cmd_boundary_bound(const Context& ctx) {
    const auto pf = ctx.cfg.production.build();
    const auto grid = detail::time_grid(ctx.cfg);
    const auto curve = upper_bound_on_grid(ctx.cfg.model, pf, grid);
    auto os = detail::open_artifact(ctx, "upper_bound.csv");
    os << "t,y_star\n";
    for (std::size_t i = 0; i < curve.size(); ++i) os << fmt(grid[i]) << ',' << fmt(curve.values[i]) << '\n';
    detail::write_meta(ctx, "boundary bound");
    ctx.msg() << "upper bound: y*(0) = " << fmt(curve.values[0]) << '\n';
    return kOk;
}

inline int cmd_closed_form(const Context& ctx) {
    const auto& m = ctx.cfg.model;
    const auto pf = ctx.cfg.production.build();
    if (!m.constant_coefficients()) throw DomainError("closed forms need constant coefficients");
    const BetaRoots b = beta_roots(m.mu_C(0.0), m.sigma_C(0.0), m.mu_F(0.0));
    std::ostream& o = ctx.msg();
    o << std::setprecision(12);
    o << "beta_plus            " << b.beta_plus << '\n';
    o << "beta_minus           " << b.beta_minus << '\n';
    o << "mu_tilde             " << b.mu_tilde << '\n';
    if (pf.is_cobb_douglas()) {
        const auto cf = closed_form_boundary_infinite(m, pf.alpha());
        o << "a (root form)        " << cf.a << '\n';
        o << "a (identity form)    " << cf.a_identity << '\n';
        o << "relative difference  " << std::abs(cf.a - cf.a_identity) / cf.a << '\n';
        const auto gr = general_R_boundary_infinite(m, pf);
        o << "a (general-R)        " << gr.a << '\n';
        o << "general-R rel. diff  " << std::abs(gr.a - cf.a) / cf.a << '\n';
        ModelParams inf = m;
        inf.horizon = std::numeric_limits<double>::infinity();
        o << "y* limit (T->inf)    " << upper_bound_curve(inf, pf, 0.0) << '\n';
    } else {
        const auto gr = general_R_boundary_infinite(m, pf);
        o << "a (general-R)        " << gr.a << '\n';
    }
    return kOk;
}

inline int cmd_oracle_value(const Context& ctx) {
    const auto pf = ctx.cfg.production.build();
    const auto grid = detail::time_grid(ctx.cfg);
    const auto yg = default_ygrid(ctx.cfg.model, pf, grid, ctx.cfg.grid.n_ypoints);
    const auto oc = detail::oracle_config(ctx.cfg);
    const ValueSurface s = solve_value_function(ctx.cfg.model, pf, grid, yg, oc);
    const BoundaryCurve c = extract_boundary(s, oc);
    {
        auto os = detail::open_artifact(ctx, "oracle_boundary.csv");
        os << "t,y_hat,flagged\n";
        for (std::size_t i = 0; i < c.size(); ++i)
            os << fmt(grid[i]) << ',' << fmt(c.values[i]) << ',' << (c.flagged[i] ? 1 : 0) << '\n';
    }
    if (ctx.write_surface) {
        auto os = detail::open_artifact(ctx, "value_surface.csv");
        write_value_surface_csv(s, os);
    }
    detail::write_meta(ctx, "oracle value");
    ctx.msg() << "oracle: boundary at t=0 is " << fmt(c.values[0]) << '\n';
    return kOk;
}

inline int cmd_policy_simulate(const Context& ctx) {
    const auto pf = ctx.cfg.production.build();
    const BoundaryCurve curve = detail::solve_representation(ctx.cfg);
    const auto grid = std::make_shared<const TimeGrid>(curve.grid);
    const std::uint64_t seed = detail::policy_seed(ctx.cfg);
    const auto ens = simulate_c0(ctx.cfg.model, grid, ctx.cfg.monte_carlo.policy_paths, seed, Measure::Original,
                                 ctx.cfg.monte_carlo.antithetic);
    std::vector<InvestmentPolicy> policies{TrackBoundary{curve}};
    for (auto& alt : detail::alternatives(curve)) policies.push_back(std::move(alt));
    auto os = detail::open_artifact(ctx, "policy.csv");
    os << "policy,J_mean,J_stderr,n_paths,seed\n";
    for (const auto& pol : policies) {
        const auto j = evaluate_profit(pol, ctx.cfg.model, pf, ens, ctx.cfg.model.y0);
        os << policy_name(pol) << ',' << fmt(j.mean) << ',' << fmt(j.stderr_) << ',' << j.n << ',' << seed << '\n';
        ctx.msg() << std::left << std::setw(24) << policy_name(pol) << " J = " << fmt(j.mean) << " +- "
                  << fmt(j.stderr_) << '\n';
    }
    detail::write_meta(ctx, "policy simulate");
    return kOk;
}

inline int cmd_policy_foc(const Context& ctx) {
    const auto pf = ctx.cfg.production.build();
    const BoundaryCurve curve = detail::solve_representation(ctx.cfg);
    const auto grid = std::make_shared<const TimeGrid>(curve.grid);
    const auto ens = simulate_c0(ctx.cfg.model, grid, ctx.cfg.monte_carlo.policy_paths,
                                 detail::policy_seed(ctx.cfg), Measure::Original, ctx.cfg.monte_carlo.antithetic);
    FocConfig fc;
    fc.band = ctx.cfg.tolerances.foc_band;
    const FocReport r = verify_foc(TrackBoundary{curve}, ctx.cfg.model, pf, ens, ctx.cfg.model.y0, fc);
    auto os = detail::open_artifact(ctx, "foc.csv");
    write_foc_csv(r, os);
    detail::write_meta(ctx, "policy foc");
    auto line = [&](const ProbeResult& p) {
        ctx.msg() << (p.pass ? "PASS " : "FAIL ") << std::left << std::setw(12) << p.name << ' ' << fmt(p.estimate.mean)
                  << " +- " << fmt(p.estimate.stderr_) << '\n';
    };
    for (const auto& p : r.deterministic) line(p);
    line(r.hitting);
    line(r.flat_off);
    return r.pass ? kOk : kCheckFailed;
}

struct CheckLine {
    std::string name;
    std::string status;  ///< PASS, FAIL or SKIP
    std::string detail;
};

/// Runs the whole validation battery that the configuration admits.
inline std::vector<CheckLine> run_validation(const RunConfig& cfg, std::ostream& log) {
    std::vector<CheckLine> out;
    auto add = [&](std::string name, bool pass, std::string detail) {
        out.push_back({std::move(name), pass ? "PASS" : "FAIL", std::move(detail)});
        log << out.back().status << "  " << out.back().name << "  " << out.back().detail << '\n';
    };
    auto skip = [&](std::string name, std::string why) {
        out.push_back({std::move(name), "SKIP", std::move(why)});
        log << "SKIP  " << out.back().name << "  " << out.back().detail << '\n';
    };
    const auto pf = cfg.production.build();
    const auto& m = cfg.model;
    const bool closed = detail::has_closed_form(cfg);
    const bool cd = pf.is_cobb_douglas();

    double a = std::nan("");
    if (closed && cd) {
        try {
            const auto cf = closed_form_boundary_infinite(m, pf.alpha());
            a = cf.a;
            add("closed_form_identity", true, "a = " + fmt(cf.a) + ", rel diff " + fmt(std::abs(cf.a - cf.a_identity) / cf.a));
            const auto gr = general_R_boundary_infinite(m, pf);
            const double rel = std::abs(gr.a - cf.a) / cf.a;
            add("general_R_reduction", rel <= 1e-6, "rel diff " + fmt(rel));
        } catch (const NonIntegrableError& e) {
            skip("closed_form_identity", e.what());
        }
    } else {
        skip("closed_form_identity", "needs constant coefficients, f_C = 1 and Cobb-Douglas");
    }

    const auto grid = std::make_shared<const TimeGrid>(detail::time_grid(cfg));
    const auto tilted =
        simulate_c0(m, grid, cfg.monte_carlo.n_paths, cfg.monte_carlo.seed, Measure::Tilted, cfg.monte_carlo.antithetic);
    const BoundaryCurve repr = solve_boundary_backward(m, pf, *grid, tilted);
    const ShapeReport shape = check_shape(repr, m, pf, cfg.tolerances.tol_mono_k);
    add("terminal_zero", shape.terminal_zero, "y_hat(T) = " + fmt(repr.values.back()));
    add("interior_positive", shape.interior_positive, "");
    if (m.constant_coefficients()) {
        const double frac = static_cast<double>(shape.monotone_violations) / static_cast<double>(grid->steps());
        add("monotone_nonincreasing", frac <= 0.02,
            std::to_string(shape.monotone_violations) + " knots above tol_mono");
    } else {
        skip("monotone_nonincreasing", "time-dependent coefficients");
    }
    if (cd)
        add("upper_bound", shape.bound_violations == 0, std::to_string(shape.bound_violations) + " violations");
    else
        skip("upper_bound", "needs Cobb-Douglas");
    {
        std::size_t bad = 0;
        for (std::size_t i = 0; i + 1 < repr.size(); ++i)
            if (std::abs(repr.residual[i]) > std::max(1e-8, 2.0 * repr.residual_stderr[i])) ++bad;
        add("residual_at_root", bad == 0, std::to_string(bad) + " knots off");
    }
    if (closed && cd && std::isfinite(a)) {
        ModelParams inf = m;
        inf.horizon = std::numeric_limits<double>::infinity();
        const double y_lim = upper_bound_curve(inf, pf, 0.0);
        if (upper_bound_curve(m, pf, 0.0) >= 0.999 * y_lim) {
            const double rel = std::abs(repr.values[0] - a) / a;
            add("long_horizon", rel <= 0.05, "y_hat(0) = " + fmt(repr.values[0]) + ", rel diff " + fmt(rel));
        } else {
            skip("long_horizon", "horizon too short for the infinite-horizon limit");
        }
    }

    // Oracle
    const auto oc = detail::oracle_config(cfg);
    try {
        const auto yg = default_ygrid(m, pf, *grid, cfg.grid.n_ypoints);
        const ValueSurface s = solve_value_function(m, pf, *grid, yg, oc);
        const BoundaryCurve orc = extract_boundary(s, oc);
        bool capped = true;
        for (std::size_t i = 0; i < grid->size(); ++i)
            for (std::size_t j = 0; j < s.n_y(); ++j)
                if (!(s.v(i, j) <= s.inv_f[i] + 1e-12) || s.v(i, j) < 0.0) capped = false;
        add("oracle_value_cap", capped, "0 <= v <= 1/f_C");
        add("oracle_down_sets", stop_sets_are_down_sets(s), "");
        const auto cv = cross_validate(repr, orc, cfg.tolerances.cross_rel, cfg.tolerances.cross_abs);
        add("cross_validation", cv.pass,
            "sup rel (t<=0.9T) " + fmt(cv.sup_rel_early) + ", sup abs (rest) " + fmt(cv.sup_abs_late));
    } catch (const CoverageError& e) {
        add("oracle_coverage", false, e.what());
    }

    // Policies
    const auto orig = simulate_c0(m, grid, cfg.monte_carlo.policy_paths, detail::policy_seed(cfg), Measure::Original,
                                  cfg.monte_carlo.antithetic);
    if (cd && m.constant_coefficients()) {
        const double al = pf.alpha(), s2 = m.sigma_C(0.0) * m.sigma_C(0.0);
        const double lam = m.mu_F(0.0) + al * m.mu_C(0.0) + 0.5 * al * (1.0 - al) * s2;
        const double exact = std::pow(m.y0, al) / al * (-std::expm1(-lam * cfg.grid.T)) / lam;
        const auto j = evaluate_profit(NoInvest{}, m, pf, orig, m.y0);
        add("profit_oracle", std::abs(j.mean - exact) <= cfg.tolerances.profit_band * j.stderr_,
            "J = " + fmt(j.mean) + " +- " + fmt(j.stderr_) + ", exact " + fmt(exact));
    } else {
        skip("profit_oracle", "needs Cobb-Douglas with constant coefficients");
    }
    FocConfig fc;
    fc.band = cfg.tolerances.foc_band;
    const FocReport foc = verify_foc(TrackBoundary{repr}, m, pf, orig, m.y0, fc);
    bool det = true;
    for (const auto& p : foc.deterministic) det = det && p.pass;
    add("foc_deterministic_probes", det, std::to_string(foc.deterministic.size()) + " probes");
    add("foc_hitting_probes", foc.hitting.pass,
        fmt(foc.hitting.estimate.mean) + " +- " + fmt(foc.hitting.estimate.stderr_) + " over " +
            std::to_string(foc.hitting.estimate.n) + " paths");
    add("foc_flat_off", foc.flat_off.pass, fmt(foc.flat_off.estimate.mean) + " +- " + fmt(foc.flat_off.estimate.stderr_));
    const auto noinv = supergradient(NoInvest{}, 0, m, pf, orig, 0.01);
    add("foc_no_invest_fails", noinv.mean > fc.band * noinv.stderr_,
        "supergradient at 0 = " + fmt(noinv.mean) + " +- " + fmt(noinv.stderr_));
    for (const auto& d : dominance(TrackBoundary{repr}, detail::alternatives(repr), m, pf, orig, m.y0, fc.band))
        add("dominates_" + d.alternative, d.pass, "J diff " + fmt(d.difference.mean) + " +- " + fmt(d.difference.stderr_));
    return out;
}

inline int cmd_validate(const Context& ctx) {
    std::ostringstream report;
    const auto lines = run_validation(ctx.cfg, report);
    ctx.msg() << report.str();
    std::filesystem::create_directories(ctx.out);
    {
        auto os = detail::open_artifact(ctx, "validate.csv");
        os << "check,status,detail\n";
        for (const auto& l : lines) os << l.name << ',' << l.status << ",\"" << l.detail << "\"\n";
    }
    detail::write_meta(ctx, "validate");
    const bool ok = std::none_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.status == "FAIL"; });
    ctx.msg() << (ok ? "all checks passed" : "some checks FAILED") << '\n';
    return ok ? kOk : kCheckFailed;
}

/// Runs a command, translating library errors into exit codes.
inline int guarded(const std::function<int()>& fn, std::ostream& err) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kCheckFailed;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kSolverFailed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kSolverFailed;
    }
}

}  // namespace basecap::cli
