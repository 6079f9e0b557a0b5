#pragma once

// Dynamic-programming solver for the shadow value
//
//   v(s, y) = inf_tau E~[ int_s^tau e^{-int mu_bar} R_c(Y(u)) du + e^{-int_s^tau mu_bar} 1_{tau<T} / f_C(tau) ]
//
// with Y the uncontrolled capacity started at y under the tilted measure. The
// backward recursion runs on `substeps` sub-intervals per time-grid interval;
// the one-step expectation uses Gauss-Hermite quadrature and linear
// interpolation in log y. Because stopping is only allowed on the sub-grid,
// the extracted boundary gets the Broadie-Glasserman-Kou shift toward the
// continuously monitored one.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "basecap/boundary.hpp"
#include "basecap/errors.hpp"
#include "basecap/model.hpp"
#include "basecap/parallel.hpp"
#include "basecap/paths.hpp"
#include "basecap/quadrature.hpp"

namespace basecap {

struct OracleConfig {
    int gh_order = 21;
    int substeps = 16;
    /// Stopping set is {v >= 1/f_C - match_tol / f_C}.
    double match_tol = 1e-9;
    bool continuity_correction = true;
};

/// -zeta(1/2) / sqrt(2 pi): the shift between discretely and continuously monitored barriers.
inline constexpr double kBgkBeta = 0.5825971579390106;

struct ValueSurface {
    TimeGrid tgrid;
    std::vector<double> ygrid;
    std::vector<double> values;        ///< (N+1) x M, row-major by time
    std::vector<double> continuation;  ///< value of continuing one sub-step, same layout
    std::vector<bool> stop;
    std::vector<double> inv_f;         ///< 1/f_C(t_i)
    std::vector<double> sub_dt;        ///< sub-step length used in interval i
    std::vector<double> sigma;         ///< sigma_C(t_i)

    ValueSurface(TimeGrid t, std::vector<double> y)
        : tgrid(std::move(t)), ygrid(std::move(y)), values(tgrid.size() * ygrid.size(), 0.0),
          continuation(values.size(), 0.0), stop(values.size(), false), inv_f(tgrid.size(), 0.0),
          sub_dt(tgrid.size(), 0.0), sigma(tgrid.size(), 0.0) {}

    std::size_t n_y() const { return ygrid.size(); }
    double v(std::size_t i, std::size_t j) const { return values[i * n_y() + j]; }
    bool stopped(std::size_t i, std::size_t j) const { return stop[i * n_y() + j]; }
};

inline std::vector<double> log_spaced(double lo, double hi, std::size_t m) {
    if (!(lo > 0.0 && hi > lo) || m < 2) throw DomainError("log-spaced grid needs 0 < lo < hi and m >= 2");
    std::vector<double> y(m);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t j = 0; j < m; ++j) y[j] = std::exp(a + (b - a) * static_cast<double>(j) / static_cast<double>(m - 1));
    return y;
}

/// Scale of the boundary at t = 0: y*(0) for Cobb-Douglas, else the infinite-horizon root.
inline double boundary_scale(const ModelParams& params, const ProductionFunction& pf) {
    if (pf.is_cobb_douglas()) return upper_bound_curve(params, pf, 0.0);
    return general_R_boundary_infinite(params, pf).a;
}

/// Capacity grid spanning [1e-3 a_ref, 1e3 a_ref], extended downwards so the
/// boundary at the last interior knot is covered too.
inline std::vector<double> default_ygrid(const ModelParams& params, const ProductionFunction& pf,
                                         const TimeGrid& tgrid, std::size_t m) {
    const double a_ref = boundary_scale(params, pf);
    double lo = 1e-3 * a_ref;
    if (pf.is_cobb_douglas()) lo = std::min(lo, 0.1 * upper_bound_curve(params, pf, tgrid[tgrid.steps() - 1]));
    return log_spaced(lo, 1e3 * a_ref, m);
}

namespace detail {

/// Linear interpolation in log y with constant extrapolation.
class LogInterp {
public:
    explicit LogInterp(const std::vector<double>& y) : logy_(y.size()) {
        for (std::size_t j = 0; j < y.size(); ++j) logy_[j] = std::log(y[j]);
    }
    double operator()(const double* v, double x) const {
        if (x <= logy_.front()) return v[0];
        if (x >= logy_.back()) return v[logy_.size() - 1];
        const auto it = std::upper_bound(logy_.begin(), logy_.end(), x);
        const auto k = static_cast<std::size_t>(it - logy_.begin()) - 1;
        const double w = (x - logy_[k]) / (logy_[k + 1] - logy_[k]);
        return v[k] + w * (v[k + 1] - v[k]);
    }
    double log_y(std::size_t j) const { return logy_[j]; }

private:
    std::vector<double> logy_;
};

}  // namespace detail

inline ValueSurface solve_value_function(const ModelParams& params, const ProductionFunction& pf,
                                         const TimeGrid& tgrid, const std::vector<double>& ygrid,
                                         const OracleConfig& cfg = {}) {
    if (ygrid.size() < 2 || !std::is_sorted(ygrid.begin(), ygrid.end()) || !(ygrid.front() > 0.0))
        throw DomainError("ygrid must be increasing and positive");
    if (cfg.substeps < 1) throw DomainError("oracle substeps must be >= 1");
    if (tgrid.horizon() > params.horizon * (1.0 + 1e-12)) throw DomainError("time grid extends beyond the horizon");
    const GaussHermiteRule gh = gauss_hermite(cfg.gh_order);
    const std::size_t N = tgrid.steps(), M = ygrid.size();
    ValueSurface s(tgrid, ygrid);
    const detail::LogInterp interp(ygrid);

    std::vector<double> running(M);
    for (std::size_t j = 0; j < M; ++j) running[j] = pf.marginal_unchecked(ygrid[j]);
    s.inv_f[N] = 1.0 / params.f_C(tgrid[N]);

    std::vector<double> next(M, 0.0), cur(M), cont(M);
    for (std::size_t i = N; i-- > 0;) {
        const double dt = tgrid.dt(i) / cfg.substeps;
        s.sub_dt[i] = dt;
        s.sigma[i] = params.sigma_C(tgrid[i]);
        for (int sub = cfg.substeps - 1; sub >= 0; --sub) {
            const double a = tgrid[i] + dt * sub;
            const double b = (sub + 1 == cfg.substeps) ? tgrid[i + 1] : a + dt;
            const double var = params.sigma_C.integral_of(a, b, [](double x) { return x * x; });
            const double mean = 0.5 * var - params.mu_C.integral(a, b);
            const double disc = std::exp(-params.mu_C.integral(a, b) - params.mu_F.integral(a, b));
            const double sd = std::sqrt(var);
            const double cap = 1.0 / params.f_C(a);
            parallel_chunks(M, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t j = lo; j < hi; ++j) {
                    const double x = interp.log_y(j) + mean;
                    double e = 0.0;
                    for (std::size_t q = 0; q < gh.nodes.size(); ++q)
                        e += gh.weights[q] * interp(next.data(), x + sd * gh.nodes[q]);
                    cont[j] = running[j] * (b - a) + disc * e;
                    cur[j] = std::min(cap, cont[j]);
                }
            });
            std::swap(next, cur);
        }
        s.inv_f[i] = 1.0 / params.f_C(tgrid[i]);
        for (std::size_t j = 0; j < M; ++j) {
            s.values[i * M + j] = next[j];
            s.continuation[i * M + j] = cont[j];
            s.stop[i * M + j] = cont[j] >= s.inv_f[i] * (1.0 - cfg.match_tol);
        }
        if (s.stop[i * M + M - 1])
            throw CoverageError("stopping region reaches the top of the capacity grid at t=" +
                                std::to_string(tgrid[i]));
    }
    return s;
}

/// Per knot: the largest stopping capacity, refined to the crossing of
/// continuation - 1/f_C between the last stopping node and the next one.
inline BoundaryCurve extract_boundary(const ValueSurface& s, const OracleConfig& cfg = {}) {
    BoundaryCurve curve(s.tgrid, BoundaryMethod::StoppingOracle);
    const std::size_t N = s.tgrid.steps(), M = s.n_y();
    for (std::size_t i = 0; i < N; ++i) {
        std::size_t last = M;
        for (std::size_t j = 0; j < M; ++j)
            if (s.stop[i * M + j]) last = j;
        if (last == M) {
            curve.values[i] = 0.0;
            curve.flagged[i] = true;
            continue;
        }
        const double d0 = s.continuation[i * M + last] - s.inv_f[i];
        const double d1 = s.continuation[i * M + last + 1] - s.inv_f[i];
        double w = (d0 > d1) ? d0 / (d0 - d1) : 0.0;
        w = std::clamp(w, 0.0, 1.0);
        const double x = std::log(s.ygrid[last]) + w * (std::log(s.ygrid[last + 1]) - std::log(s.ygrid[last]));
        double y = std::exp(x);
        if (cfg.continuity_correction) y *= std::exp(-kBgkBeta * s.sigma[i] * std::sqrt(s.sub_dt[i]));
        curve.values[i] = y;
    }
    curve.values[N] = 0.0;
    return curve;
}

/// True when every stop slice is a down-set in y.
inline bool stop_sets_are_down_sets(const ValueSurface& s) {
    const std::size_t M = s.n_y();
    for (std::size_t i = 0; i < s.tgrid.size(); ++i) {
        bool seen_continue = false;
        for (std::size_t j = 0; j < M; ++j) {
            if (!s.stop[i * M + j])
                seen_continue = true;
            else if (seen_continue)
                return false;
        }
    }
    return true;
}

inline void write_value_surface_csv(const ValueSurface& s, std::ostream& os) {
    os << "t,y,v,stop\n";
    os.precision(17);
    for (std::size_t i = 0; i < s.tgrid.size(); ++i)
        for (std::size_t j = 0; j < s.n_y(); ++j)
            os << s.tgrid[i] << ',' << s.ygrid[j] << ',' << s.v(i, j) << ',' << (s.stopped(i, j) ? 1 : 0) << '\n';
}

struct CrossValidationReport {
    double sup_rel_early = 0.0;  ///< max relative difference on t <= 0.9 T
    double sup_abs_late = 0.0;   ///< max absolute difference on t > 0.9 T
    std::size_t worst_early = 0;
    std::size_t worst_late = 0;
    double rel_tol = 0.05;
    double abs_tol = 0.02;
    bool pass = false;
};

inline CrossValidationReport cross_validate(const BoundaryCurve& repr, const BoundaryCurve& oracle,
                                            double rel_tol = 0.05, double abs_tol = 0.02) {
    if (!(repr.grid == oracle.grid)) throw DomainError("cross-validation needs identical time grids");
    CrossValidationReport r;
    r.rel_tol = rel_tol;
    r.abs_tol = abs_tol;
    const double cut = 0.9 * repr.grid.horizon();
    for (std::size_t i = 0; i < repr.size(); ++i) {
        const double diff = std::abs(repr.values[i] - oracle.values[i]);
        if (repr.grid[i] <= cut) {
            const double ref = std::abs(oracle.values[i]);
            const double rel = ref > 0.0 ? diff / ref : (diff > 0.0 ? 1.0 : 0.0);
            if (rel > r.sup_rel_early) {
                r.sup_rel_early = rel;
                r.worst_early = i;
            }
        } else if (diff > r.sup_abs_late) {
            r.sup_abs_late = diff;
            r.worst_late = i;
        }
    }
    r.pass = r.sup_rel_early <= rel_tol && r.sup_abs_late <= abs_tol;
    return r;
}

}  // namespace basecap
