#pragma once

// Free boundary (base capacity) of the finite-horizon investment problem.
//
// The finite-horizon curve solves, knot by knot from T backwards,
//
//   E~[ int_0^{T-t} exp(-int_t^{t+v} mu_bar) R_c( sup_{u'<=v} yhat(t+u') C0(t+v)/C0(t+u') ) dv ] = 1/f_C(t)
//
// under the tilted measure, with mu_bar = mu_C + mu_F. Between knots the
// boundary is piecewise constant and right-continuous, so the supremum over a
// cell is yhat(cell) / min_cell C0, which the ensemble samples exactly from the
// Brownian bridge. The v-integral uses the trapezoid rule on the ensemble grid.
//
// The closed forms for T = infinity and the analytic upper bound y*(t) live
// here as well.

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "basecap/errors.hpp"
#include "basecap/model.hpp"
#include "basecap/parallel.hpp"
#include "basecap/paths.hpp"

namespace basecap {

enum class BoundaryMethod { Representation, StoppingOracle, ClosedFormConstant, UpperBound };

inline const char* to_string(BoundaryMethod m) {
    switch (m) {
        case BoundaryMethod::Representation: return "representation";
        case BoundaryMethod::StoppingOracle: return "stopping_oracle";
        case BoundaryMethod::ClosedFormConstant: return "closed_form";
        case BoundaryMethod::UpperBound: return "upper_bound";
    }
    return "?";
}

struct BoundaryCurve {
    TimeGrid grid;
    std::vector<double> values;
    BoundaryMethod method = BoundaryMethod::Representation;
    /// Monte Carlo standard error of each root (0 for deterministic methods).
    std::vector<double> stderr_;
    /// Residual of the defining equation at the returned value, and its standard error.
    std::vector<double> residual;
    std::vector<double> residual_stderr;
    /// Knots where the value is a fallback (oracle: empty stopping slice).
    std::vector<bool> flagged;

    explicit BoundaryCurve(TimeGrid g, BoundaryMethod m = BoundaryMethod::Representation)
        : grid(std::move(g)), values(grid.size(), 0.0), method(m), stderr_(grid.size(), 0.0),
          residual(grid.size(), 0.0), residual_stderr(grid.size(), 0.0), flagged(grid.size(), false) {}

    std::size_t size() const { return values.size(); }
};

struct ResidualEstimate {
    double value;
    double stderr_;
};

class NonIntegrableError : public DomainError {
public:
    using DomainError::DomainError;
};

// ---------------------------------------------------------------------------
// Analytic curves

/// y*(t) = [f_C(t) int_0^{T-t} exp(-int_t^{t+v} lambda) dv]^{1/(1-alpha)},
/// lambda = mu_F + alpha mu_C + alpha(1-alpha) sigma_C^2 / 2. Integrated exactly
/// over the pieces of the coefficient functions.
inline double upper_bound_curve(const ModelParams& params, const ProductionFunction& pf, double t) {
    if (!pf.is_cobb_douglas()) throw DomainError("upper bound requires a Cobb-Douglas production function");
    const double alpha = pf.alpha();
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha outside (0,1)");
    if (!(t >= 0.0) || t > params.horizon) throw DomainError("time outside [0, T]");
    auto lambda = [&](double s) {
        const double sig = params.sigma_C(s);
        return params.mu_F(s) + alpha * params.mu_C(s) + 0.5 * alpha * (1.0 - alpha) * sig * sig;
    };
    std::vector<double> breaks = merged_breakpoints({&params.mu_F, &params.mu_C, &params.sigma_C});
    const double end = params.horizon;
    double integral = 0.0;
    double accumulated = 0.0;  // int_t^{left} lambda
    double left = t;
    auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    while (left < end) {
        const double right = (it == breaks.end()) ? end : std::min(end, *it);
        const double lam = lambda(left);
        if (!(lam > 0.0)) throw DomainError("upper bound needs mu_F + alpha mu_C + alpha(1-alpha)sigma^2/2 > 0");
        const double len = right - left;
        integral += std::exp(-accumulated) * (-std::expm1(-lam * len)) / lam;
        accumulated += lam * len;
        left = right;
        if (it != breaks.end()) ++it;
    }
    return std::pow(params.f_C(t) * integral, 1.0 / (1.0 - alpha));
}

inline BoundaryCurve upper_bound_on_grid(const ModelParams& params, const ProductionFunction& pf,
                                         const TimeGrid& grid) {
    BoundaryCurve curve(grid, BoundaryMethod::UpperBound);
    for (std::size_t i = 0; i < grid.size(); ++i) curve.values[i] = upper_bound_curve(params, pf, grid[i]);
    curve.values.back() = 0.0;
    return curve;
}

struct ClosedFormBoundary {
    double a;           ///< from the root-denominator form
    double a_identity;  ///< from a^{alpha-1} = mu_F (1+b+)(alpha+b-)/(b+ b-)
    BetaRoots beta;
};

namespace detail {
inline CoefficientSnapshot constant_snapshot(const ModelParams& params, const char* what) {
    if (!params.constant_coefficients()) throw DomainError(std::string(what) + " requires constant coefficients");
    return {params.mu_C(0.0), params.sigma_C(0.0), params.f_C(0.0), params.mu_F(0.0)};
}
}  // namespace detail

/// Infinite-horizon Cobb-Douglas boundary with f_C = 1, computed by both
/// algebraic routes; they must agree to 1e-12 relative.
inline ClosedFormBoundary closed_form_boundary_infinite(const ModelParams& params, double alpha) {
    const auto c = detail::constant_snapshot(params, "closed-form boundary");
    if (c.f_C != 1.0) throw DomainError("closed-form boundary is stated for f_C = 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha outside (0,1)");
    const BetaRoots b = beta_roots(c.mu_C, c.sigma_C, c.mu_F);
    if (!(-b.beta_minus > alpha))
        throw NonIntegrableError("closed form needs -beta_minus > alpha (integrable marginal revenue)");
    const double s2 = c.sigma_C * c.sigma_C;
    const double denom = 2.0 * c.mu_F - s2 * b.beta_minus - alpha * s2 * (1.0 + b.beta_plus);
    const double a = std::pow(2.0 / denom, 1.0 / (1.0 - alpha));
    const double k = c.mu_F * (1.0 + b.beta_plus) * (alpha + b.beta_minus) / (b.beta_plus * b.beta_minus);
    const double a_id = std::pow(k, 1.0 / (alpha - 1.0));
    if (!(std::abs(a - a_id) <= 1e-12 * std::abs(a)))
        throw NumericalError("closed-form routes disagree: " + std::to_string(a) + " vs " + std::to_string(a_id));
    return {a, a_id, b};
}

namespace detail {

/// Integral of g over [0, inf) for integrands decaying at least exponentially,
/// on geometrically growing panels until a panel contributes < rel_tol.
template <class G>
double integrate_half_line(G g, double rel_tol) {
    using boost::math::quadrature::gauss_kronrod;
    double total = 0.0;
    double left = 0.0;
    double width = 1.0;
    for (int panel = 0; panel < 200; ++panel) {
        double err = 0.0;
        const double piece = gauss_kronrod<double, 31>::integrate(g, left, left + width, 20, 1e-13, &err);
        if (!std::isfinite(piece)) throw NumericalError("non-finite quadrature panel");
        total += piece;
        left += width;
        if (panel > 3 && std::abs(piece) < rel_tol * std::abs(total)) return total;
        width *= 2.0;
    }
    throw NonIntegrableError("half-line quadrature did not converge; marginal revenue not integrable");
}

}  // namespace detail

struct GeneralRBoundary {
    double a;
    double rate;  ///< r = -beta_minus, rate of the exponential law of the running-minimum depth
    double target;
};

/// Q(a) = int_0^inf e^x R_c(a e^x) r e^{-r x} dx - mu_F (1 + b+)/b+, r = -b-.
inline double general_R_equation(const ModelParams& params, const ProductionFunction& pf, double a) {
    const auto c = detail::constant_snapshot(params, "general-R boundary");
    const BetaRoots b = beta_roots(c.mu_C, c.sigma_C, c.mu_F);
    const double r = -b.beta_minus;
    // s = r x makes the exponential weight explicit: int_0^inf e^{s/r} R_c(a e^{s/r}) e^{-s} ds.
    auto g = [&](double s) {
        const double x = s / r;
        return std::exp(x - s) * pf.marginal_unchecked(a * std::exp(x));
    };
    const double integral = detail::integrate_half_line(g, 1e-13);
    return integral - c.mu_F * (1.0 + b.beta_plus) / b.beta_plus;
}

/// Root of general_R_equation by bisection in log a (Q is strictly decreasing in a).
inline GeneralRBoundary general_R_boundary_infinite(const ModelParams& params, const ProductionFunction& pf) {
    const auto c = detail::constant_snapshot(params, "general-R boundary");
    if (c.f_C != 1.0) throw DomainError("general-R boundary is stated for f_C = 1");
    const BetaRoots b = beta_roots(c.mu_C, c.sigma_C, c.mu_F);
    const double r = -b.beta_minus;
    if (pf.is_cobb_douglas()) {
        if (!(r > pf.alpha()))
            throw NonIntegrableError("non-integrable marginal: need -beta_minus > alpha (got -beta_minus = " +
                                     std::to_string(r) + ")");
    } else {
        // Probe: e^{(1-r)x} R_c(e^x) must be decaying in the far tail.
        const auto tail = [&](double x) { return std::exp((1.0 - r) * x) * pf.marginal_unchecked(std::exp(x)); };
        if (!(tail(40.0) < tail(20.0)))
            throw NonIntegrableError("non-integrable marginal: e^x R_c(e^x) e^{-r x} does not decay");
    }
    const double target = c.mu_F * (1.0 + b.beta_plus) / b.beta_plus;
    auto Q = [&](double a) { return general_R_equation(params, pf, a); };

    double lo = 1.0, hi = 1.0;
    int guard = 0;
    while (Q(lo) <= 0.0) {
        lo /= 10.0;
        if (++guard > 60) throw SolverError("general-R boundary: no positive Q found below a = 1e-60");
    }
    guard = 0;
    while (Q(hi) >= 0.0) {
        hi *= 10.0;
        if (++guard > 60) throw SolverError("general-R boundary: no negative Q found above a = 1e60");
    }
    for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-14; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (Q(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return {std::sqrt(lo * hi), r, target};
}

// ---------------------------------------------------------------------------
// Finite-horizon representation solver

struct RootFindConfig {
    double bracket_inflation = 1.5;  ///< y_hi = inflation * y*(t)
    double lower_fraction = 1e-10;   ///< y_lo = lower_fraction * y_hi
    double rel_tol = 1e-12;          ///< bisection stops when y_hi / y_lo - 1 < rel_tol
    int max_iter = 200;
};

namespace detail {

/// Per-path data of the discretized integral at one knot.
///
/// For path p and offset m = 1..L (L = N - i) the integrand at v_m is
/// W_m R_c(r_m max(y / q_0, M_m)); M_m (the supremum contributed by solved
/// future knots) is nondecreasing in m, so the knots where the candidate y
/// dominates form a prefix. Cobb-Douglas factorizes R_c, so the prefix and
/// suffix sums are precomputed and a residual costs one binary search per path.
class KnotResidual {
public:
    KnotResidual(const PathEnsemble& ens, const ModelParams& params, const ProductionFunction& pf,
                 const std::vector<double>& future, std::size_t knot, bool stationary)
        : pf_(pf), n_(ens.n_paths()), L_(ens.grid().steps() - knot) {
        const TimeGrid& g = ens.grid();
        const std::size_t N = g.steps();
        inv_fc_ = 1.0 / params.f_C(g[knot]);

        // Trapezoid weights with exact discounting exp(-int mu_bar) at the nodes.
        weights_.assign(L_ + 1, 0.0);
        double disc_log = 0.0;
        for (std::size_t m = 0; m <= L_; ++m) {
            if (m > 0) {
                const double a = g[knot + m - 1], b = g[knot + m];
                disc_log += params.mu_C.integral(a, b) + params.mu_F.integral(a, b);
            }
            const double left = m > 0 ? g.dt(knot + m - 1) : 0.0;
            const double right = m < L_ ? g.dt(knot + m) : 0.0;
            weights_[m] = std::exp(-disc_log) * 0.5 * (left + right);
        }

        cd_ = pf.is_cobb_douglas();
        thr_.resize(n_ * L_);
        inv_q0_.resize(n_);
        suffix_.resize(n_ * (L_ + 1));
        if (cd_)
            prefix_.resize(n_ * (L_ + 1));
        else
            ratio_.resize(n_ * L_);
        const double am1 = cd_ ? pf.alpha() - 1.0 : 0.0;

        parallel_for(n_, [&](std::size_t p) {
            const auto c0 = ens.path(p);
            const auto mins = ens.cell_minima(p);
            const std::size_t base = stationary ? 0 : knot;
            const double anchor = c0[base];
            auto ratio_at = [&](std::size_t m) { return c0[base + m] / anchor; };
            auto cellmin_at = [&](std::size_t j) { return mins[base + j] / anchor; };
            inv_q0_[p] = 1.0 / cellmin_at(0);
            double running = 0.0;  // max over cells 1..m-1 of yhat / q_j
            double* thr = thr_.data() + p * L_;
            for (std::size_t m = 1; m <= L_; ++m) {
                const double rm = ratio_at(m);
                const double point = (knot + m <= N) ? future[knot + m] / rm : 0.0;
                thr[m - 1] = std::max(running, point);
                if (m < L_) running = std::max(running, future[knot + m] / cellmin_at(m));
                if (!cd_) ratio_[p * L_ + m - 1] = rm;
            }
            double* suf = suffix_.data() + p * (L_ + 1);
            suf[L_] = 0.0;
            for (std::size_t m = L_; m >= 1; --m) {
                const double rm = ratio_at(m);
                const double th = thr[m - 1];
                const double term = th > 0.0 ? weights_[m] * pf_.marginal_unchecked(rm * th) : 0.0;
                suf[m - 1] = suf[m] + term;
            }
            if (cd_) {
                double* pre = prefix_.data() + p * (L_ + 1);
                pre[0] = 0.0;
                for (std::size_t m = 1; m <= L_; ++m) pre[m] = pre[m - 1] + weights_[m] * std::pow(ratio_at(m), am1);
            }
        });
        per_path_.resize(n_);
    }

    /// Integral estimate on path p for candidate y.
    double path_value(std::size_t p, double y) const {
        const double yq = y * inv_q0_[p];
        const double* thr = thr_.data() + p * L_;
        // kappa = number of leading offsets where the candidate dominates.
        const std::size_t kappa = static_cast<std::size_t>(std::upper_bound(thr, thr + L_, yq) - thr);
        double v = weights_[0] * pf_.marginal_unchecked(y) + suffix_[p * (L_ + 1) + kappa];
        if (cd_) {
            v += pf_.marginal_unchecked(yq) * prefix_[p * (L_ + 1) + kappa];
        } else {
            const double* r = ratio_.data() + p * L_;
            for (std::size_t m = 1; m <= kappa; ++m) v += weights_[m] * pf_.marginal_unchecked(r[m - 1] * yq);
        }
        return v;
    }

    double mean(double y) {
        parallel_chunks(n_, [&](std::size_t b, std::size_t e) {
            for (std::size_t p = b; p < e; ++p) per_path_[p] = path_value(p, y);
        });
        const double mean = pairwise_sum(per_path_) / static_cast<double>(n_) - inv_fc_;
        if (!std::isfinite(mean)) throw NumericalError("non-finite Monte Carlo residual");
        return mean;
    }

    ResidualEstimate estimate(double y) {
        const double m = mean(y);
        const double mu = m + inv_fc_;
        std::vector<double> sq(n_);
        for (std::size_t p = 0; p < n_; ++p) sq[p] = (per_path_[p] - mu) * (per_path_[p] - mu);
        const double var = n_ > 1 ? pairwise_sum(sq) / static_cast<double>(n_ - 1) : 0.0;
        return {m, std::sqrt(var / static_cast<double>(n_))};
    }

private:
    const ProductionFunction& pf_;
    std::size_t n_;
    std::size_t L_;
    double inv_fc_ = 1.0;
    bool cd_ = false;
    std::vector<double> weights_;
    std::vector<double> thr_;
    std::vector<double> inv_q0_;
    std::vector<double> suffix_;
    std::vector<double> prefix_;
    std::vector<double> ratio_;
    std::vector<double> per_path_;
};

inline bool use_stationary_form(const ModelParams& params, const TimeGrid& grid) {
    return params.constant_coefficients() && grid.is_uniform();
}

inline void check_ensemble(const PathEnsemble& ens, const TimeGrid& grid) {
    if (ens.measure() != Measure::Tilted) throw DomainError("boundary solver needs a tilted-measure ensemble");
    if (!(ens.grid() == grid)) throw DomainError("ensemble grid differs from the boundary grid");
}

}  // namespace detail

/// Residual of the boundary equation at knot time t for candidate y, given
/// solved values at later knots (`future` indexed like the grid; entries at
/// or before t are ignored).
inline ResidualEstimate boundary_residual(double t, double y_candidate, const std::vector<double>& future,
                                          const PathEnsemble& ens, const ModelParams& params,
                                          const ProductionFunction& pf) {
    if (!(y_candidate > 0.0)) throw DomainError("boundary candidate must be > 0");
    const TimeGrid& g = ens.grid();
    const auto it = std::find(g.knots().begin(), g.knots().end(), t);
    if (it == g.knots().end()) throw DomainError("residual time is not a grid knot");
    const auto knot = static_cast<std::size_t>(it - g.knots().begin());
    if (knot == g.steps()) throw DomainError("no residual at the terminal knot");
    if (future.size() != g.size()) throw DomainError("future boundary has the wrong length");
    if (ens.measure() != Measure::Tilted) throw DomainError("boundary residual needs a tilted-measure ensemble");
    detail::KnotResidual kr(ens, params, pf, future, knot, detail::use_stationary_form(params, g));
    return kr.estimate(y_candidate);
}

/// Backward induction over the grid: terminal value 0, then a bisection root
/// per knot on the common tilted ensemble.
inline BoundaryCurve solve_boundary_backward(const ModelParams& params, const ProductionFunction& pf,
                                             const TimeGrid& grid, const PathEnsemble& ens,
                                             const RootFindConfig& cfg = {}) {
    detail::check_ensemble(ens, grid);
    const std::size_t N = grid.steps();
    BoundaryCurve curve(grid, BoundaryMethod::Representation);
    const bool stationary = detail::use_stationary_form(params, grid);
    curve.values[N] = 0.0;

    for (std::size_t i = N; i-- > 0;) {
        detail::KnotResidual kr(ens, params, pf, curve.values, i, stationary);
        double hi = 0.0, lo = 0.0;
        if (pf.is_cobb_douglas()) {
            hi = cfg.bracket_inflation * upper_bound_curve(params, pf, grid[i]);
            lo = cfg.lower_fraction * hi;
            const double r_lo = kr.mean(lo), r_hi = kr.mean(hi);
            if (!(r_lo > 0.0 && r_hi < 0.0)) {
                std::ostringstream msg;
                msg << "bisection bracket failure at knot " << i << " (t=" << grid[i] << "): residual(" << lo
                    << ")=" << r_lo << ", residual(" << hi << ")=" << r_hi;
                throw SolverError(msg.str());
            }
        } else {
            // No analytic bound: expand geometrically from the next knot's value.
            hi = (i + 1 < N) ? 2.0 * curve.values[i + 1] : 1.0;
            int guard = 0;
            while (kr.mean(hi) >= 0.0) {
                hi *= 4.0;
                if (++guard > 80) throw SolverError("no upper bracket at knot " + std::to_string(i));
            }
            lo = hi / 4.0;
            guard = 0;
            while (kr.mean(lo) <= 0.0) {
                lo /= 4.0;
                if (++guard > 80) throw SolverError("no lower bracket at knot " + std::to_string(i));
            }
        }
        for (int it = 0; it < cfg.max_iter && hi / lo - 1.0 > cfg.rel_tol; ++it) {
            const double mid = std::sqrt(lo * hi);
            if (kr.mean(mid) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        const double root = std::sqrt(lo * hi);
        const ResidualEstimate at = kr.estimate(root);
        const double h = 1e-3 * root;
        const double slope = (kr.mean(root + h) - kr.mean(root - h)) / (2.0 * h);
        curve.values[i] = root;
        curve.residual[i] = at.value;
        curve.residual_stderr[i] = at.stderr_;
        curve.stderr_[i] = slope < 0.0 ? at.stderr_ / -slope : 0.0;
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Shape diagnostics

struct ShapeReport {
    bool terminal_zero = false;
    bool interior_positive = false;
    std::size_t monotone_violations = 0;  ///< values[i+1] > values[i] + k * stderr
    std::size_t bound_violations = 0;     ///< values[i] > y*(t_i) + k * stderr
};

inline ShapeReport check_shape(const BoundaryCurve& curve, const ModelParams& params, const ProductionFunction& pf,
                               double k_stderr = 3.0) {
    ShapeReport r;
    const std::size_t N = curve.grid.steps();
    r.terminal_zero = curve.values[N] == 0.0;
    r.interior_positive = std::all_of(curve.values.begin(), curve.values.end() - 1, [](double v) { return v > 0.0; });
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const double tol = k_stderr * std::max(curve.stderr_[i], curve.stderr_[i + 1]);
        if (curve.values[i + 1] > curve.values[i] + tol) ++r.monotone_violations;
    }
    if (pf.is_cobb_douglas()) {
        for (std::size_t i = 0; i < curve.size(); ++i) {
            const double bound = upper_bound_curve(params, pf, curve.grid[i]);
            if (curve.values[i] > bound + k_stderr * curve.stderr_[i]) ++r.bound_violations;
        }
    }
    return r;
}

}  // namespace basecap
