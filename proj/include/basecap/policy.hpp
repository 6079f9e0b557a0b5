#pragma once

// Investment policies on a simulated ensemble: the base-capacity tracking
// (reflection) policy and a few foils, the net-profit functional, the
// supergradient and a Monte Carlo check of the first-order conditions.
//
// Conventions on the grid. U = y + nu_bar so that C = C0 * U. Knot values
// are post-investment. Within cell k the barrier is l_k (right-continuous,
// piecewise constant) and the reflection is continuous: U rises to
// l_k / min_cell C0, using the ensemble's exact bridge minima. The investment
// made inside the cell is dnu = (l_k / f_C) d log U; its timing comes from the
// first-passage law of the Brownian bridge between the cell endpoints. Time
// integrals use the trapezoid rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "basecap/boundary.hpp"
#include "basecap/errors.hpp"
#include "basecap/model.hpp"
#include "basecap/parallel.hpp"
#include "basecap/paths.hpp"
#include "basecap/rng.hpp"

namespace basecap {

struct TrackBoundary {
    BoundaryCurve curve;
};
struct TrackConstant {
    double a;
};
struct NoInvest {};
struct ScaledBoundary {
    BoundaryCurve curve;
    double factor;
};
struct LumpAtZero {
    double amount;
};

using InvestmentPolicy = std::variant<TrackBoundary, TrackConstant, NoInvest, ScaledBoundary, LumpAtZero>;

inline std::string policy_name(const InvestmentPolicy& pol) {
    struct Namer {
        std::string operator()(const TrackBoundary&) const { return "track_boundary"; }
        std::string operator()(const TrackConstant&) const { return "track_constant"; }
        std::string operator()(const NoInvest&) const { return "no_invest"; }
        std::string operator()(const ScaledBoundary& s) const {
            std::string f = std::to_string(s.factor);
            f.erase(f.find_last_not_of('0') + 1);
            if (!f.empty() && f.back() == '.') f.pop_back();
            return "scaled_boundary_x" + f;
        }
        std::string operator()(const LumpAtZero&) const { return "lump_at_zero"; }
    };
    return std::visit(Namer{}, pol);
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};

inline MonteCarloEstimate summarize(std::span<const double> xs) {
    MonteCarloEstimate e;
    e.n = xs.size();
    if (e.n == 0) return e;
    e.mean = pairwise_sum(xs) / static_cast<double>(e.n);
    if (e.n > 1) {
        std::vector<double> sq(e.n);
        for (std::size_t i = 0; i < e.n; ++i) sq[i] = (xs[i] - e.mean) * (xs[i] - e.mean);
        e.stderr_ = std::sqrt(pairwise_sum(sq) / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
    }
    return e;
}

struct ControlledPath {
    std::vector<double> capacity;  ///< C(t_i) after any investment at t_i
    std::vector<double> nu_bar;
    std::vector<double> nu;        ///< cumulative investment in capacity units
};

namespace detail {

inline constexpr std::uint32_t kArgminStream = 2;

/// Barrier levels l(t_i) per knot, or nothing for policies that never track.
inline std::optional<std::vector<double>> barrier_levels(const InvestmentPolicy& pol, const TimeGrid& grid) {
    auto from_curve = [&](const BoundaryCurve& c, double factor) {
        if (!(c.grid == grid)) throw DomainError("policy boundary grid differs from the ensemble grid");
        std::vector<double> l(c.values);
        for (auto& v : l) v *= factor;
        return l;
    };
    if (const auto* tb = std::get_if<TrackBoundary>(&pol)) return from_curve(tb->curve, 1.0);
    if (const auto* sb = std::get_if<ScaledBoundary>(&pol)) {
        if (!(sb->factor > 0.0)) throw DomainError("scaled boundary factor must be > 0");
        return from_curve(sb->curve, sb->factor);
    }
    if (const auto* tc = std::get_if<TrackConstant>(&pol)) {
        if (!(tc->a >= 0.0)) throw DomainError("constant barrier must be >= 0");
        return std::vector<double>(grid.size(), tc->a);
    }
    return std::nullopt;
}

inline double lump_amount(const InvestmentPolicy& pol) {
    if (const auto* lz = std::get_if<LumpAtZero>(&pol)) {
        if (!(lz->amount >= 0.0)) throw DomainError("lump amount must be >= 0");
        return lz->amount;
    }
    return 0.0;
}

/// Inverse Gaussian draw (Michael, Schucany and Haas) from a normal and a uniform.
inline double inverse_gaussian(double mean, double shape, double z, double u) {
    const double y = z * z;
    const double my = mean * y;
    const double x = mean + mean * my / (2.0 * shape) - mean / (2.0 * shape) * std::sqrt(4.0 * mean * shape * y + my * my);
    return u <= mean / (mean + x) ? x : mean * mean / x;
}

/// First-passage time (offset from the cell start) of a Brownian bridge from
/// x0 to x1, with variance `var` over a cell of length dt, to a level z below
/// x0, given that it gets there. With r = theta / (dt - theta), r is inverse
/// Gaussian with mean (x0-z)/|x1-z| and shape (x0-z)^2 / var. At the bridge
/// minimum this is the time of the minimum.
inline double first_passage_time(double x0, double x1, double z_level, double var, double dt, double z, double u) {
    const double A = x0 - z_level, B = std::abs(x1 - z_level);
    if (!(A > 0.0)) return 0.0;
    if (!(var > 0.0)) return x1 < x0 ? dt * std::min(1.0, A / (x0 - x1)) : dt;
    if (!(B > 0.0)) return dt;
    const double r = inverse_gaussian(A / B, A * A / var, z, u);
    return dt * r / (1.0 + r);
}

/// An investment. In-cell reflections spread dnu over the levels the running
/// minimum of log C0 sweeps; (time, c0) is the first passage to one level drawn
/// uniformly from that range, which makes D(time) dnu and phi(time) dnu
/// unbiased one-point estimates of the integrals over the sweep. The hit_*
/// fields describe the first touch of the barrier, a stopping time.
struct Event {
    double time;
    double discount;
    double dnu;
    std::size_t cell;  ///< cell index for in-cell events; knot index otherwise
    bool in_cell;
    double c0 = 1.0;
    double hit_time = 0.0;
    double hit_discount = 1.0;
    double hit_c0 = 1.0;
};

/// Deterministic grid data shared by all paths.
struct GridData {
    std::vector<double> discount;  ///< exp(-int_0^{t_k} mu_F)
    std::vector<double> f;         ///< f_C(t_k)
    std::vector<double> mu_F;      ///< mu_F(t_k)
    std::vector<double> var;       ///< int over cell k of sigma^2

    GridData(const ModelParams& params, const TimeGrid& g)
        : discount(g.size()), f(g.size()), mu_F(g.size()), var(g.steps()) {
        for (std::size_t k = 0; k < g.size(); ++k) {
            discount[k] = std::exp(-params.mu_F.integral(0.0, g[k]));
            f[k] = params.f_C(g[k]);
            mu_F[k] = params.mu_F(g[k]);
        }
        for (std::size_t k = 0; k < g.steps(); ++k)
            var[k] = params.sigma_C.integral_of(g[k], g[k + 1], [](double s) { return s * s; });
    }
};

/// Forward reflection on one path. Fills U after the in-cell reflection of the
/// previous cell (u_pre) and after the knot jump (u_post).
struct PathTrace {
    std::vector<double> u_pre, u_post;
    std::vector<Event> events;

    void reset(std::size_t n) {
        u_pre.assign(n, 0.0);
        u_post.assign(n, 0.0);
        events.clear();
    }
};

inline void trace_path(const std::optional<std::vector<double>>& levels, double lump, double y0,
                       const PathEnsemble& ens, std::size_t p, const GridData& gd, const Philox4x32& rng,
                       PathTrace& tr) {
    const TimeGrid& g = ens.grid();
    const std::size_t N = g.steps();
    const auto c0 = ens.path(p);
    const auto mins = ens.cell_minima(p);
    tr.reset(N + 1);

    double U = y0;
    if (lump > 0.0) {
        U += lump * gd.f[0];
        tr.events.push_back({0.0, 1.0, lump, 0, false});
    }
    if (levels && (*levels)[0] > U) {
        tr.events.push_back({0.0, 1.0, ((*levels)[0] - U) / gd.f[0], 0, false});
        U = (*levels)[0];
    }
    tr.u_pre[0] = U;
    tr.u_post[0] = U;
    for (std::size_t k = 0; k < N; ++k) {
        if (levels) {
            const double lk = (*levels)[k];
            const double reach = lk / mins[k];
            if (reach > U) {
                const auto ks = static_cast<std::uint32_t>(k);
                const auto pp = static_cast<std::uint32_t>(p);
                const double x0 = std::log(c0[k]), x1 = std::log(c0[k + 1]), xm = std::log(mins[k]);
                const double top = std::min(x0, std::log(lk / U));  // barrier level of log C0
                const auto u01 = rng.uniforms(pp, ks, 1);
                const auto u23 = rng.uniforms(pp, ks, 3);
                const double level = top - u01[1] * (top - xm);
                const double t_hit =
                    first_passage_time(x0, x1, top, gd.var[k], g.dt(k), rng.normal(pp, ks, 0), u01[0]);
                const double t_lvl =
                    first_passage_time(x0, x1, level, gd.var[k], g.dt(k), rng.normal(pp, ks, 2), u23[0]);
                Event ev{g[k] + t_lvl, gd.discount[k] * std::exp(-gd.mu_F[k] * t_lvl),
                         lk / gd.f[k] * std::log(reach / U), k, true};
                ev.c0 = std::exp(level);
                ev.hit_time = g[k] + t_hit;
                ev.hit_discount = gd.discount[k] * std::exp(-gd.mu_F[k] * t_hit);
                ev.hit_c0 = std::exp(top);
                tr.events.push_back(ev);
                U = reach;
            }
        }
        tr.u_pre[k + 1] = U;
        // Investment at T itself lies outside [0, T) and is never made.
        if (levels && k + 1 < N) {
            const double point = (*levels)[k + 1] / c0[k + 1];
            if (point > U) {
                tr.events.push_back({g[k + 1], gd.discount[k + 1], (point - U) * c0[k + 1] / gd.f[k + 1], k + 1, false});
                U = point;
            }
        }
        tr.u_post[k + 1] = U;
    }
}

/// Per-path statistics from one forward and one backward pass.
struct PathStats {
    double profit = 0.0;
    double flat_off = 0.0;
    bool has_hit = false;
    double hit_phi = 0.0;
};

class PathAnalyzer {
public:
    PathAnalyzer(const ModelParams& params, const ProductionFunction& pf, const PathEnsemble& ens)
        : pf_(pf), ens_(ens), gd_(params, ens.grid()), rng_(ens.seed(), kArgminStream) {}

    /// Runs the path; `phi_at` receives phi(t_i) for the requested knots.
    PathStats run(const std::optional<std::vector<double>>& levels, double lump, double y0, std::size_t p,
                  std::span<const std::size_t> probes, std::span<double> phi_at) {
        trace_path(levels, lump, y0, ens_, p, gd_, rng_, tr_);
        const TimeGrid& g = ens_.grid();
        const std::size_t N = g.steps();
        const auto c0 = ens_.path(p);
        const auto mins = ens_.cell_minima(p);
        PathStats s;

        // Running integrals I_k = int_{t_k}^T D C0 R_c(C) ds, trapezoid per cell.
        integral_.assign(N + 1, 0.0);
        double revenue = 0.0;
        for (std::size_t k = N; k-- > 0;) {
            const double cl = c0[k] * tr_.u_post[k], cr = c0[k + 1] * tr_.u_pre[k + 1];
            const double h = 0.5 * g.dt(k);
            revenue += h * (gd_.discount[k] * pf_.revenue(cl) + gd_.discount[k + 1] * pf_.revenue(cr));
            integral_[k] = integral_[k + 1] + h * (gd_.discount[k] * c0[k] * pf_.marginal_unchecked(cl) +
                                                   gd_.discount[k + 1] * c0[k + 1] * pf_.marginal_unchecked(cr));
        }
        double cost = 0.0;
        for (const Event& e : tr_.events) cost += e.discount * e.dnu;
        s.profit = revenue - cost;

        auto phi_knot = [&](std::size_t k) { return gd_.f[k] / c0[k] * integral_[k] - gd_.discount[k]; };
        // phi at an in-cell time where C0 = c0_at and the capacity sits on the barrier.
        auto phi_in_cell = [&](std::size_t k, double time, double disc, double c0_at) {
            const double barrier = mins[k] * tr_.u_pre[k + 1];
            const double h = g[k + 1] - time;
            const double piece = 0.5 * h *
                                 (disc * c0_at * pf_.marginal_unchecked(barrier) +
                                  gd_.discount[k + 1] * c0[k + 1] * pf_.marginal_unchecked(c0[k + 1] * tr_.u_pre[k + 1]));
            return gd_.f[k] / c0_at * (piece + integral_[k + 1]) - disc;
        };
        auto phi_spread = [&](const Event& e) {
            return e.in_cell ? phi_in_cell(e.cell, e.time, e.discount, e.c0) : phi_knot(e.cell);
        };
        auto phi_hit = [&](const Event& e) {
            return e.in_cell ? phi_in_cell(e.cell, e.hit_time, e.hit_discount, e.hit_c0) : phi_knot(e.cell);
        };
        for (std::size_t q = 0; q < probes.size(); ++q) phi_at[q] = phi_knot(probes[q]);
        for (const Event& e : tr_.events) s.flat_off += phi_spread(e) * e.dnu;
        if (!tr_.events.empty()) {
            s.has_hit = true;
            s.hit_phi = phi_hit(tr_.events.front());
        }
        return s;
    }

    const PathTrace& trace() const { return tr_; }

private:
    const ProductionFunction& pf_;
    const PathEnsemble& ens_;
    GridData gd_;
    Philox4x32 rng_;
    PathTrace tr_;
    std::vector<double> integral_;
};

inline void require_original(const PathEnsemble& ens) {
    if (ens.measure() != Measure::Original) throw DomainError("policy evaluation needs an original-measure ensemble");
}

}  // namespace detail

/// Controlled paths for every ensemble path.
inline std::vector<ControlledPath> track(const InvestmentPolicy& pol, const PathEnsemble& ens,
                                         const ModelParams& params, double y0) {
    if (!(y0 > 0.0)) throw DomainError("y0 must be > 0");
    const auto levels = detail::barrier_levels(pol, ens.grid());
    const double lump = detail::lump_amount(pol);
    const detail::GridData gd(params, ens.grid());
    const Philox4x32 rng(ens.seed(), detail::kArgminStream);
    const std::size_t n1 = ens.grid().size();
    std::vector<ControlledPath> out(ens.n_paths());
    parallel_chunks(ens.n_paths(), [&](std::size_t b, std::size_t e) {
        detail::PathTrace tr;
        for (std::size_t p = b; p < e; ++p) {
            detail::trace_path(levels, lump, y0, ens, p, gd, rng, tr);
            const auto c0 = ens.path(p);
            ControlledPath& cp = out[p];
            cp.capacity.resize(n1);
            cp.nu_bar.resize(n1);
            cp.nu.assign(n1, 0.0);
            for (std::size_t k = 0; k < n1; ++k) {
                cp.capacity[k] = c0[k] * tr.u_post[k];
                cp.nu_bar[k] = tr.u_post[k] - y0;
            }
            for (const auto& ev : tr.events) {
                const std::size_t from = ev.in_cell ? ev.cell + 1 : ev.cell;
                for (std::size_t k = from; k < n1; ++k) cp.nu[k] += ev.dnu;
            }
        }
    });
    return out;
}

/// Per-path profit samples, for paired comparisons under common random numbers.
inline std::vector<double> profit_samples(const InvestmentPolicy& pol, const ModelParams& params,
                                          const ProductionFunction& pf, const PathEnsemble& ens, double y0) {
    detail::require_original(ens);
    if (!(y0 > 0.0)) throw DomainError("y0 must be > 0");
    const auto levels = detail::barrier_levels(pol, ens.grid());
    const double lump = detail::lump_amount(pol);
    std::vector<double> j(ens.n_paths());
    parallel_chunks(ens.n_paths(), [&](std::size_t b, std::size_t e) {
        detail::PathAnalyzer an(params, pf, ens);
        for (std::size_t p = b; p < e; ++p) j[p] = an.run(levels, lump, y0, p, {}, {}).profit;
    });
    return j;
}

inline MonteCarloEstimate evaluate_profit(const InvestmentPolicy& pol, const ModelParams& params,
                                          const ProductionFunction& pf, const PathEnsemble& ens, double y0) {
    return summarize(profit_samples(pol, params, pf, ens, y0));
}

/// Supergradient at the deterministic probe time t_i.
inline MonteCarloEstimate supergradient(const InvestmentPolicy& pol, std::size_t i, const ModelParams& params,
                                        const ProductionFunction& pf, const PathEnsemble& ens, double y0) {
    detail::require_original(ens);
    if (i >= ens.grid().steps()) throw DomainError("supergradient probe must be before T");
    const auto levels = detail::barrier_levels(pol, ens.grid());
    const double lump = detail::lump_amount(pol);
    std::vector<double> phi(ens.n_paths());
    const std::size_t probe[1] = {i};
    parallel_chunks(ens.n_paths(), [&](std::size_t b, std::size_t e) {
        detail::PathAnalyzer an(params, pf, ens);
        for (std::size_t p = b; p < e; ++p) an.run(levels, lump, y0, p, probe, std::span<double>(&phi[p], 1));
    });
    return summarize(phi);
}

struct ProbeResult {
    std::string name;
    MonteCarloEstimate estimate;
    bool pass = false;
};

struct FocReport {
    std::vector<ProbeResult> deterministic;  ///< nonpositive within band
    ProbeResult hitting;                     ///< zero within band; n = number of investing paths
    ProbeResult flat_off;                    ///< zero within band
    bool pass = false;
};

struct FocConfig {
    std::size_t n_probes = 10;
    double band = 2.0;
};

/// Probe knots evenly spread over [0, t_{N-1}].
inline std::vector<std::size_t> probe_knots(const TimeGrid& g, std::size_t n_probes) {
    std::vector<std::size_t> out;
    const std::size_t last = g.steps() - 1;
    if (n_probes <= 1 || last == 0) return {0};
    for (std::size_t q = 0; q < n_probes; ++q) {
        const std::size_t k = (q * last + (n_probes - 1) / 2) / (n_probes - 1);
        if (out.empty() || out.back() != k) out.push_back(k);
    }
    return out;
}

inline FocReport verify_foc(const InvestmentPolicy& pol, const ModelParams& params, const ProductionFunction& pf,
                            const PathEnsemble& ens, double y0, const FocConfig& cfg = {}) {
    detail::require_original(ens);
    const auto levels = detail::barrier_levels(pol, ens.grid());
    const double lump = detail::lump_amount(pol);
    const auto probes = probe_knots(ens.grid(), cfg.n_probes);
    const std::size_t n = ens.n_paths(), np = probes.size();
    std::vector<double> phi(n * np), flat(n), hit(n);
    std::vector<char> has_hit(n);
    parallel_chunks(n, [&](std::size_t b, std::size_t e) {
        detail::PathAnalyzer an(params, pf, ens);
        for (std::size_t p = b; p < e; ++p) {
            const auto s = an.run(levels, lump, y0, p, probes, std::span<double>(phi.data() + p * np, np));
            flat[p] = s.flat_off;
            hit[p] = s.hit_phi;
            has_hit[p] = s.has_hit;
        }
    });
    FocReport r;
    std::vector<double> column(n);
    for (std::size_t q = 0; q < np; ++q) {
        for (std::size_t p = 0; p < n; ++p) column[p] = phi[p * np + q];
        ProbeResult pr;
        pr.name = "t=" + std::to_string(ens.grid()[probes[q]]);
        pr.estimate = summarize(column);
        pr.pass = pr.estimate.mean <= cfg.band * pr.estimate.stderr_;
        r.deterministic.push_back(pr);
    }
    std::vector<double> hits;
    for (std::size_t p = 0; p < n; ++p)
        if (has_hit[p]) hits.push_back(hit[p]);
    r.hitting.name = "hitting";
    r.hitting.estimate = summarize(hits);
    r.hitting.pass = hits.empty() || std::abs(r.hitting.estimate.mean) <= cfg.band * r.hitting.estimate.stderr_;
    r.flat_off.name = "flat_off";
    r.flat_off.estimate = summarize(flat);
    r.flat_off.pass = std::abs(r.flat_off.estimate.mean) <= cfg.band * r.flat_off.estimate.stderr_;
    r.pass = r.hitting.pass && r.flat_off.pass &&
             std::all_of(r.deterministic.begin(), r.deterministic.end(), [](const ProbeResult& x) { return x.pass; });
    return r;
}

inline void write_foc_csv(const FocReport& r, std::ostream& os) {
    os << "probe,estimate,stderr,verdict\n";
    os.precision(17);
    auto row = [&](const ProbeResult& p) {
        os << p.name << ',' << p.estimate.mean << ',' << p.estimate.stderr_ << ',' << (p.pass ? "PASS" : "FAIL") << '\n';
    };
    for (const auto& p : r.deterministic) row(p);
    row(r.hitting);
    row(r.flat_off);
}

struct DominanceResult {
    std::string alternative;
    MonteCarloEstimate difference;  ///< J(reference) - J(alternative), paired
    bool pass = false;
};

/// Paired test J(reference) >= J(alt) - band * stderr(difference).
inline std::vector<DominanceResult> dominance(const InvestmentPolicy& reference,
                                              const std::vector<InvestmentPolicy>& alternatives,
                                              const ModelParams& params, const ProductionFunction& pf,
                                              const PathEnsemble& ens, double y0, double band = 2.0) {
    const auto base = profit_samples(reference, params, pf, ens, y0);
    std::vector<DominanceResult> out;
    for (const auto& alt : alternatives) {
        auto other = profit_samples(alt, params, pf, ens, y0);
        for (std::size_t p = 0; p < other.size(); ++p) other[p] = base[p] - other[p];
        DominanceResult d;
        d.alternative = policy_name(alt);
        d.difference = summarize(other);
        d.pass = d.difference.mean >= -band * d.difference.stderr_;
        out.push_back(d);
    }
    return out;
}

}  // namespace basecap
