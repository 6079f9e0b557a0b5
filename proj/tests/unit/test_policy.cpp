#include <gtest/gtest.h>

#include <random>

#include "basecap/parallel.hpp"
#include "basecap/policy.hpp"
#include "fixtures.hpp"

using namespace basecap;
using fixtures::reference_params;
using fixtures::rel_err;

namespace {

ModelParams deterministic_params(double mu_C, double horizon) {
    ModelParams p;
    p.mu_C = mu_C;
    p.sigma_C = 0.0;
    p.mu_F = 0.5;
    p.f_C = 1.0;
    p.horizon = horizon;
    return p;
}

/// Post-investment base capacity at every knot, from the running maximum of
/// the barrier over the capacity path's minima.
std::vector<double> reflection_oracle(const std::vector<double>& l, const PathEnsemble& ens, std::size_t p, double y0) {
    const auto c0 = ens.path(p);
    const auto mins = ens.cell_minima(p);
    const std::size_t N = ens.grid().steps();
    std::vector<double> u(N + 1);
    double run = std::max(y0, l[0] / c0[0]);
    u[0] = run;
    for (std::size_t k = 1; k <= N; ++k) {
        run = std::max(run, l[k - 1] / mins[k - 1]);
        if (k < N) run = std::max(run, l[k] / c0[k]);
        u[k] = run;
    }
    return u;
}

}  // namespace

TEST(Track, DeterministicConstantBarrierWithFlatCapacity) {
    const auto p = deterministic_params(0.0, 4.0);
    const auto g = TimeGrid::uniform(4.0, 2000);
    const auto ens = simulate_c0(p, g, 1, 1, Measure::Original);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto cp = track(TrackConstant{0.8}, ens, p, 0.3);
    EXPECT_DOUBLE_EQ(cp[0].capacity.front(), 0.8);
    EXPECT_DOUBLE_EQ(cp[0].capacity.back(), 0.8);
    EXPECT_NEAR(cp[0].nu.back(), 0.5, 1e-15);
    // J = R(0.8) int_0^4 e^{-0.5 t} dt - (0.8 - 0.3); trapezoid bias is O(dt^2).
    const double expected = 2.0 * std::sqrt(0.8) * (1 - std::exp(-2.0)) / 0.5 - 0.5;
    EXPECT_LT(rel_err(evaluate_profit(TrackConstant{0.8}, p, pf, ens, 0.3).mean, expected), 1e-6);
    // Barrier below the initial capacity: nothing happens.
    const auto idle = track(TrackConstant{0.2}, ens, p, 0.3);
    EXPECT_EQ(idle[0].nu.back(), 0.0);
    EXPECT_DOUBLE_EQ(idle[0].capacity.back(), 0.3);
}

TEST(Track, DeterministicDepreciationIsOffsetContinuously) {
    // C0 = e^{-0.2 t}; holding C at a = 0.8 costs a * 0.2 per unit time.
    const auto p = deterministic_params(0.2, 3.0);
    const auto g = TimeGrid::uniform(3.0, 3000);
    const auto ens = simulate_c0(p, g, 1, 1, Measure::Original);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto cp = track(TrackConstant{0.8}, ens, p, 0.8);
    for (double c : cp[0].capacity) EXPECT_NEAR(c, 0.8, 1e-12);
    EXPECT_NEAR(cp[0].nu.back(), 0.8 * 0.2 * 3.0, 1e-9);
    const double A = (1 - std::exp(-1.5)) / 0.5;
    const double expected = 2.0 * std::sqrt(0.8) * A - 0.8 * 0.2 * A;
    EXPECT_LT(rel_err(evaluate_profit(TrackConstant{0.8}, p, pf, ens, 0.8).mean, expected), 1e-5);
}

TEST(Track, CapacityMatchesReflectionOracle) {
    const auto p = reference_params(2.0);
    const auto g = TimeGrid::uniform(2.0, 50);
    const auto ens = simulate_c0(p, g, 300, 17, Measure::Original);
    BoundaryCurve curve(g, BoundaryMethod::UpperBound);
    for (std::size_t k = 0; k < g.steps(); ++k) curve.values[k] = 0.3 * (1 - g[k] / 2.0) + 0.05;
    const double y0 = 0.2;
    const auto cps = track(TrackBoundary{curve}, ens, p, y0);
    for (std::size_t path = 0; path < ens.n_paths(); ++path) {
        const auto u = reflection_oracle(curve.values, ens, path, y0);
        const auto c0 = ens.path(path);
        const auto& cp = cps[path];
        for (std::size_t k = 0; k <= g.steps(); ++k) {
            EXPECT_LT(rel_err(cp.capacity[k], c0[k] * u[k]), 1e-13);
            EXPECT_LT(std::abs(cp.nu_bar[k] - (u[k] - y0)), 1e-13);
            if (k < g.steps()) EXPECT_GE(cp.capacity[k], curve.values[k] * (1 - 1e-13));
            if (k > 0) EXPECT_GE(cp.nu[k], cp.nu[k - 1]);
        }
    }
}

TEST(Profit, NoInvestMatchesClosedForm) {
    const auto p = reference_params(2.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto g = TimeGrid::uniform(2.0, 200);
    const auto ens = simulate_c0(p, g, 40000, 5, Measure::Original);
    // E C0^alpha = e^{-(alpha mu_C + alpha(1-alpha) sigma^2/2) t}; lambda = 1.25.
    const double y0 = 0.4, lam = 1.25;
    const double expected = std::sqrt(y0) / 0.5 * (1 - std::exp(-lam * 2.0)) / lam;
    const auto est = evaluate_profit(NoInvest{}, p, pf, ens, y0);
    EXPECT_LT(std::abs(est.mean - expected), 4 * est.stderr_ + 1e-4) << est.mean << " vs " << expected;
}

TEST(Profit, LumpAtZeroCostsItsAmount) {
    const auto p = deterministic_params(0.0, 1.0);
    const auto g = TimeGrid::uniform(1.0, 1000);
    const auto ens = simulate_c0(p, g, 1, 1, Measure::Original);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const double A = (1 - std::exp(-0.5)) / 0.5;
    const double expected = 2.0 * std::sqrt(1.0) * A - 0.6;
    EXPECT_LT(rel_err(evaluate_profit(LumpAtZero{0.6}, p, pf, ens, 0.4).mean, expected), 1e-6);
}

TEST(Profit, VanishingHorizon) {
    const auto p = reference_params(1e-6);
    const auto g = TimeGrid::uniform(1e-6, 4);
    const auto ens = simulate_c0(p, g, 100, 2, Measure::Original);
    const auto est = evaluate_profit(TrackConstant{0.3}, p, ProductionFunction::cobb_douglas(0.5), ens, 0.5);
    EXPECT_LT(std::abs(est.mean), 2e-6);
}

TEST(Supergradient, RejectsTerminalProbeAndWrongMeasure) {
    const auto p = reference_params(1.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto g = TimeGrid::uniform(1.0, 10);
    const auto ens = simulate_c0(p, g, 10, 2, Measure::Original);
    EXPECT_NO_THROW(supergradient(NoInvest{}, 9, p, pf, ens, 0.5));
    EXPECT_THROW(supergradient(NoInvest{}, 10, p, pf, ens, 0.5), DomainError);
    const auto tilted = simulate_c0(p, g, 10, 2, Measure::Tilted);
    EXPECT_THROW(evaluate_profit(NoInvest{}, p, pf, tilted, 0.5), DomainError);
    BoundaryCurve other(TimeGrid::uniform(1.0, 5), BoundaryMethod::UpperBound);
    EXPECT_THROW(evaluate_profit(TrackBoundary{other}, p, pf, ens, 0.5), DomainError);
    EXPECT_THROW(evaluate_profit(NoInvest{}, p, pf, ens, 0.0), DomainError);
}

TEST(Supergradient, NoInvestFromLowCapacityIsPositive) {
    const auto p = reference_params(2.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto g = TimeGrid::uniform(2.0, 40);
    const auto ens = simulate_c0(p, g, 4000, 8, Measure::Original);
    const auto s = supergradient(NoInvest{}, 0, p, pf, ens, 0.01);
    EXPECT_GT(s.mean, 10 * s.stderr_);
}

TEST(Foc, OptimalBoundaryPassesAndMisscaledOnesFail) {
    const auto p = reference_params(2.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto g = TimeGrid::uniform(2.0, 40);
    const auto curve = solve_boundary_backward(p, pf, g, simulate_c0(p, g, 4000, 31, Measure::Tilted));
    const auto ens = simulate_c0(p, g, 8000, 32, Measure::Original);
    FocConfig cfg;
    cfg.band = 3.0;
    const auto ok = verify_foc(TrackBoundary{curve}, p, pf, ens, 0.5, cfg);
    for (const auto& d : ok.deterministic) EXPECT_TRUE(d.pass) << d.name << " " << d.estimate.mean;
    EXPECT_TRUE(ok.hitting.pass) << ok.hitting.estimate.mean << " +- " << ok.hitting.estimate.stderr_;
    EXPECT_TRUE(ok.flat_off.pass) << ok.flat_off.estimate.mean << " +- " << ok.flat_off.estimate.stderr_;
    EXPECT_FALSE(verify_foc(ScaledBoundary{curve, 2.0}, p, pf, ens, 0.5, cfg).pass);
    EXPECT_FALSE(verify_foc(ScaledBoundary{curve, 0.5}, p, pf, ens, 0.05, cfg).pass);

    const auto dom = dominance(TrackBoundary{curve}, {ScaledBoundary{curve, 0.5}, ScaledBoundary{curve, 1.5}, NoInvest{}},
                               p, pf, ens, 0.5, 3.0);
    for (const auto& d : dom) EXPECT_TRUE(d.pass) << d.alternative;
}

TEST(FirstPassage, InverseGaussianMoments) {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nz;
    std::uniform_real_distribution<double> uu;
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = detail::inverse_gaussian(2.0, 3.0, nz(gen), uu(gen));
        s += x;
        s2 += x * x;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, 2.0, 4 * std::sqrt(8.0 / 3.0 / n));
    EXPECT_NEAR(var, 8.0 / 3.0, 0.1);
}

TEST(FirstPassage, MatchesSimulatedBrownianBridge) {
    // Bridge 0 -> -0.5 over [0, 1] with unit variance, level -0.8. Fine
    // simulation with the per-step bridge crossing probability.
    const double x0 = 0.0, x1 = -0.5, z = -0.8, var = 1.0;
    const int steps = 1000, n = 20000;
    const double h = 1.0 / steps;
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nz;
    std::uniform_real_distribution<double> uu;
    double sum = 0, sum2 = 0;
    int hits = 0;
    for (int r = 0; r < n; ++r) {
        double x = x0;
        for (int k = 0; k < steps; ++k) {
            const double t = k * h, remaining = 1.0 - t;
            const double mean = x + (x1 - x) * h / remaining;
            const double sd = std::sqrt(var * h * (remaining - h) / remaining);
            const double next = k + 1 == steps ? x1 : mean + sd * nz(gen);
            const bool crossed = next <= z || uu(gen) < std::exp(-2.0 * (x - z) * (next - z) / (var * h));
            if (crossed) {
                const double when = t + uu(gen) * h;
                sum += when;
                sum2 += when * when;
                ++hits;
                break;
            }
            x = next;
        }
    }
    const double p_hit = std::exp(-2.0 * (x0 - z) * (x1 - z) / var);
    EXPECT_NEAR(static_cast<double>(hits) / n, p_hit, 4 * std::sqrt(p_hit * (1 - p_hit) / n));
    const double sim_mean = sum / hits, sim_se = std::sqrt((sum2 / hits - sim_mean * sim_mean) / hits);
    double law = 0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) law += detail::first_passage_time(x0, x1, z, var, 1.0, nz(gen), uu(gen));
    law /= m;
    EXPECT_NEAR(sim_mean, law, 4 * sim_se + 2 * h);
}

TEST(Policy, ResultsDoNotDependOnThreadCount) {
    const auto p = reference_params(2.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto g = TimeGrid::uniform(2.0, 40);
    const auto ens = simulate_c0(p, g, 3000, 3, Measure::Original);
    set_threads(1);
    const auto a = profit_samples(TrackConstant{0.3}, p, pf, ens, 0.5);
    set_threads(4);
    const auto b = profit_samples(TrackConstant{0.3}, p, pf, ens, 0.5);
    set_threads(0);
    EXPECT_EQ(a, b);
}

TEST(Policy, Names) {
    EXPECT_EQ(policy_name(NoInvest{}), "no_invest");
    BoundaryCurve c(TimeGrid::uniform(1.0, 2), BoundaryMethod::UpperBound);
    EXPECT_EQ(policy_name(ScaledBoundary{c, 0.5}), "scaled_boundary_x0.5");
    EXPECT_EQ(policy_name(ScaledBoundary{c, 2.0}), "scaled_boundary_x2");
}
