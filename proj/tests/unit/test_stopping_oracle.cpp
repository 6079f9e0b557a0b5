#include <gtest/gtest.h>

#include <sstream>

#include "basecap/stopping_oracle.hpp"
#include "fixtures.hpp"

using namespace basecap;
using fixtures::reference_params;

TEST(GaussHermite, MatchesNormalMoments) {
    const auto gh = gauss_hermite(21);
    double m0 = 0, m1 = 0, m2 = 0, m4 = 0, m6 = 0;
    for (std::size_t q = 0; q < gh.nodes.size(); ++q) {
        const double x = gh.nodes[q], w = gh.weights[q];
        m0 += w;
        m1 += w * x;
        m2 += w * x * x;
        m4 += w * std::pow(x, 4);
        m6 += w * std::pow(x, 6);
    }
    EXPECT_NEAR(m0, 1.0, 1e-13);
    EXPECT_NEAR(m1, 0.0, 1e-13);
    EXPECT_NEAR(m2, 1.0, 1e-12);
    EXPECT_NEAR(m4, 3.0, 1e-11);
    EXPECT_NEAR(m6, 15.0, 1e-10);
}

TEST(ValueFunction, BasicShapeOnReferenceModel) {
    const auto p = reference_params(2.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto g = TimeGrid::uniform(2.0, 20);
    OracleConfig cfg;
    cfg.substeps = 4;
    const auto s = solve_value_function(p, pf, g, default_ygrid(p, pf, g, 120), cfg);
    for (std::size_t j = 0; j < s.n_y(); ++j) EXPECT_EQ(s.v(g.steps(), j), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < s.n_y(); ++j) {
            EXPECT_LE(s.v(i, j), 1.0 + 1e-12);
            if (j + 1 < s.n_y()) EXPECT_GE(s.v(i, j), s.v(i, j + 1) - 1e-12);
        }
    EXPECT_TRUE(stop_sets_are_down_sets(s));
    EXPECT_TRUE(s.stopped(0, 0));
    EXPECT_FALSE(s.stopped(0, s.n_y() - 1));
}

TEST(ValueFunction, DeterministicCaseMatchesScalarRecursion) {
    // sigma = 0 and mu_C = 0 keep Y constant, so every node is its own scalar problem.
    ModelParams p;
    p.mu_C = 0.0;
    p.sigma_C = 0.0;
    p.mu_F = 0.8;
    p.f_C = 1.0;
    p.horizon = 1.5;
    const auto pf = ProductionFunction::cobb_douglas(0.4);
    const auto g = TimeGrid::uniform(1.5, 15);
    const auto y = log_spaced(0.01, 10.0, 40);
    OracleConfig cfg;
    cfg.substeps = 3;
    const auto s = solve_value_function(p, pf, g, y, cfg);
    const double h = 0.1 / 3, disc = std::exp(-0.8 * h);
    for (std::size_t j = 0; j < y.size(); ++j) {
        const double r = std::pow(y[j], 0.4 - 1.0);
        double v = 0.0;
        for (std::size_t i = 15; i-- > 0;) {
            for (int k = 0; k < 3; ++k) v = std::min(1.0, r * h + disc * v);
            EXPECT_NEAR(s.v(i, j), v, 1e-10) << "i=" << i << " j=" << j;
        }
    }
}

TEST(ExtractBoundary, PropertiesOnReferenceModel) {
    const auto p = reference_params(2.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto g = TimeGrid::uniform(2.0, 20);
    OracleConfig cfg;
    cfg.substeps = 8;
    const auto s = solve_value_function(p, pf, g, default_ygrid(p, pf, g, 200), cfg);
    const auto b = extract_boundary(s, cfg);
    EXPECT_EQ(b.method, BoundaryMethod::StoppingOracle);
    EXPECT_EQ(b.values.back(), 0.0);
    for (std::size_t i = 0; i < g.steps(); ++i) {
        EXPECT_FALSE(b.flagged[i]);
        EXPECT_GT(b.values[i], 0.0);
        EXPECT_LE(b.values[i], upper_bound_curve(p, pf, g[i]) * 1.02);
        if (i > 0) EXPECT_LE(b.values[i], b.values[i - 1] * 1.01);
    }
    // The continuity correction only moves the boundary down.
    cfg.continuity_correction = false;
    const auto raw = extract_boundary(s, cfg);
    for (std::size_t i = 0; i < g.steps(); ++i) EXPECT_LT(b.values[i], raw.values[i]);
}

TEST(ExtractBoundary, RefinementConverges) {
    const auto p = reference_params(1.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    auto boundary_at_zero = [&](std::size_t n, std::size_t m, int sub) {
        const auto g = TimeGrid::uniform(1.0, n);
        OracleConfig cfg;
        cfg.substeps = sub;
        return extract_boundary(solve_value_function(p, pf, g, default_ygrid(p, pf, g, m), cfg), cfg).values[0];
    };
    const double coarse = boundary_at_zero(10, 150, 4);
    const double mid = boundary_at_zero(20, 300, 8);
    const double fine = boundary_at_zero(40, 600, 16);
    EXPECT_LT(std::abs(fine - mid), std::abs(mid - coarse) + 0.01 * fine);
    EXPECT_LT(std::abs(fine - mid) / fine, 0.03);
}

TEST(ValueFunction, CoverageAndEmptySlices) {
    const auto p = reference_params(1.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto g = TimeGrid::uniform(1.0, 5);
    OracleConfig cfg;
    cfg.substeps = 2;
    EXPECT_THROW(solve_value_function(p, pf, g, log_spaced(1e-6, 1e-3, 20), cfg), CoverageError);
    const auto s = solve_value_function(p, pf, g, log_spaced(50.0, 500.0, 20), cfg);
    const auto b = extract_boundary(s, cfg);
    EXPECT_TRUE(b.flagged[0]);
    EXPECT_EQ(b.values[0], 0.0);
    EXPECT_THROW(solve_value_function(p, pf, TimeGrid::uniform(2.0, 5), log_spaced(0.1, 1.0, 5), cfg), DomainError);
    EXPECT_THROW(solve_value_function(p, pf, g, {1.0, 0.5}, cfg), DomainError);
}

TEST(ValueFunction, SurfaceCsvLayout) {
    const auto p = reference_params(1.0);
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    const auto g = TimeGrid::uniform(1.0, 3);
    OracleConfig cfg;
    cfg.substeps = 2;
    const auto s = solve_value_function(p, pf, g, default_ygrid(p, pf, g, 7), cfg);
    std::ostringstream os;
    write_value_surface_csv(s, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,y,v,stop");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 4u * 7u);
}

TEST(CrossValidate, IdenticalAndMismatchedCurves) {
    const auto g = TimeGrid::uniform(10.0, 10);
    BoundaryCurve a(g, BoundaryMethod::Representation), b(g, BoundaryMethod::StoppingOracle);
    for (std::size_t i = 0; i < 10; ++i) a.values[i] = b.values[i] = 0.3 - 0.02 * i;
    EXPECT_TRUE(cross_validate(a, b).pass);
    b.values[2] *= 1.1;
    const auto r = cross_validate(a, b);
    EXPECT_FALSE(r.pass);
    EXPECT_EQ(r.worst_early, 2u);
    EXPECT_NEAR(r.sup_rel_early, 0.1 / 1.1, 1e-12);
    b.values[2] = a.values[2];
    b.values[10] = 0.015;  // past 0.9 T: judged on absolute difference
    EXPECT_TRUE(cross_validate(a, b).pass);
    b.values[10] = 0.03;
    EXPECT_FALSE(cross_validate(a, b).pass);
    BoundaryCurve c(TimeGrid::uniform(10.0, 20), BoundaryMethod::StoppingOracle);
    EXPECT_THROW(cross_validate(a, c), DomainError);
}
