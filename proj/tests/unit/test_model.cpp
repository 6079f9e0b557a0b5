#include <gtest/gtest.h>

#include <random>

#include "basecap/model.hpp"
#include "fixtures.hpp"

using namespace basecap;

TEST(Coefficients, ConstantFunctionsEvaluateToTheirValue) {
    ModelParams p;
    p.mu_C = 0.05;
    p.sigma_C = 0.2;
    p.f_C = 1.0;
    p.mu_F = 0.1;
    p.horizon = 1.0;
    const auto c = eval_coefficients(p, 0.5);
    EXPECT_EQ(c.mu_C, 0.05);
    EXPECT_EQ(c.sigma_C, 0.2);
    EXPECT_EQ(c.f_C, 1.0);
    EXPECT_EQ(c.mu_F, 0.1);
}

TEST(Coefficients, BreakpointTakesTheRightLimit) {
    ModelParams p;
    p.mu_F = PiecewiseConstant({1.0}, {0.1, 0.3});
    p.horizon = 2.0;
    EXPECT_EQ(eval_coefficients(p, 1.0).mu_F, 0.3);
    EXPECT_EQ(eval_coefficients(p, 0.999).mu_F, 0.1);
}

TEST(Coefficients, TimeOutsideHorizonIsRejected) {
    ModelParams p;
    p.horizon = 1.0;
    EXPECT_THROW(eval_coefficients(p, -0.1), DomainError);
    EXPECT_THROW(eval_coefficients(p, 1.5), DomainError);
}

TEST(PiecewiseConstant, IntegralIsExactAcrossBreakpoints) {
    const PiecewiseConstant f({1.0, 2.5}, {0.5, 2.0, -1.0});
    EXPECT_DOUBLE_EQ(f.integral(0.0, 3.0), 0.5 * 1.0 + 2.0 * 1.5 - 1.0 * 0.5);
    EXPECT_DOUBLE_EQ(f.integral(1.5, 2.0), 1.0);
    EXPECT_EQ(f.integral(2.0, 2.0), 0.0);
    EXPECT_THROW(PiecewiseConstant({1.0, 1.0}, {1, 2, 3}), DomainError);
    EXPECT_THROW(PiecewiseConstant({1.0}, {1.0}), DomainError);
}

TEST(ModelParams, ValidationNamesTheField) {
    ModelParams p;
    p.mu_C = -0.1;
    try {
        p.validate();
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "model.mu_C");
    }
    ModelParams q;
    q.f_C = PiecewiseConstant({0.5}, {1.0, 0.0});
    EXPECT_THROW(q.validate(), ValidationError);
    ModelParams r;
    r.y0 = 0.0;
    EXPECT_THROW(r.validate(), ValidationError);
    ModelParams s;
    s.f_C = PiecewiseConstant({0.5}, {1.0, 2.0});
    EXPECT_NO_THROW(s.validate());
    EXPECT_TRUE(s.f_C_discontinuous());
}

TEST(MarginalProduction, CobbDouglasValues) {
    const auto pf = ProductionFunction::cobb_douglas(0.5);
    EXPECT_DOUBLE_EQ(marginal_production(pf, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(marginal_production(pf, 4.0), 0.5);
    EXPECT_NEAR(marginal_production(pf, 1e-12), 1e6, 1e-6);
    EXPECT_THROW(marginal_production(pf, 0.0), DomainError);
    EXPECT_THROW(marginal_production(pf, -1.0), DomainError);
}

TEST(MarginalProduction, MatchesFiniteDifferenceOfRevenue) {
    for (double alpha : {0.2, 0.5, 0.8}) {
        const auto pf = ProductionFunction::cobb_douglas(alpha);
        for (int k = 0; k < 20; ++k) {
            const double c = std::pow(10.0, -3.0 + 6.0 * k / 19.0);
            const double h = 1e-3 * c;
            // Fourth-order central difference.
            const double d = (8.0 * (pf.revenue(c + h) - pf.revenue(c - h)) - (pf.revenue(c + 2 * h) - pf.revenue(c - 2 * h))) /
                             (12.0 * h);
            EXPECT_LT(fixtures::rel_err(d, marginal_production(pf, c)), 1e-10) << "alpha=" << alpha << " c=" << c;
        }
    }
}

TEST(ProductionFunction, CobbDouglasExponentMustBeInUnitInterval) {
    EXPECT_THROW(ProductionFunction::cobb_douglas(1.2), ValidationError);
    EXPECT_THROW(ProductionFunction::cobb_douglas(0.0), ValidationError);
}

TEST(ProductionFunction, CustomInadaProbe) {
    EXPECT_THROW(ProductionFunction::custom([](double c) { return c; }, [](double) { return 1.0; }), ValidationError);
    const auto tp = ProductionFunction::two_power(0.5, 0.25, 1.0);
    EXPECT_FALSE(tp.is_cobb_douglas());
    EXPECT_THROW((void)tp.alpha(), DomainError);
    EXPECT_DOUBLE_EQ(tp.marginal_unchecked(1.0), 2.0);
}

TEST(BetaRoots, ReferenceValues) {
    const auto b = beta_roots(0.0, std::sqrt(2.0), 1.0);
    EXPECT_NEAR(b.beta_plus, (-1.0 + std::sqrt(5.0)) / 2.0, 1e-14);
    EXPECT_NEAR(b.beta_minus, (-1.0 - std::sqrt(5.0)) / 2.0, 1e-14);
    EXPECT_DOUBLE_EQ(b.mu_tilde, 1.0);
}

TEST(BetaRoots, VietaIdentitiesOnRandomDraws) {
    std::mt19937_64 gen(12345);
    std::uniform_real_distribution<double> pos(0.01, 2.0), muc(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const double mu_F = pos(gen), sigma = pos(gen), mu_C = muc(gen);
        const auto b = beta_roots(mu_C, sigma, mu_F);
        const double s2 = sigma * sigma;
        EXPECT_GT(b.beta_plus, 0.0);
        EXPECT_LT(b.beta_minus, 0.0);
        EXPECT_LT(fixtures::rel_err(b.beta_plus * b.beta_minus, -2.0 * mu_F / s2), 1e-12);
        EXPECT_LT(fixtures::rel_err(b.beta_plus + b.beta_minus, -2.0 * b.mu_tilde / s2), 1e-12);
        EXPECT_DOUBLE_EQ(b.mu_tilde, mu_C + 0.5 * s2);
    }
}

TEST(BetaRoots, DegenerateInputsAreRejected) {
    EXPECT_THROW(beta_roots(0.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(beta_roots(0.0, 1.0, 0.0), DomainError);
}
