#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "basecap/errors.hpp"

namespace basecap {

/// Nodes and weights for E[g(Z)], Z ~ N(0,1): sum_k w_k g(x_k), weights summing to 1.
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule of the given order, computed by Newton iteration on the
/// physicists' Hermite polynomial and rescaled to the standard normal weight.
inline GaussHermiteRule gauss_hermite(int order) {
    if (order < 1 || order > 200) throw DomainError("Gauss-Hermite order must be in [1, 200]");
    const int n = order;
    const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * x[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * x[1];
        else
            z = 2.0 * z - x[static_cast<std::size_t>(i - 2)];
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        x[static_cast<std::size_t>(i)] = z;
        x[static_cast<std::size_t>(n - 1 - i)] = -z;
        w[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
        w[static_cast<std::size_t>(n - 1 - i)] = w[static_cast<std::size_t>(i)];
    }
    GaussHermiteRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        // Ascending order, probabilists' scaling.
        rule.nodes[static_cast<std::size_t>(i)] = -x[static_cast<std::size_t>(i)] * std::numbers::sqrt2;
        rule.weights[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] / std::sqrt(std::numbers::pi);
        total += rule.weights[static_cast<std::size_t>(i)];
    }
    for (auto& wi : rule.weights) wi /= total;
    return rule;
}

}  // namespace basecap
