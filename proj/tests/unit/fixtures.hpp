#pragma once

#include <cmath>

#include "basecap/model.hpp"

namespace basecap::fixtures {

/// mu_C = 0, sigma^2 = 2, mu_F = 1, f_C = 1.
inline ModelParams reference_params(double horizon = 10.0) {
    ModelParams p;
    p.mu_C = 0.0;
    p.sigma_C = std::sqrt(2.0);
    p.mu_F = 1.0;
    p.f_C = 1.0;
    p.horizon = horizon;
    p.y0 = 0.5;
    return p;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace basecap::fixtures
