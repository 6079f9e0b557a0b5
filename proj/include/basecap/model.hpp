#pragma once

// Problem data: deterministic coefficient functions, production functions and
// the constants derived from them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "basecap/errors.hpp"

namespace basecap {

/// Integrates rate(t) over [a, b] when rate is constant between consecutive
/// entries of `breaks` (sorted); rate is sampled at each segment's left end.
template <class Rate>
double integrate_segments(double a, double b, const std::vector<double>& breaks, Rate rate) {
    if (b <= a) return 0.0;
    double total = 0.0;
    double left = a;
    auto it = std::upper_bound(breaks.begin(), breaks.end(), a);
    while (left < b) {
        const double right = (it == breaks.end()) ? b : std::min(b, *it);
        total += rate(left) * (right - left);
        left = right;
        if (it != breaks.end()) ++it;
    }
    return total;
}

/// Right-continuous piecewise-constant function of time.
///
/// values[j] holds on [breakpoints[j-1], breakpoints[j]) with the conventions
/// breakpoints[-1] = -inf and breakpoints[K] = +inf, so values.size() == breakpoints.size() + 1.
class PiecewiseConstant {
public:
    PiecewiseConstant() : values_{0.0} {}
    PiecewiseConstant(double constant) : values_{constant} {}  // NOLINT(implicit)
    PiecewiseConstant(std::vector<double> breakpoints, std::vector<double> values)
        : breaks_(std::move(breakpoints)), values_(std::move(values)) {
        if (values_.size() != breaks_.size() + 1)
            throw DomainError("piecewise-constant function needs one more value than breakpoints");
        if (!std::is_sorted(breaks_.begin(), breaks_.end()) ||
            std::adjacent_find(breaks_.begin(), breaks_.end()) != breaks_.end())
            throw DomainError("breakpoints must be strictly increasing");
    }

    double operator()(double t) const {
        const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
        return values_[static_cast<std::size_t>(it - breaks_.begin())];
    }

    /// Exact integral over [a, b], a <= b.
    double integral(double a, double b) const {
        return integrate_segments(a, b, breaks_, [this](double t) { return (*this)(t); });
    }

    /// Exact integral of g(value) over [a, b].
    template <class G>
    double integral_of(double a, double b, G g) const {
        return integrate_segments(a, b, breaks_, [this, &g](double t) { return g((*this)(t)); });
    }

    bool is_constant() const {
        return std::all_of(values_.begin(), values_.end(), [&](double v) { return v == values_.front(); });
    }

    double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
    double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> breaks_;
    std::vector<double> values_;
};

/// Sorted union of the breakpoints of several functions.
inline std::vector<double> merged_breakpoints(std::initializer_list<const PiecewiseConstant*> fs) {
    std::vector<double> out;
    for (const auto* f : fs) out.insert(out.end(), f->breakpoints().begin(), f->breakpoints().end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct CoefficientSnapshot {
    double mu_C;
    double sigma_C;
    double f_C;
    double mu_F;
};

/// Coefficients of the capacity dynamics and the discount rate, plus horizon and initial capacity.
struct ModelParams {
    PiecewiseConstant mu_C{0.0};
    PiecewiseConstant sigma_C{0.0};
    PiecewiseConstant f_C{1.0};
    PiecewiseConstant mu_F{0.0};
    double horizon = 1.0;  ///< +inf selects the infinite-horizon closed forms
    double y0 = 1.0;

    bool infinite_horizon() const { return std::isinf(horizon); }

    bool constant_coefficients() const {
        return mu_C.is_constant() && sigma_C.is_constant() && f_C.is_constant() && mu_F.is_constant();
    }

    /// f_C is required to be continuous; a jump makes solver guarantees void and is reported.
    bool f_C_discontinuous() const { return !f_C.is_constant(); }

    /// Throws ValidationError naming the first offending field.
    void validate() const {
        auto finite_all = [](const PiecewiseConstant& f) {
            return std::all_of(f.values().begin(), f.values().end(), [](double v) { return std::isfinite(v); });
        };
        if (!finite_all(mu_C)) throw ValidationError("model.mu_C", "must be finite");
        if (!finite_all(sigma_C)) throw ValidationError("model.sigma_C", "must be finite");
        if (!finite_all(f_C)) throw ValidationError("model.f_C", "must be finite");
        if (!finite_all(mu_F)) throw ValidationError("model.mu_F", "must be finite");
        if (mu_C.min_value() < 0.0) throw ValidationError("model.mu_C", "must be >= 0");
        if (sigma_C.min_value() < 0.0) throw ValidationError("model.sigma_C", "must be >= 0");
        if (f_C.min_value() <= 0.0) throw ValidationError("model.f_C", "must be bounded below by k_f > 0");
        if (mu_F.min_value() < 0.0) throw ValidationError("model.mu_F", "must be >= 0");
        if (!(horizon > 0.0)) throw ValidationError("grid.T", "horizon must be > 0");
        if (!(y0 > 0.0) || !std::isfinite(y0)) throw ValidationError("model.y0", "initial capacity must be > 0");
    }
};

inline CoefficientSnapshot eval_coefficients(const ModelParams& p, double t) {
    if (!(t >= 0.0) || t > p.horizon) throw DomainError("time " + std::to_string(t) + " outside [0, T]");
    return {p.mu_C(t), p.sigma_C(t), p.f_C(t), p.mu_F(t)};
}

/// Revenue rate R and marginal revenue R_c.
///
/// Cobb-Douglas R(c) = c^alpha / alpha is the reference case; anything else is
/// a Custom pair of callables whose concavity and sublinear growth are the
/// caller's obligation (Inada limits are probed at construction).
class ProductionFunction {
public:
    using Fn = std::function<double(double)>;

    static ProductionFunction cobb_douglas(double alpha) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ValidationError("production.alpha", "Cobb-Douglas exponent must lie in (0,1)");
        ProductionFunction pf;
        pf.alpha_ = alpha;
        pf.name_ = "cobb_douglas";
        return pf;
    }

    static ProductionFunction custom(Fn revenue, Fn marginal, std::string name = "custom") {
        ProductionFunction pf;
        pf.revenue_ = std::move(revenue);
        pf.marginal_ = std::move(marginal);
        pf.name_ = std::move(name);
        const double lo = pf.marginal_(1e-8), mid = pf.marginal_(1.0), hi = pf.marginal_(1e8);
        if (!(lo > mid && mid > hi && hi < 1e-3 * mid))
            throw ValidationError("production", "marginal revenue fails the Inada probe R_c(1e-8) > R_c(1) > R_c(1e8), "
                                                "R_c(1e8) < 1e-3 R_c(1)");
        return pf;
    }

    /// Sum of two power terms c^a1/a1 + w c^a2/a2; a concave Custom example with Inada behaviour.
    static ProductionFunction two_power(double a1, double a2, double weight) {
        if (!(a1 > 0 && a1 < 1)) throw ValidationError("production.alpha", "must lie in (0,1)");
        if (!(a2 > 0 && a2 < 1)) throw ValidationError("production.alpha2", "must lie in (0,1)");
        if (!(weight > 0)) throw ValidationError("production.weight", "must be > 0");
        return custom([=](double c) { return std::pow(c, a1) / a1 + weight * std::pow(c, a2) / a2; },
                      [=](double c) { return std::pow(c, a1 - 1.0) + weight * std::pow(c, a2 - 1.0); },
                      "two_power");
    }

    bool is_cobb_douglas() const { return alpha_.has_value(); }
    double alpha() const {
        if (!alpha_) throw DomainError("production function is not Cobb-Douglas");
        return *alpha_;
    }
    const std::string& name() const { return name_; }

    double revenue(double c) const {
        if (alpha_) return std::pow(c, *alpha_) / *alpha_;
        return revenue_(c);
    }

    /// R_c without the domain check; hot loops call this.
    double marginal_unchecked(double c) const {
        if (alpha_) return std::pow(c, *alpha_ - 1.0);
        return marginal_(c);
    }

private:
    ProductionFunction() = default;

    std::optional<double> alpha_;
    Fn revenue_;
    Fn marginal_;
    std::string name_;
};

inline double marginal_production(const ProductionFunction& pf, double c) {
    if (!(c > 0.0)) throw DomainError("marginal production requires capacity > 0");
    return pf.marginal_unchecked(c);
}

/// Roots of 0.5 sigma^2 x^2 + mu_tilde x - mu_F = 0 with mu_tilde = mu_C + sigma^2/2.
struct BetaRoots {
    double beta_plus;
    double beta_minus;
    double mu_tilde;
};

inline BetaRoots beta_roots(double mu_C, double sigma_C, double mu_F) {
    if (!(sigma_C > 0.0)) throw DomainError("degenerate volatility: closed forms need sigma_C > 0");
    if (!(mu_F > 0.0)) throw DomainError("closed forms need mu_F > 0");
    const double s2 = sigma_C * sigma_C;
    const double mt = mu_C + 0.5 * s2;
    const double b = mt / s2;
    const double disc = std::sqrt(b * b + 2.0 * mu_F / s2);
    // The positive root loses digits to cancellation when b >> disc - b; recover it from Vieta.
    const double beta_minus = -b - disc;
    const double beta_plus = (-2.0 * mu_F / s2) / beta_minus;
    return {beta_plus, beta_minus, mt};
}

}  // namespace basecap
