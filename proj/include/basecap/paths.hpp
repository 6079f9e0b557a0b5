#pragma once

// Seeded ensembles of the uncontrolled capacity C0(t) = exp(-int mu_C) M_0(t).
//
// Log-increments are drawn from their exact Gaussian law (coefficients are
// piecewise constant), and each cell additionally carries an exact draw of
// min C0 over the cell from the Brownian bridge between its endpoints. The
// cell minima let consumers evaluate running suprema of l(u)/C0(u) in
// continuous time instead of only at the knots.

#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "basecap/errors.hpp"
#include "basecap/model.hpp"
#include "basecap/parallel.hpp"
#include "basecap/rng.hpp"

namespace basecap {

class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> knots) : knots_(std::move(knots)) {
        if (knots_.size() < 2) throw DomainError("time grid needs at least two knots");
        if (knots_.front() != 0.0) throw DomainError("time grid must start at 0");
        for (std::size_t i = 1; i < knots_.size(); ++i)
            if (!(knots_[i] > knots_[i - 1])) throw DomainError("time grid knots must be strictly increasing");
    }

    static TimeGrid uniform(double horizon, std::size_t n_steps) {
        if (n_steps == 0) throw DomainError("time grid needs at least one step");
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("time grid needs finite T > 0");
        std::vector<double> k(n_steps + 1);
        for (std::size_t i = 0; i <= n_steps; ++i) k[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
        k.back() = horizon;
        return TimeGrid(std::move(k));
    }

    std::size_t steps() const { return knots_.size() - 1; }
    std::size_t size() const { return knots_.size(); }
    double operator[](std::size_t i) const { return knots_[i]; }
    double dt(std::size_t i) const { return knots_[i + 1] - knots_[i]; }
    double horizon() const { return knots_.back(); }
    const std::vector<double>& knots() const { return knots_; }

    bool is_uniform(double rel_tol = 1e-12) const {
        const double h = dt(0);
        for (std::size_t i = 1; i < steps(); ++i)
            if (std::abs(dt(i) - h) > rel_tol * h) return false;
        return true;
    }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) { return a.knots_ == b.knots_; }

private:
    std::vector<double> knots_;
};

enum class Measure { Original, Tilted };

inline const char* to_string(Measure m) { return m == Measure::Original ? "original" : "tilted"; }

class PathEnsemble {
public:
    PathEnsemble(std::shared_ptr<const TimeGrid> grid, Measure measure, std::uint64_t seed, std::size_t n_paths,
                 bool antithetic)
        : grid_(std::move(grid)), measure_(measure), seed_(seed), n_paths_(n_paths), antithetic_(antithetic),
          c0_(n_paths * grid_->size()), cell_min_(n_paths * grid_->steps()) {}

    const TimeGrid& grid() const { return *grid_; }
    std::shared_ptr<const TimeGrid> grid_ptr() const { return grid_; }
    Measure measure() const { return measure_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t n_paths() const { return n_paths_; }
    bool antithetic() const { return antithetic_; }

    /// C0(t_k) on path p.
    std::span<const double> path(std::size_t p) const { return {c0_.data() + p * grid_->size(), grid_->size()}; }
    /// min of C0 over [t_k, t_{k+1}] on path p, k < N.
    std::span<const double> cell_minima(std::size_t p) const {
        return {cell_min_.data() + p * grid_->steps(), grid_->steps()};
    }

    std::span<double> mutable_path(std::size_t p) { return {c0_.data() + p * grid_->size(), grid_->size()}; }
    std::span<double> mutable_cell_minima(std::size_t p) {
        return {cell_min_.data() + p * grid_->steps(), grid_->steps()};
    }

    bool bit_identical(const PathEnsemble& other) const {
        return grid() == other.grid() && c0_ == other.c0_ && cell_min_ == other.cell_min_;
    }

private:
    std::shared_ptr<const TimeGrid> grid_;
    Measure measure_;
    std::uint64_t seed_;
    std::size_t n_paths_;
    bool antithetic_;
    std::vector<double> c0_;
    std::vector<double> cell_min_;
};

namespace detail {
inline constexpr std::uint32_t kIncrementStream = 0;
inline constexpr std::uint32_t kBridgeStream = 1;
}  // namespace detail

/// Simulates C0 on `grid` under `measure`.
///
/// log C0 has drift -int(mu_C + sigma^2/2) under the original measure and
/// +int(sigma^2/2 - mu_C) under the tilted one (W = W~ + int sigma), variance
/// int sigma^2 in both. Path p draws from Philox counters (p, k, .), so the
/// ensemble is bit-identical for any thread count.
inline PathEnsemble simulate_c0(const ModelParams& params, std::shared_ptr<const TimeGrid> grid, std::size_t n_paths,
                                std::uint64_t seed, Measure measure, bool antithetic = false) {
    if (n_paths == 0) throw DomainError("n_paths must be >= 1");
    if (grid->horizon() > params.horizon * (1.0 + 1e-12))
        throw DomainError("time grid extends beyond the model horizon");
    const std::size_t n_steps = grid->steps();

    // Deterministic parts are integrated from 0 so that sigma = 0 reproduces exp(-int mu_C) exactly.
    std::vector<double> drift_cum(n_steps + 1), var(n_steps);
    const double sign = measure == Measure::Original ? -1.0 : 1.0;
    for (std::size_t k = 0; k <= n_steps; ++k) {
        const double t = (*grid)[k];
        const double s2 = params.sigma_C.integral_of(0.0, t, [](double s) { return s * s; });
        drift_cum[k] = -params.mu_C.integral(0.0, t) + sign * 0.5 * s2;
        if (k > 0) var[k - 1] = s2;
    }
    for (std::size_t k = n_steps; k-- > 1;) var[k] -= var[k - 1];
    for (auto& v : var) v = std::max(v, 0.0);

    PathEnsemble ens(grid, measure, seed, n_paths, antithetic);
    const Philox4x32 increments(seed, detail::kIncrementStream);
    const Philox4x32 bridge(seed, detail::kBridgeStream);

    parallel_for(n_paths, [&](std::size_t p) {
        auto out = ens.mutable_path(p);
        auto mins = ens.mutable_cell_minima(p);
        const bool mirrored = antithetic && (p % 2 == 1);
        const auto source = static_cast<std::uint32_t>(mirrored ? p - 1 : p);
        double noise = 0.0;
        double prev_log = 0.0;
        out[0] = 1.0;
        for (std::size_t k = 0; k < n_steps; ++k) {
            const double z = increments.normal(source, static_cast<std::uint32_t>(k), 0);
            const double sd = std::sqrt(var[k]);
            noise += sd * (mirrored ? -z : z);
            const double next_log = drift_cum[k + 1] + noise;
            out[k + 1] = std::exp(next_log);
            const double u = bridge.uniforms(source, static_cast<std::uint32_t>(k), 0)[0];
            const double d = next_log - prev_log;
            const double lo = 0.5 * (prev_log + next_log - std::sqrt(d * d - 2.0 * var[k] * std::log(u)));
            mins[k] = std::exp(std::min(lo, std::min(prev_log, next_log)));
            prev_log = next_log;
        }
    });
    return ens;
}

inline PathEnsemble simulate_c0(const ModelParams& params, const TimeGrid& grid, std::size_t n_paths,
                                std::uint64_t seed, Measure measure, bool antithetic = false) {
    return simulate_c0(params, std::make_shared<const TimeGrid>(grid), n_paths, seed, measure, antithetic);
}

/// C0(t_j) / C0(t_i) on path p.
inline double ratio_view(const PathEnsemble& ens, std::size_t i, std::size_t j, std::size_t p) {
    if (p >= ens.n_paths() || i >= ens.grid().size() || j >= ens.grid().size())
        throw DomainError("ratio_view index out of range");
    if (j < i) throw DomainError("ratio_view requires i <= j");
    if (i == j) return 1.0;
    const auto row = ens.path(p);
    return row[j] / row[i];
}

/// Debug dump; columns path,t,c0. Not a stable format.
inline void dump_ensemble_csv(const PathEnsemble& ens, std::ostream& os, std::size_t max_paths = 100) {
    os << "path,t,c0\n";
    const std::size_t n = std::min(max_paths, ens.n_paths());
    os.precision(17);
    for (std::size_t p = 0; p < n; ++p) {
        const auto row = ens.path(p);
        for (std::size_t k = 0; k < row.size(); ++k) os << p << ',' << ens.grid()[k] << ',' << row[k] << '\n';
    }
}

}  // namespace basecap
