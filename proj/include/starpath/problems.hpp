#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "starpath/error.hpp"
#include "starpath/hash.hpp"
#include "starpath/numcore.hpp"
#include "starpath/rng.hpp"

namespace starpath {

/// Finite-sum objective f(x) = (1/n) sum_i l_i(x) with nonnegative components.
///
/// Public entry points validate the component index and dimension, then
/// dispatch to the value()/gradient() hooks of the concrete problem.
/// Implementations must be immutable after construction and reentrant.
class FiniteSumProblem {
public:
    virtual ~FiniteSumProblem() = default;

    virtual std::uint64_t n() const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;

    /// Identity of the problem instance; traces are bound to it.
    virtual std::uint64_t fingerprint() const = 0;

    /// A common global minimizer placed by construction, if known.
    virtual std::optional<ParamVector> planted_minimizer() const { return std::nullopt; }

    /// Global Lipschitz constant of every component gradient, if known.
    virtual std::optional<double> lipschitz_bound() const { return std::nullopt; }

    double component_value(std::uint64_t i, const ParamVector& x) const {
        check(i, x);
        return value(i, x);
    }

    ParamVector component_grad(std::uint64_t i, const ParamVector& x) const {
        check(i, x);
        return gradient(i, x);
    }

    std::pair<double, ParamVector> component_value_grad(std::uint64_t i,
                                                        const ParamVector& x) const {
        check(i, x);
        return value_and_gradient(i, x);
    }

protected:
    virtual double value(std::uint64_t i, const ParamVector& x) const = 0;
    virtual ParamVector gradient(std::uint64_t i, const ParamVector& x) const = 0;
    virtual std::pair<double, ParamVector> value_and_gradient(std::uint64_t i,
                                                              const ParamVector& x) const {
        return {value(i, x), gradient(i, x)};
    }

private:
    void check(std::uint64_t i, const ParamVector& x) const {
        if (i >= n())
            throw InputError("component " + std::to_string(i) + " out of range [0, " +
                             std::to_string(n()) + ")");
        detail::require_same_dim(x.dim(), dim(), "component evaluation");
    }
};

struct FullGradientStats {
    ParamVector mean_grad;
    /// (1/n) sum_i ||grad l_i(x) - grad f(x)||^2
    double variance = 0.0;
};

inline double full_value(const FiniteSumProblem& p, const ParamVector& x) {
    detail::require_same_dim(x.dim(), p.dim(), "full_value");
    double s = 0.0;
    for (std::uint64_t i = 0; i < p.n(); ++i) s += p.component_value(i, x);
    return s / static_cast<double>(p.n());
}

inline FullGradientStats full_gradient_stats(const FiniteSumProblem& p, const ParamVector& x) {
    detail::require_same_dim(x.dim(), p.dim(), "full_gradient_stats");
    const std::uint64_t n = p.n();
    const std::size_t d = p.dim();
    std::vector<ParamVector> grads;
    grads.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) grads.push_back(p.component_grad(i, x));

    // Shift by the first gradient: identical gradients give exactly zero variance.
    const ParamVector& g0 = grads.front();
    ParamVector shift_mean(d);
    for (const auto& g : grads)
        for (std::size_t j = 0; j < d; ++j) shift_mean[j] += g[j] - g0[j];
    for (std::size_t j = 0; j < d; ++j) shift_mean[j] /= static_cast<double>(n);

    double var = 0.0;
    for (const auto& g : grads)
        for (std::size_t j = 0; j < d; ++j) {
            const double dev = (g[j] - g0[j]) - shift_mean[j];
            var += dev * dev;
        }

    FullGradientStats out;
    out.mean_grad = ParamVector(d);
    for (std::size_t j = 0; j < d; ++j) out.mean_grad[j] = g0[j] + shift_mean[j];
    out.variance = var / static_cast<double>(n);
    return out;
}

/// Point drawn uniformly from the ball of `radius` around `center`.
inline ParamVector uniform_in_ball(CounterRng& rng, const ParamVector& center, double radius) {
    const std::size_t d = center.dim();
    ParamVector dir(d);
    double nrm = 0.0;
    while (nrm == 0.0) {
        for (std::size_t j = 0; j < d; ++j) dir[j] = rng.normal();
        nrm = norm2(dir);
    }
    const double r = radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(d));
    return axpy(r / nrm, dir, center);
}

/// Empirical lower bound on the gradient Lipschitz constant over a ball:
/// max over trials and components of ||g_i(u) - g_i(v)|| / ||u - v||.
inline double estimate_lipschitz(const FiniteSumProblem& p, const ParamVector& region_center,
                                 double radius, std::uint64_t trials, std::uint64_t seed) {
    if (trials < 1) throw InputError("estimate_lipschitz: trials must be >= 1");
    if (!(radius > 0.0)) throw InputError("estimate_lipschitz: radius must be positive");
    detail::require_same_dim(region_center.dim(), p.dim(), "estimate_lipschitz");
    CounterRng rng(seed, Stream::lipschitz);
    double best = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const ParamVector u = uniform_in_ball(rng, region_center, radius);
        const ParamVector v = uniform_in_ball(rng, region_center, radius);
        const double duv = distance(u, v);
        if (duv == 0.0) continue;
        for (std::uint64_t i = 0; i < p.n(); ++i)
            best = std::max(best, distance(p.component_grad(i, u), p.component_grad(i, v)) / duv);
    }
    return best;
}

/// Components built from linear measurements a_i^T x of a planted signal.
/// Rows are stored row-major, n x d.
class PlantedMeasurementProblem : public FiniteSumProblem {
public:
    std::uint64_t n() const override { return n_; }
    std::size_t dim() const override { return d_; }
    std::optional<ParamVector> planted_minimizer() const override { return planted_; }
    std::uint64_t fingerprint() const override { return fingerprint_; }

    std::span<const double> row(std::uint64_t i) const {
        return {rows_.data() + i * d_, d_};
    }
    double target(std::uint64_t i) const { return targets_[i]; }

protected:
    PlantedMeasurementProblem(std::uint64_t n, std::size_t d, std::vector<double> rows,
                              ParamVector planted)
        : n_(n), d_(d), rows_(std::move(rows)), planted_(std::move(planted)) {
        if (rows_.size() != n_ * d_) throw InputError("measurement rows must be n x d");
        detail::require_same_dim(planted_.dim(), d_, "planted minimizer");
    }

    double project(std::uint64_t i, const ParamVector& x) const { return dot(row(i), x.span()); }

    void finish(std::vector<double> targets, std::string_view family) {
        targets_ = std::move(targets);
        fingerprint_ = Fnv1a{}
                           .str(family)
                           .u64(n_)
                           .u64(d_)
                           .f64s(rows_)
                           .f64s(targets_)
                           .value();
    }

    ParamVector scaled_row(std::uint64_t i, double c) const {
        ParamVector g(d_);
        const auto a = row(i);
        for (std::size_t j = 0; j < d_; ++j) g[j] = c * a[j];
        return g;
    }

    std::uint64_t n_;
    std::size_t d_;
    std::vector<double> rows_;
    std::vector<double> targets_;
    ParamVector planted_;
    std::uint64_t fingerprint_ = 0;
};

/// l_i(x) = (a_i^T x - b_i)^2 / 2 with b_i = a_i^T x_hat.
class LeastSquaresProblem final : public PlantedMeasurementProblem {
public:
    LeastSquaresProblem(std::uint64_t n, std::size_t d, std::vector<double> rows, ParamVector planted)
        : PlantedMeasurementProblem(n, d, std::move(rows), std::move(planted)) {
        std::vector<double> b(n_);
        double lip = 0.0;
        for (std::uint64_t i = 0; i < n_; ++i) {
            b[i] = project(i, planted_);
            lip = std::max(lip, dot(row(i), row(i)));
        }
        lipschitz_ = lip;
        finish(std::move(b), "least_squares");
    }

    std::string name() const override { return "least_squares"; }
    std::optional<double> lipschitz_bound() const override { return lipschitz_; }

protected:
    double value(std::uint64_t i, const ParamVector& x) const override {
        const double r = project(i, x) - targets_[i];
        return 0.5 * r * r;
    }
    ParamVector gradient(std::uint64_t i, const ParamVector& x) const override {
        return scaled_row(i, project(i, x) - targets_[i]);
    }
    std::pair<double, ParamVector> value_and_gradient(std::uint64_t i,
                                                      const ParamVector& x) const override {
        const double r = project(i, x) - targets_[i];
        return {0.5 * r * r, scaled_row(i, r)};
    }

private:
    double lipschitz_ = 0.0;
};

/// l_i(x) = ((a_i^T x)^2 - b_i)^2 / 4 with b_i = (a_i^T x_hat)^2.
/// Both x_hat and -x_hat are common global minimizers; no global Lipschitz bound.
class PhaseRetrievalProblem final : public PlantedMeasurementProblem {
public:
    PhaseRetrievalProblem(std::uint64_t n, std::size_t d, std::vector<double> rows, ParamVector planted)
        : PlantedMeasurementProblem(n, d, std::move(rows), std::move(planted)) {
        std::vector<double> b(n_);
        for (std::uint64_t i = 0; i < n_; ++i) {
            const double s = project(i, planted_);
            b[i] = s * s;
        }
        finish(std::move(b), "phase_retrieval");
    }

    std::string name() const override { return "phase_retrieval"; }

protected:
    double value(std::uint64_t i, const ParamVector& x) const override {
        const double s = project(i, x);
        const double r = s * s - targets_[i];
        return 0.25 * r * r;
    }
    ParamVector gradient(std::uint64_t i, const ParamVector& x) const override {
        const double s = project(i, x);
        return scaled_row(i, (s * s - targets_[i]) * s);
    }
    std::pair<double, ParamVector> value_and_gradient(std::uint64_t i,
                                                      const ParamVector& x) const override {
        const double s = project(i, x);
        const double r = s * s - targets_[i];
        return {0.25 * r * r, scaled_row(i, r * s)};
    }
};

namespace detail {
struct GaussianDraw {
    std::vector<double> rows;
    ParamVector planted;
};

inline GaussianDraw draw_gaussian_instance(std::uint64_t n, std::size_t d, std::uint64_t seed) {
    GaussianDraw g;
    CounterRng data(seed, Stream::problem_data);
    g.rows.resize(n * d);
    for (double& v : g.rows) v = data.normal();
    CounterRng planted(seed, Stream::planted);
    g.planted = ParamVector(d);
    for (double& v : g.planted) v = planted.normal();
    return g;
}
}  // namespace detail

/// Consistent least squares with standard normal a_i and x_hat.
/// Requires d >= n so that the planted system is generically consistent.
inline std::unique_ptr<LeastSquaresProblem> make_consistent_least_squares(std::uint64_t n,
                                                                          std::size_t d,
                                                                          std::uint64_t seed) {
    if (n < 1) throw InputError("make_consistent_least_squares: n must be >= 1");
    if (d < n)
        throw InputError("make_consistent_least_squares: d < n, consistency not guaranteed");
    auto g = detail::draw_gaussian_instance(n, d, seed);
    return std::make_unique<LeastSquaresProblem>(n, d, std::move(g.rows), std::move(g.planted));
}

inline std::unique_ptr<PhaseRetrievalProblem> make_phase_retrieval(std::uint64_t n, std::size_t d,
                                                                   std::uint64_t seed) {
    if (n < 1 || d < 1) throw InputError("make_phase_retrieval: n and d must be >= 1");
    auto g = detail::draw_gaussian_instance(n, d, seed);
    return std::make_unique<PhaseRetrievalProblem>(n, d, std::move(g.rows), std::move(g.planted));
}

}  // namespace starpath
