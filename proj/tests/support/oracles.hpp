#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the code paths being checked beyond plain value evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "starpath/numcore.hpp"
#include "starpath/problems.hpp"
#include "starpath/rng.hpp"

namespace sptest {
using namespace starpath;

using ScalarFn = std::function<double(const ParamVector&)>;

/// Central difference of f along unit direction u at x.
inline double central_directional(const ScalarFn& f, const ParamVector& x, const ParamVector& u,
                                  double h) {
    return (f(axpy(h, u, x)) - f(axpy(-h, u, x))) / (2.0 * h);
}

/// Full central-difference gradient (2d evaluations).
inline ParamVector central_gradient(const ScalarFn& f, const ParamVector& x, double h) {
    ParamVector g(x.dim());
    for (std::size_t j = 0; j < x.dim(); ++j) {
        ParamVector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        g[j] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

inline double relative_error(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline double relative_error(const ParamVector& a, const ParamVector& b) {
    const double scale = std::max(norm2(a), norm2(b));
    return scale == 0.0 ? 0.0 : distance(a, b) / scale;
}

inline ParamVector random_unit(CounterRng& rng, std::size_t d) {
    ParamVector u(d);
    for (auto& v : u) v = rng.normal();
    const double nrm = norm2(u);
    for (auto& v : u) v /= nrm;
    return u;
}

inline ParamVector random_normal(CounterRng& rng, std::size_t d, double scale = 1.0) {
    ParamVector u(d);
    for (auto& v : u) v = scale * rng.normal();
    return u;
}

/// Worst relative error between <grad, u> and the central difference over
/// `directions` random unit directions.
inline double directional_gradient_error(const ScalarFn& f, const ParamVector& grad,
                                         const ParamVector& x, CounterRng& rng,
                                         int directions, double h = 1e-5) {
    double worst = 0.0;
    for (int r = 0; r < directions; ++r) {
        const ParamVector u = random_unit(rng, x.dim());
        worst = std::max(worst, relative_error(dot(grad, u), central_directional(f, x, u, h)));
    }
    return worst;
}

/// Pearson chi-square statistic of observed counts against a uniform expectation.
inline double chi_square_uniform(const std::vector<std::uint64_t>& counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
    double stat = 0.0;
    for (auto c : counts) {
        const double d = static_cast<double>(c) - expected;
        stat += d * d / expected;
    }
    return stat;
}

/// Plain sum of star residuals over an epoch, recomputed from checkpoints.
inline double brute_epoch_residual(const FiniteSumProblem& p, const std::vector<ParamVector>& xs,
                                   const std::vector<std::uint32_t>& xis, const ParamVector& x_star) {
    double total = 0.0;
    for (std::size_t t = 0; t < xis.size(); ++t) {
        const ParamVector& x = xs[t];
        const ParamVector g = p.component_grad(xis[t], x);
        double inner = 0.0;
        for (std::size_t j = 0; j < x.dim(); ++j) inner += (x_star[j] - x[j]) * g[j];
        total += p.component_value(xis[t], x) - p.component_value(xis[t], x_star) + inner;
    }
    return total;
}

}  // namespace sptest
