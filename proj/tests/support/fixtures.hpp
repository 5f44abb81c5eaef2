#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "starpath/hash.hpp"
#include "starpath/problems.hpp"

namespace sptest {
using namespace starpath;

/// Finite sum assembled from per-component callables.
class FunctionalProblem final : public FiniteSumProblem {
public:
    using Value = std::function<double(const ParamVector&)>;
    using Grad = std::function<ParamVector(const ParamVector&)>;

    struct Component {
        Value value;
        Grad grad;
    };

    FunctionalProblem(std::size_t d, std::vector<Component> comps, std::string tag,
                      std::optional<ParamVector> planted = std::nullopt,
                      std::optional<double> lipschitz = std::nullopt)
        : d_(d), comps_(std::move(comps)), tag_(std::move(tag)), planted_(std::move(planted)),
          lipschitz_(lipschitz) {}

    std::uint64_t n() const override { return comps_.size(); }
    std::size_t dim() const override { return d_; }
    std::string name() const override { return tag_; }
    std::uint64_t fingerprint() const override {
        return Fnv1a{}.str(tag_).u64(d_).u64(comps_.size()).value();
    }
    std::optional<ParamVector> planted_minimizer() const override { return planted_; }
    std::optional<double> lipschitz_bound() const override { return lipschitz_; }

protected:
    double value(std::uint64_t i, const ParamVector& x) const override { return comps_[i].value(x); }
    ParamVector gradient(std::uint64_t i, const ParamVector& x) const override {
        return comps_[i].grad(x);
    }

private:
    std::size_t d_;
    std::vector<Component> comps_;
    std::string tag_;
    std::optional<ParamVector> planted_;
    std::optional<double> lipschitz_;
};

/// l(x) = c/2 ||x - center||^2
inline FunctionalProblem::Component quadratic(double c, ParamVector center) {
    return {[c, center](const ParamVector& x) {
                const double r = distance(x, center);
                return 0.5 * c * r * r;
            },
            [c, center](const ParamVector& x) {
                ParamVector g = axpy(-1.0, center, x);
                for (auto& v : g) v *= c;
                return g;
            }};
}

/// 1-D phase-retrieval component ((x^2 - 1)^2)/4, minimized at +-1.
inline FunctionalProblem::Component phase_1d() {
    return {[](const ParamVector& x) {
                const double r = x[0] * x[0] - 1.0;
                return 0.25 * r * r;
            },
            [](const ParamVector& x) { return ParamVector{(x[0] * x[0] - 1.0) * x[0]}; }};
}

}  // namespace sptest
