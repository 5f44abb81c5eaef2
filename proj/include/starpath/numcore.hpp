#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "starpath/error.hpp"

namespace starpath {

/// Flat vector of 64-bit reals: iterates, gradients and reference points.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
    explicit ParamVector(std::vector<double> data) : data_(std::move(data)) {}
    ParamVector(std::initializer_list<double> init) : data_(init) {}

    static ParamVector zeros(std::size_t dim) { return ParamVector(dim); }

    static ParamVector basis(std::size_t dim, std::size_t j) {
        ParamVector e(dim);
        e[j] = 1.0;
        return e;
    }

    std::size_t dim() const noexcept { return data_.size(); }

    double& operator[](std::size_t j) noexcept { return data_[j]; }
    double operator[](std::size_t j) const noexcept { return data_[j]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    const std::vector<double>& values() const noexcept { return data_; }

    bool all_finite() const noexcept {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    std::vector<double> data_;
};

namespace detail {
inline void require_same_dim(std::size_t a, std::size_t b, const char* op) {
    if (a != b)
        throw InputError(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
}
}  // namespace detail

inline double dot(std::span<const double> a, std::span<const double> b) {
    detail::require_same_dim(a.size(), b.size(), "dot");
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

inline double dot(const ParamVector& a, const ParamVector& b) { return dot(a.span(), b.span()); }

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm2(const ParamVector& a) { return norm2(a.span()); }

/// alpha * x + y
inline ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y) {
    detail::require_same_dim(x.dim(), y.dim(), "axpy");
    ParamVector out(y.dim());
    for (std::size_t j = 0; j < y.dim(); ++j) out[j] = alpha * x[j] + y[j];
    return out;
}

/// Euclidean distance ||a - b|| without materializing the difference.
inline double distance(const ParamVector& a, const ParamVector& b) {
    detail::require_same_dim(a.dim(), b.dim(), "distance");
    double s = 0.0;
    for (std::size_t j = 0; j < a.dim(); ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return std::sqrt(s);
}

/// <b - a, g>
inline double dot_diff(const ParamVector& b, const ParamVector& a, const ParamVector& g) {
    detail::require_same_dim(a.dim(), b.dim(), "dot_diff");
    detail::require_same_dim(a.dim(), g.dim(), "dot_diff");
    double s = 0.0;
    for (std::size_t j = 0; j < a.dim(); ++j) s += (b[j] - a[j]) * g[j];
    return s;
}

}  // namespace starpath
