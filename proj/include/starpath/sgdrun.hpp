#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "starpath/error.hpp"
#include "starpath/numcore.hpp"
#include "starpath/problems.hpp"
#include "starpath/schedule.hpp"

namespace starpath {

/// Which iterates x_k a run keeps. Boundary x_{nB} is kept when B % boundary_every == 0
/// (0 keeps none). Detail epochs are B with (B + 1) % detail_every == 0 (every m-th
/// epoch, counting from one); they store x_{nB} .. x_{n(B+1)}.
struct RecordPolicy {
    std::uint64_t boundary_every = 1;
    std::uint64_t detail_every = 0;  // 0 disables detail epochs
    bool full = false;

    static RecordPolicy epoch_boundaries() { return {1, 0, false}; }
    /// Every q-th boundary only; for large models where each iterate is megabytes.
    static RecordPolicy sparse_boundaries(std::uint64_t q) {
        if (q < 1) throw InputError("record policy: q must be >= 1");
        return {q, 0, false};
    }
    static RecordPolicy every_iteration_in_every_mth_epoch(std::uint64_t m) {
        if (m < 1) throw InputError("record policy: m must be >= 1");
        return {0, m, false};
    }
    static RecordPolicy full_trace() { return {1, 0, true}; }
    /// Boundaries plus every iteration of every tenth epoch.
    static RecordPolicy standard() { return {1, 10, false}; }

    bool detail_epoch(std::uint64_t epoch) const {
        return full || (detail_every > 0 && (epoch + 1) % detail_every == 0);
    }

    bool records(std::uint64_t k, std::uint64_t n) const {
        if (full) return true;
        const std::uint64_t b = k / n;
        if (k % n == 0) {
            if (boundary_every > 0 && b % boundary_every == 0) return true;
            if (b > 0 && detail_epoch(b - 1)) return true;
        }
        return detail_epoch(b);
    }

    friend bool operator==(const RecordPolicy&, const RecordPolicy&) = default;
};

/// Where the analyzer's x* comes from.
struct ReferenceMode {
    enum class Kind : std::uint32_t { final_iterate = 0, planted = 1, epoch_end = 2 };
    Kind kind = Kind::final_iterate;
    std::uint64_t epoch = 0;  // for epoch_end: x* = x_{n * epoch}

    static ReferenceMode final_iterate() { return {Kind::final_iterate, 0}; }
    static ReferenceMode planted() { return {Kind::planted, 0}; }
    static ReferenceMode epoch_end(std::uint64_t e) { return {Kind::epoch_end, e}; }

    std::string label() const {
        switch (kind) {
            case Kind::final_iterate: return "final_iterate";
            case Kind::planted: return "planted";
            case Kind::epoch_end: return "epoch_end:" + std::to_string(epoch);
        }
        return "?";
    }

    friend bool operator==(const ReferenceMode&, const ReferenceMode&) = default;
};

struct RunConfig {
    double eta = 0.01;
    std::uint64_t epochs = 1;
    std::uint64_t seed = 0;
    RecordPolicy record = RecordPolicy::standard();
    ReferenceMode reference = ReferenceMode::final_iterate();

    void validate() const {
        if (!(eta > 0.0) || !std::isfinite(eta)) throw InputError("RunConfig: eta must be positive");
        if (epochs < 1) throw InputError("RunConfig: epochs must be >= 1");
    }

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

enum class RunStatus : std::uint32_t { completed = 0, diverged = 1 };

struct StepRecord {
    std::uint64_t k = 0;
    std::uint32_t xi = 0;
    double loss = 0.0;  // l_{xi_k}(x_k)

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Everything a run leaves behind. The schedule is identified by (n, config.seed).
struct Trace {
    std::uint64_t fingerprint = 0;
    std::uint64_t n = 0;
    std::uint64_t d = 0;
    RunConfig config;
    std::vector<StepRecord> steps;
    std::map<std::uint64_t, ParamVector> checkpoints;
    std::uint64_t final_k = 0;
    ParamVector final_iterate;
    RunStatus status = RunStatus::completed;
    std::string diagnostic;
    double wall_seconds = 0.0;  // not persisted: trace files must be reproducible byte for byte

    /// Epochs whose n steps all executed.
    std::uint64_t completed_epochs() const { return n == 0 ? 0 : final_k / n; }

    const ParamVector* checkpoint(std::uint64_t k) const {
        auto it = checkpoints.find(k);
        return it == checkpoints.end() ? nullptr : &it->second;
    }
};

struct RunHooks {
    std::function<void(const std::string&)> on_warning;
    /// (epoch, mean recorded component loss over the epoch)
    std::function<void(std::uint64_t, double)> on_epoch;

    void warn(const std::string& msg) const {
        if (on_warning)
            on_warning(msg);
        else
            std::cerr << "warning: " << msg << '\n';
    }
};

/// Iterates with norm or loss beyond this are treated as divergence.
inline constexpr double kDivergenceBound = 1e12;

/// x - eta * g. Shared by the optimizer and by the analyzer's replay so that
/// replayed iterates are bitwise identical to the recorded run.
inline ParamVector sgd_step(const ParamVector& x, const ParamVector& g, double eta) {
    return axpy(-eta, g, x);
}

/// Constant-step SGD with cyclic sampling and per-epoch reshuffle:
/// x_{k+1} = x_k - eta * grad l_{xi_k}(x_k), xi_{nB+t} = pi_B(t).
inline Trace run(const FiniteSumProblem& p, const ParamVector& x0, const RunConfig& cfg,
                 const RunHooks& hooks = {}) {
    cfg.validate();
    detail::require_same_dim(x0.dim(), p.dim(), "run: x0");
    if (!x0.all_finite()) throw InputError("run: x0 is not finite");
    if (auto L = p.lipschitz_bound(); L && cfg.eta >= 1.0 / *L)
        hooks.warn("learning rate " + std::to_string(cfg.eta) + " >= 1/L = " +
                   std::to_string(1.0 / *L) + "; the eta < 1/L hypothesis does not hold");

    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t n = p.n();
    Trace tr;
    tr.fingerprint = p.fingerprint();
    tr.n = n;
    tr.d = p.dim();
    tr.config = cfg;
    tr.steps.reserve(n * cfg.epochs);

    EpochSchedule schedule(n, cfg.seed);
    ParamVector x = x0;
    std::uint64_t k = 0;

    auto diverge = [&](const std::string& why) {
        tr.status = RunStatus::diverged;
        tr.diagnostic = "diverged after k=" + std::to_string(k) + ": " + why;
        tr.checkpoints[k] = x;
        tr.final_k = k;
        tr.final_iterate = x;
    };

    for (std::uint64_t b = 0; b < cfg.epochs; ++b) {
        const auto order = schedule.epoch(b);
        double epoch_loss = 0.0;
        for (std::uint64_t t = 0; t < n; ++t, ++k) {
            if (cfg.record.records(k, n)) tr.checkpoints[k] = x;
            const std::uint32_t xi = (*order)[t];
            double loss = 0.0;
            ParamVector g;
            try {
                std::tie(loss, g) = p.component_value_grad(xi, x);
            } catch (const NumericError& e) {
                diverge(e.what());
                return tr;
            }
            if (!std::isfinite(loss) || loss > kDivergenceBound) {
                diverge("component loss " + std::to_string(loss));
                return tr;
            }
            tr.steps.push_back({k, xi, loss});
            epoch_loss += loss;
            ParamVector next = sgd_step(x, g, cfg.eta);
            if (!next.all_finite() || norm2(next) > kDivergenceBound) {
                diverge("iterate x_" + std::to_string(k + 1) + " is non-finite or exceeds norm " +
                        std::to_string(kDivergenceBound));
                return tr;
            }
            x = std::move(next);
        }
        if (hooks.on_epoch) hooks.on_epoch(b, epoch_loss / static_cast<double>(n));
    }
    if (cfg.record.records(k, n)) tr.checkpoints[k] = x;
    tr.final_k = k;
    tr.final_iterate = std::move(x);
    tr.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return tr;
}

/// ||x_{nB}|| for every recorded epoch boundary B = 0 .. completed epochs.
inline std::vector<std::pair<std::uint64_t, double>> weight_norm_series(const Trace& t) {
    std::vector<std::pair<std::uint64_t, double>> out;
    std::vector<std::uint64_t> missing;
    for (std::uint64_t b = 0; b <= t.completed_epochs(); ++b) {
        const std::uint64_t k = t.n * b;
        const ParamVector* x = t.checkpoint(k);
        if (!x && k == t.final_k) x = &t.final_iterate;
        if (!x) {
            missing.push_back(k);
            continue;
        }
        out.emplace_back(b, norm2(*x));
    }
    if (!missing.empty())
        throw CoverageError("weight_norm_series: epoch-boundary checkpoints absent", missing);
    return out;
}

}  // namespace starpath
