#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "starpath/error.hpp"
#include "starpath/numcore.hpp"
#include "starpath/problems.hpp"
#include "starpath/schedule.hpp"
#include "starpath/sgdrun.hpp"

namespace starpath {

/// Additive tolerance on distance comparisons in the audits.
inline constexpr double kAuditTolerance = 1e-9;

/// Signed star-convexity residual of one step:
///   l(x_k) - l(x*) + <x* - x_k, grad l(x_k)>.
/// Nonpositive means the step is star-convex toward x*.
inline double star_residual(double loss_k, const ParamVector& grad_k, const ParamVector& x_k,
                            const ParamVector& x_star, double loss_star) {
    return loss_k - loss_star + dot_diff(x_star, x_k, grad_k);
}

struct ReferencePoint {
    ParamVector x_star;
    ReferenceMode origin;
    double achieved_loss = 0.0;  // f(x*)
    double eps_loss = 1e-3;

    /// x* only approximates a common minimizer when f(x*) exceeds eps_loss.
    bool approximate() const { return achieved_loss > eps_loss; }
};

/// How the analyzer obtains iterates that were not checkpointed.
enum class IterateAccess {
    /// Re-run the SGD steps from the nearest earlier checkpoint using the trace's
    /// sampled indices and learning rate. Bitwise identical to the original run.
    replay,
    /// Use checkpoints only; missing iterates raise CoverageError.
    recorded_only,
};

/// Per-step quantities of one epoch walk.
struct StepView {
    std::uint64_t k = 0;
    std::uint64_t t = 0;
    std::uint32_t xi = 0;
    double loss = 0.0;       // l_xi(x_k)
    double loss_next = 0.0;  // l_xi(x_{k+1}); NaN unless post-step losses were requested
    double loss_star = 0.0;  // l_xi(x*)
    double residual = 0.0;   // e_k
    double dist = 0.0;       // ||x_k - x*||
    double dist_next = 0.0;  // ||x_{k+1} - x*||
};

struct EpochWalk {
    std::uint64_t epoch = 0;
    std::vector<StepView> steps;
    double residual = 0.0;  // e_B
    ParamVector start;      // x_{nB}
    ParamVector end;        // x_{n(B+1)}
    std::uint64_t replayed_steps = 0;
    double max_loss_mismatch = 0.0;  // |recomputed - recorded| over the epoch
};

struct LipschitzChoice {
    double value = 0.0;
    std::string source;  // "problem bound" or "estimated (...)"
};

struct EpochAuditRow {
    std::uint64_t epoch = 0;
    double residual = 0.0;
    double dist_start = 0.0;
    double dist_end = 0.0;
    bool checked = false;
    bool vacuous = false;
    bool violated_raw = false;
    bool violated = false;  // after the reference-point slack
    double slack = 0.0;     // squared-distance slack 2 * eta * sum_k l_{xi_k}(x*)
};

struct AuditCounts {
    std::uint64_t checked = 0;
    std::uint64_t vacuous = 0;
    std::uint64_t violated = 0;
    std::uint64_t violated_raw = 0;
};

struct EpochAudit {
    std::vector<EpochAuditRow> rows;
    AuditCounts totals;
    LipschitzChoice lipschitz;
};

struct StepAuditRow {
    std::uint64_t epoch = 0;
    AuditCounts counts;
    std::uint64_t distance_violations = 0;  // ||x_{k+1} - x*|| > ||x_k - x*|| (+ slack)
    std::uint64_t descent_violations = 0;   // l(x_{k+1}) above the smoothness bound
    double slack = 0.0;                     // largest per-step slack applied in the epoch
};

struct StepAudit {
    std::vector<StepAuditRow> rows;
    AuditCounts totals;
    LipschitzChoice lipschitz;
};

struct SubsequencePoint {
    std::uint64_t epoch = 0;
    std::uint64_t k = 0;  // index of the evaluated iterate
    double loss = 0.0;
};

/// Losses of component v along the iterates at which it is sampled.
/// "post" uses x_{nB + pos_B(v)} (right after the update with v); "pre" uses
/// x_{nB + pos_B(v) - 1} (the iterate the gradient of v was taken at).
struct SubsequenceSeries {
    std::uint64_t component = 0;
    std::vector<SubsequencePoint> post;
    std::vector<SubsequencePoint> pre;
};

struct AnalyzerOptions {
    IterateAccess access = IterateAccess::replay;
    double eps_loss = 1e-3;
    /// Epochs that get per-iteration rows and sc fractions: (B + 1) % m == 0.
    /// 0 means the trace's record policy decides.
    std::uint64_t iter_epochs_every = 0;
    bool audits = true;
    bool subsequences = true;
    bool variance = true;
    std::uint64_t lipschitz_trials = 8;
    std::uint64_t lipschitz_seed = 0;
    std::optional<double> lipschitz_override;
};

/// Analysis of one trace against one problem and one reference point.
/// All results are pure functions of (trace, problem, reference, options).
class PathAnalyzer {
public:
    PathAnalyzer(const Trace& trace, const FiniteSumProblem& problem, ReferencePoint ref,
                 AnalyzerOptions opts = {})
        : trace_(trace), problem_(problem), ref_(std::move(ref)), opts_(opts) {
        if (trace.fingerprint != problem.fingerprint())
            throw InputError("trace fingerprint does not match the problem");
        if (trace.n != problem.n() || trace.d != problem.dim())
            throw InputError("trace shape does not match the problem");
        detail::require_same_dim(ref_.x_star.dim(), problem.dim(), "reference point");
        for (std::uint64_t i = 0; i < trace.steps.size(); ++i)
            if (trace.steps[i].k != i) throw InputError("trace per-iteration table has gaps");
        star_losses_.resize(problem.n());
        for (std::uint64_t i = 0; i < problem.n(); ++i)
            star_losses_[i] = problem.component_value(i, ref_.x_star);
    }

    const Trace& trace() const { return trace_; }
    const FiniteSumProblem& problem() const { return problem_; }
    const ReferencePoint& reference() const { return ref_; }
    const AnalyzerOptions& options() const { return opts_; }
    const std::vector<double>& star_losses() const { return star_losses_; }

    std::uint64_t epochs() const { return trace_.completed_epochs(); }

    /// x_k from a checkpoint, or by replay when allowed.
    ParamVector iterate(std::uint64_t k) const {
        if (const ParamVector* x = lookup(k)) return *x;
        if (opts_.access == IterateAccess::recorded_only || k > trace_.final_k)
            throw CoverageError("iterate not recorded", {k});
        auto it = trace_.checkpoints.upper_bound(k);
        if (it == trace_.checkpoints.begin()) throw CoverageError("no checkpoint precedes iterate", {k});
        --it;
        ParamVector x = it->second;
        for (std::uint64_t j = it->first; j < k; ++j)
            x = sgd_step(x, problem_.component_grad(trace_.steps[j].xi, x), trace_.config.eta);
        return x;
    }

    /// Walks epoch B once, computing every per-step quantity.
    /// `start` may supply x_{nB} (e.g. the end of the previous walk).
    EpochWalk walk(std::uint64_t b, bool post_losses, const ParamVector* start = nullptr) const {
        if (b >= epochs())
            throw InputError("epoch " + std::to_string(b) + " not completed (" +
                             std::to_string(epochs()) + " epochs in trace)");
        const std::uint64_t n = trace_.n;
        const std::uint64_t k0 = n * b;
        if (opts_.access == IterateAccess::recorded_only) {
            std::vector<std::uint64_t> missing;
            for (std::uint64_t k = k0; k <= k0 + n; ++k)
                if (!lookup(k)) missing.push_back(k);
            if (!missing.empty())
                throw CoverageError("epoch " + std::to_string(b) + " not fully recorded", missing);
        }

        EpochWalk w;
        w.epoch = b;
        w.steps.reserve(n);
        ParamVector x = start ? *start : iterate(k0);
        w.start = x;
        const ParamVector& xs = ref_.x_star;
        double dist = distance(x, xs);
        for (std::uint64_t t = 0; t < n; ++t) {
            const std::uint64_t k = k0 + t;
            const StepRecord& rec = trace_.steps[k];
            auto [loss, g] = problem_.component_value_grad(rec.xi, x);
            StepView s;
            s.k = k;
            s.t = t;
            s.xi = rec.xi;
            s.loss = loss;
            s.loss_star = star_losses_[rec.xi];
            s.residual = star_residual(loss, g, x, xs, s.loss_star);
            s.dist = dist;
            w.max_loss_mismatch = std::max(w.max_loss_mismatch, std::abs(loss - rec.loss));
            ParamVector next;
            if (const ParamVector* recorded = lookup(k + 1)) {
                next = *recorded;
            } else {
                next = sgd_step(x, g, trace_.config.eta);
                ++w.replayed_steps;
            }
            s.dist_next = distance(next, xs);
            s.loss_next = post_losses ? problem_.component_value(rec.xi, next)
                                      : std::numeric_limits<double>::quiet_NaN();
            w.residual += s.residual;
            dist = s.dist_next;
            w.steps.push_back(s);
            x = std::move(next);
        }
        w.end = std::move(x);
        return w;
    }

    /// e_B: the epoch sum of star residuals.
    double epoch_residual(std::uint64_t b) const { return walk(b, false).residual; }

    /// Fraction of steps in epoch B with e_k < 0 (strict).
    double sc_fraction(std::uint64_t b) const { return fraction_of(walk(b, false)); }

    static double fraction_of(const EpochWalk& w) {
        std::uint64_t neg = 0;
        for (const auto& s : w.steps)
            if (s.residual < 0.0) ++neg;
        return static_cast<double>(neg) / static_cast<double>(w.steps.size());
    }

    /// Uses the problem's global bound when it has one, otherwise estimates a
    /// local constant over the ball around x* that contains every boundary iterate.
    LipschitzChoice lipschitz() const {
        if (opts_.lipschitz_override) return {*opts_.lipschitz_override, "override"};
        if (auto L = problem_.lipschitz_bound()) return {*L, "problem bound"};
        double radius = 0.0;
        for (const auto& [k, x] : trace_.checkpoints)
            if (k % trace_.n == 0) radius = std::max(radius, distance(x, ref_.x_star));
        radius = std::max(radius, distance(trace_.final_iterate, ref_.x_star));
        if (radius == 0.0) radius = 1e-6;
        const double L = estimate_lipschitz(problem_, ref_.x_star, radius,
                                            std::max<std::uint64_t>(1, opts_.lipschitz_trials),
                                            opts_.lipschitz_seed);
        return {L, "estimated (" + std::to_string(opts_.lipschitz_trials) + " trials, radius " +
                       std::to_string(radius) + ")"};
    }

    static bool step_size_ok(double eta, double L) { return L <= 0.0 || eta < 1.0 / L; }

    EpochAuditRow audit_epoch(const EpochWalk& w, double eta, double L) const {
        EpochAuditRow row;
        row.epoch = w.epoch;
        row.residual = w.residual;
        row.dist_start = distance(w.start, ref_.x_star);
        row.dist_end = distance(w.end, ref_.x_star);
        double star_sum = 0.0;
        for (const auto& s : w.steps) star_sum += s.loss_star;
        row.slack = 2.0 * eta * star_sum;
        row.checked = w.residual <= 0.0 && step_size_ok(eta, L);
        row.vacuous = !row.checked;
        if (row.checked) {
            row.violated_raw = row.dist_end > row.dist_start + kAuditTolerance;
            row.violated = row.dist_end >
                           std::sqrt(row.dist_start * row.dist_start + row.slack) + kAuditTolerance;
        }
        return row;
    }

    /// Requires a walk with post-step losses.
    StepAuditRow audit_steps(const EpochWalk& w, double eta, double L) const {
        StepAuditRow row;
        row.epoch = w.epoch;
        const bool eta_ok = step_size_ok(eta, L);
        for (const auto& s : w.steps) {
            const bool premise = s.residual <= 0.0 && eta_ok && s.loss_star <= ref_.eps_loss;
            if (!premise) {
                ++row.counts.vacuous;
                continue;
            }
            ++row.counts.checked;
            const double slack = 2.0 * eta * s.loss_star;
            row.slack = std::max(row.slack, slack);
            const bool dist_raw = s.dist_next > s.dist + kAuditTolerance;
            const bool dist_bad = s.dist_next > std::sqrt(s.dist * s.dist + slack) + kAuditTolerance;
            const bool descent_bad =
                s.loss_next > s.loss_star +
                                  (s.dist * s.dist - s.dist_next * s.dist_next) / (2.0 * eta) +
                                  kAuditTolerance;
            if (dist_bad) ++row.distance_violations;
            if (descent_bad) ++row.descent_violations;
            if (dist_bad || descent_bad) ++row.counts.violated;
            if (dist_raw || descent_bad) ++row.counts.violated_raw;
        }
        return row;
    }

    /// Per-epoch check: e_B <= 0 and eta < 1/L imply the
    /// distance to x* does not grow across the epoch.
    EpochAudit epoch_monotonicity_audit(double eta, const LipschitzChoice& L) const {
        EpochAudit out;
        out.lipschitz = L;
        std::optional<ParamVector> carry;
        for (std::uint64_t b = 0; b < epochs(); ++b) {
            EpochWalk w = walk(b, false, carry ? &*carry : nullptr);
            out.rows.push_back(audit_epoch(w, eta, L.value));
            accumulate(out.totals, out.rows.back());
            carry = std::move(w.end);
        }
        return out;
    }

    /// Per-step check: wherever e_k <= 0, eta < 1/L and l_xi(x*) <= eps_loss,
    /// ||x_{k+1} - x*|| <= ||x_k - x*|| and
    /// l_xi(x_{k+1}) <= l_xi(x*) + (||x_k - x*||^2 - ||x_{k+1} - x*||^2) / (2 eta).
    StepAudit per_step_audit(double eta, const LipschitzChoice& L) const {
        StepAudit out;
        out.lipschitz = L;
        std::optional<ParamVector> carry;
        for (std::uint64_t b = 0; b < epochs(); ++b) {
            if (opts_.access == IterateAccess::recorded_only && !epoch_recorded(b)) {
                carry.reset();
                continue;
            }
            EpochWalk w = walk(b, true, carry ? &*carry : nullptr);
            out.rows.push_back(audit_steps(w, eta, L.value));
            const auto& c = out.rows.back().counts;
            out.totals.checked += c.checked;
            out.totals.vacuous += c.vacuous;
            out.totals.violated += c.violated;
            out.totals.violated_raw += c.violated_raw;
            carry = std::move(w.end);
        }
        return out;
    }

    bool epoch_recorded(std::uint64_t b) const {
        for (std::uint64_t k = trace_.n * b; k <= trace_.n * (b + 1); ++k)
            if (!lookup(k)) return false;
        return true;
    }

    /// Losses of component v along the iterates where it is sampled, located through the schedule's
    /// inverse permutation. Post-update losses need x_{nB+pos}; in recorded_only
    /// mode epochs without that iterate are skipped.
    SubsequenceSeries subsequence_losses(std::uint64_t v) const {
        const EpochSchedule schedule(trace_.n, trace_.config.seed);
        SubsequenceSeries out;
        out.component = v;
        std::vector<std::uint64_t> missing;
        for (std::uint64_t b = 0; b < epochs(); ++b) {
            const std::uint64_t pos = schedule.inverse_position(b, v);
            const std::uint64_t k_pre = trace_.n * b + pos - 1;
            check_sampled(k_pre, v);
            out.pre.push_back({b, k_pre, trace_.steps[k_pre].loss});
            const std::uint64_t k_post = k_pre + 1;
            if (opts_.access == IterateAccess::recorded_only && !lookup(k_post)) {
                missing.push_back(k_post);
                continue;
            }
            out.post.push_back({b, k_post, problem_.component_value(v, iterate(k_post))});
        }
        if (out.post.empty() && !missing.empty())
            throw CoverageError("no post-update iterate recorded for component " + std::to_string(v),
                                missing);
        return out;
    }

    /// Every component's subsequences from one walk per epoch.
    std::vector<SubsequenceSeries> all_subsequences() const {
        const EpochSchedule schedule(trace_.n, trace_.config.seed);
        std::vector<SubsequenceSeries> out(trace_.n);
        for (std::uint64_t v = 0; v < trace_.n; ++v) out[v].component = v;
        std::optional<ParamVector> carry;
        for (std::uint64_t b = 0; b < epochs(); ++b) {
            EpochWalk w = walk(b, true, carry ? &*carry : nullptr);
            collect_subsequences(schedule, w, out);
            carry = std::move(w.end);
        }
        return out;
    }

    void collect_subsequences(const EpochSchedule& schedule, const EpochWalk& w,
                              std::vector<SubsequenceSeries>& out) const {
        for (std::uint64_t v = 0; v < trace_.n; ++v) {
            const std::uint64_t pos = schedule.inverse_position(w.epoch, v);
            const StepView& s = w.steps[pos - 1];
            check_sampled(s.k, v);
            out[v].pre.push_back({w.epoch, s.k, s.loss});
            out[v].post.push_back({w.epoch, s.k + 1, s.loss_next});
        }
    }

    /// Gradient variance at every epoch boundary x_{nB}, B = 0 .. epochs.
    std::vector<std::pair<std::uint64_t, double>> variance_series() const {
        std::vector<std::pair<std::uint64_t, double>> out;
        for (std::uint64_t b = 0; b <= epochs(); ++b)
            out.emplace_back(b, full_gradient_stats(problem_, iterate(trace_.n * b)).variance);
        return out;
    }

private:
    const ParamVector* lookup(std::uint64_t k) const {
        if (const ParamVector* x = trace_.checkpoint(k)) return x;
        if (k == trace_.final_k) return &trace_.final_iterate;
        return nullptr;
    }

    void check_sampled(std::uint64_t k, std::uint64_t v) const {
        if (trace_.steps[k].xi != v)
            throw InputError("schedule disagrees with the trace at k=" + std::to_string(k));
    }

    static void accumulate(AuditCounts& c, const EpochAuditRow& r) {
        c.checked += r.checked ? 1 : 0;
        c.vacuous += r.vacuous ? 1 : 0;
        c.violated += r.violated ? 1 : 0;
        c.violated_raw += r.violated_raw ? 1 : 0;
    }

    const Trace& trace_;
    const FiniteSumProblem& problem_;
    ReferencePoint ref_;
    AnalyzerOptions opts_;
    std::vector<double> star_losses_;
};

/// Resolves the configured reference mode against a trace.
inline ReferencePoint make_reference(const Trace& trace, const FiniteSumProblem& p,
                                     const ReferenceMode& mode, double eps_loss = 1e-3,
                                     IterateAccess access = IterateAccess::replay) {
    ReferencePoint ref;
    ref.origin = mode;
    ref.eps_loss = eps_loss;
    switch (mode.kind) {
        case ReferenceMode::Kind::final_iterate:
            ref.x_star = trace.final_iterate;
            break;
        case ReferenceMode::Kind::planted: {
            auto x = p.planted_minimizer();
            if (!x) throw InputError("reference 'planted' requested but the problem has no planted minimizer");
            ref.x_star = std::move(*x);
            break;
        }
        case ReferenceMode::Kind::epoch_end: {
            if (mode.epoch > trace.completed_epochs())
                throw InputError("reference epoch " + std::to_string(mode.epoch) +
                                 " beyond the trace's " + std::to_string(trace.completed_epochs()) +
                                 " epochs");
            ReferencePoint probe;
            probe.x_star = trace.final_iterate;
            AnalyzerOptions o;
            o.access = access;
            ref.x_star = PathAnalyzer(trace, p, probe, o).iterate(trace.n * mode.epoch);
            break;
        }
    }
    ref.achieved_loss = full_value(p, ref.x_star);
    return ref;
}

// Free-function forms of the analyzer operations.

inline double epoch_residual(const Trace& t, const FiniteSumProblem& p, std::uint64_t b,
                             const ReferencePoint& ref,
                             IterateAccess access = IterateAccess::replay) {
    AnalyzerOptions o;
    o.access = access;
    return PathAnalyzer(t, p, ref, o).epoch_residual(b);
}

inline double sc_fraction(const Trace& t, const FiniteSumProblem& p, std::uint64_t b,
                          const ReferencePoint& ref, IterateAccess access = IterateAccess::replay) {
    AnalyzerOptions o;
    o.access = access;
    return PathAnalyzer(t, p, ref, o).sc_fraction(b);
}

/// ||x_{nB} - x*|| at every epoch boundary, from recorded iterates only.
inline std::vector<std::pair<std::uint64_t, double>> distance_series(const Trace& t,
                                                                     const ReferencePoint& ref) {
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
        out.emplace_back(b, distance(*x, ref.x_star));
    }
    if (!missing.empty()) throw CoverageError("distance_series: epoch boundaries absent", missing);
    return out;
}

inline EpochAudit epoch_monotonicity_audit(const Trace& t, const FiniteSumProblem& p,
                                           const ReferencePoint& ref, double eta, double L_hat) {
    return PathAnalyzer(t, p, ref).epoch_monotonicity_audit(eta, {L_hat, "caller"});
}

inline StepAudit per_step_audit(const Trace& t, const FiniteSumProblem& p,
                                const ReferencePoint& ref, double eta, double L_hat) {
    return PathAnalyzer(t, p, ref).per_step_audit(eta, {L_hat, "caller"});
}

inline SubsequenceSeries subsequence_losses(const Trace& t, const FiniteSumProblem& p,
                                            std::uint64_t v, const ReferencePoint& ref,
                                            IterateAccess access = IterateAccess::replay) {
    AnalyzerOptions o;
    o.access = access;
    return PathAnalyzer(t, p, ref, o).subsequence_losses(v);
}

inline std::vector<std::pair<std::uint64_t, double>> variance_series(const Trace& t,
                                                                     const FiniteSumProblem& p) {
    ReferencePoint probe;
    probe.x_star = t.final_iterate;
    return PathAnalyzer(t, p, probe).variance_series();
}

// ---------------------------------------------------------------------------
// Full report

struct EpochRow {
    std::uint64_t epoch = 0;
    double residual = 0.0;     // e_B
    double dist = 0.0;         // ||x_{nB} - x*||
    double full_loss = 0.0;    // f(x_{nB})
    double variance = 0.0;     // gradient variance at x_{nB}
    double weight_norm = 0.0;  // ||x_{nB}||
};

struct IterRow {
    std::uint64_t k = 0;
    std::uint64_t epoch = 0;
    std::uint64_t t = 0;
    std::uint32_t xi = 0;
    double residual = 0.0;  // e_k
    double component_loss = 0.0;
};

struct PathReport {
    ReferencePoint reference;
    std::vector<EpochRow> epochs;
    /// Boundary after the last epoch: distance, loss, variance and norm at x_{nE}.
    EpochRow final_boundary;
    std::vector<IterRow> iters;
    std::vector<std::pair<std::uint64_t, double>> sc_fraction;
    std::vector<SubsequenceSeries> subsequences;
    std::optional<EpochAudit> epoch_audit;
    std::optional<StepAudit> step_audit;
    LipschitzChoice lipschitz;
    std::uint64_t replayed_steps = 0;
    double max_loss_mismatch = 0.0;
};

/// One walk per epoch, in order, producing every series.
inline PathReport analyze_path(const Trace& trace, const FiniteSumProblem& p,
                               const ReferencePoint& ref, const AnalyzerOptions& opts = {}) {
    PathAnalyzer an(trace, p, ref, opts);
    PathReport rep;
    rep.reference = ref;
    const bool post = opts.audits || opts.subsequences;
    const double eta = trace.config.eta;
    if (opts.audits) {
        rep.lipschitz = an.lipschitz();
        rep.epoch_audit.emplace();
        rep.epoch_audit->lipschitz = rep.lipschitz;
        rep.step_audit.emplace();
        rep.step_audit->lipschitz = rep.lipschitz;
    }
    const EpochSchedule schedule(trace.n, trace.config.seed);
    if (opts.subsequences) {
        rep.subsequences.resize(trace.n);
        for (std::uint64_t v = 0; v < trace.n; ++v) rep.subsequences[v].component = v;
    }

    auto boundary_row = [&](std::uint64_t b, const ParamVector& x) {
        EpochRow row;
        row.epoch = b;
        row.dist = distance(x, ref.x_star);
        row.weight_norm = norm2(x);
        if (opts.variance) {
            const auto stats = full_gradient_stats(p, x);
            row.variance = stats.variance;
        }
        row.full_loss = full_value(p, x);
        return row;
    };

    auto iter_epoch = [&](std::uint64_t b) {
        if (opts.iter_epochs_every > 0) return (b + 1) % opts.iter_epochs_every == 0;
        return trace.config.record.detail_epoch(b);
    };

    std::optional<ParamVector> carry;
    for (std::uint64_t b = 0; b < an.epochs(); ++b) {
        EpochWalk w = an.walk(b, post, carry ? &*carry : nullptr);
        rep.replayed_steps += w.replayed_steps;
        rep.max_loss_mismatch = std::max(rep.max_loss_mismatch, w.max_loss_mismatch);
        EpochRow row = boundary_row(b, w.start);
        row.residual = w.residual;
        rep.epochs.push_back(row);
        if (iter_epoch(b)) {
            for (const auto& s : w.steps)
                rep.iters.push_back({s.k, b, s.t, s.xi, s.residual, s.loss});
            rep.sc_fraction.emplace_back(b, PathAnalyzer::fraction_of(w));
        }
        if (opts.audits) {
            rep.epoch_audit->rows.push_back(an.audit_epoch(w, eta, rep.lipschitz.value));
            const auto& er = rep.epoch_audit->rows.back();
            rep.epoch_audit->totals.checked += er.checked;
            rep.epoch_audit->totals.vacuous += er.vacuous;
            rep.epoch_audit->totals.violated += er.violated;
            rep.epoch_audit->totals.violated_raw += er.violated_raw;
            rep.step_audit->rows.push_back(an.audit_steps(w, eta, rep.lipschitz.value));
            const auto& c = rep.step_audit->rows.back().counts;
            rep.step_audit->totals.checked += c.checked;
            rep.step_audit->totals.vacuous += c.vacuous;
            rep.step_audit->totals.violated += c.violated;
            rep.step_audit->totals.violated_raw += c.violated_raw;
        }
        if (opts.subsequences) an.collect_subsequences(schedule, w, rep.subsequences);
        carry = std::move(w.end);
    }
    rep.final_boundary =
        boundary_row(an.epochs(), carry ? *carry : an.iterate(trace.n * an.epochs()));
    return rep;
}

}  // namespace starpath
