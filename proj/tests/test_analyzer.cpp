#include <gtest/gtest.h>

#include <cmath>

#include "starpath/analyzer.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace starpath;
using sptest::FunctionalProblem;

namespace {

RunConfig config(double eta, std::uint64_t epochs, std::uint64_t seed, RecordPolicy rec) {
    RunConfig c;
    c.eta = eta;
    c.epochs = epochs;
    c.seed = seed;
    c.record = rec;
    return c;
}

ReferencePoint planted_ref(const Trace& t, const FiniteSumProblem& p) {
    return make_reference(t, p, ReferenceMode::planted());
}

/// Shared convex run: consistent least squares, eta = 0.9 / L.
struct ConvexRun {
    std::unique_ptr<LeastSquaresProblem> p = make_consistent_least_squares(50, 100, 7);
    Trace trace;
    ReferencePoint ref;
    double eta = 0.0;

    ConvexRun(std::uint64_t epochs, RecordPolicy rec) {
        eta = 0.9 / *p->lipschitz_bound();
        trace = run(*p, ParamVector::zeros(100), config(eta, epochs, 1, rec));
        ref = planted_ref(trace, *p);
    }
};

const ConvexRun& convex_run() {
    static const ConvexRun r(200, RecordPolicy::standard());
    return r;
}

/// Two quadratics that are star-convex toward 1 and two phase components that
/// are not near x = -0.5; a tiny step keeps the iterate in that region.
FunctionalProblem half_fixture() {
    return FunctionalProblem(1,
                             {sptest::quadratic(1.0, ParamVector{1.0}), sptest::phase_1d(),
                              sptest::quadratic(1.0, ParamVector{1.0}), sptest::phase_1d()},
                             "half", ParamVector{1.0});
}

/// Two-component 1-D instance whose epochs mix positive and negative e_B.
FunctionalProblem mixed_fixture() {
    return FunctionalProblem(1, {sptest::quadratic(0.1, ParamVector{1.0}), sptest::phase_1d()},
                             "mixed", ParamVector{1.0});
}

}  // namespace

TEST(StarResidual, ConvexQuadraticExample) {
    EXPECT_EQ(star_residual(0.5, ParamVector{1.0}, ParamVector{1.0}, ParamVector{0.0}, 0.0), -0.5);
}

TEST(StarResidual, ZeroAtReference) {
    const ParamVector x{0.3, -2.0};
    EXPECT_EQ(star_residual(1.7, ParamVector{5.0, 1.0}, x, x, 1.7), 0.0);
}

TEST(StarResidual, PhaseRetrievalNegativeExample) {
    auto c = sptest::phase_1d();
    const ParamVector x{-0.5};
    EXPECT_NEAR(star_residual(c.value(x), c.grad(x), x, ParamVector{1.0}, 0.0), 0.703125, 1e-12);
}

TEST(MakeReference, ModesResolve) {
    const auto& r = convex_run();
    const auto fin = make_reference(r.trace, *r.p, ReferenceMode::final_iterate());
    EXPECT_EQ(fin.x_star, r.trace.final_iterate);
    EXPECT_FALSE(fin.approximate());
    const auto mid = make_reference(r.trace, *r.p, ReferenceMode::epoch_end(15));
    PathAnalyzer an(r.trace, *r.p, fin);
    EXPECT_EQ(mid.x_star, an.iterate(15 * 50));
    EXPECT_THROW(make_reference(r.trace, *r.p, ReferenceMode::epoch_end(201)), InputError);

    auto q = mixed_fixture();
    FunctionalProblem no_plant(1, {sptest::phase_1d()}, "np");
    const Trace t = run(no_plant, ParamVector{0.5}, config(0.1, 3, 0, RecordPolicy::full_trace()));
    EXPECT_THROW(make_reference(t, no_plant, ReferenceMode::planted()), InputError);
    const auto far = make_reference(t, no_plant, ReferenceMode::epoch_end(0), 1e-3);
    EXPECT_TRUE(far.approximate());
}

TEST(PathAnalyzer, RejectsForeignTrace) {
    const auto& r = convex_run();
    auto other = make_consistent_least_squares(50, 100, 8);
    EXPECT_THROW(PathAnalyzer(r.trace, *other, r.ref), InputError);
}

TEST(EpochResidual, ConvexRunNonpositiveEveryEpoch) {
    const auto& r = convex_run();
    PathAnalyzer an(r.trace, *r.p, r.ref);
    for (std::uint64_t b = 0; b < an.epochs(); ++b) EXPECT_LE(an.epoch_residual(b), 0.0) << b;
}

TEST(EpochResidual, SingleComponentEqualsStepResidual) {
    FunctionalProblem p(1, {sptest::phase_1d()}, "one", ParamVector{1.0});
    const Trace t = run(p, ParamVector{-0.5}, config(0.01, 4, 0, RecordPolicy::full_trace()));
    const auto ref = planted_ref(t, p);
    for (std::uint64_t b = 0; b < 4; ++b) {
        const ParamVector& x = t.checkpoints.at(b);
        const double e = star_residual(p.component_value(0, x), p.component_grad(0, x), x,
                                       ref.x_star, 0.0);
        EXPECT_EQ(epoch_residual(t, p, b, ref), e);
    }
}

TEST(EpochResidual, MatchesIndependentDoublePass) {
    auto p = make_phase_retrieval(12, 5, 3);
    ParamVector x0 = *p->planted_minimizer();
    x0[0] += 0.4;
    x0[3] -= 0.3;
    const Trace t = run(*p, x0, config(0.01, 8, 4, RecordPolicy::full_trace()));
    const auto ref = planted_ref(t, *p);
    PathAnalyzer an(t, *p, ref);
    for (std::uint64_t b = 0; b < 8; ++b) {
        std::vector<ParamVector> xs;
        std::vector<std::uint32_t> xis;
        for (std::uint64_t k = 12 * b; k < 12 * (b + 1); ++k) {
            xs.push_back(t.checkpoints.at(k));
            xis.push_back(t.steps[k].xi);
        }
        const double oracle = sptest::brute_epoch_residual(*p, xs, xis, ref.x_star);
        EXPECT_NEAR(an.epoch_residual(b), oracle, 1e-9);
        double sum = 0.0;
        for (const auto& s : an.walk(b, false).steps) sum += s.residual;
        EXPECT_NEAR(an.epoch_residual(b), sum, 1e-9);
    }
}

TEST(EpochResidual, RecordedOnlyListsMissingIterates) {
    auto p = make_consistent_least_squares(4, 6, 1);
    const Trace t = run(*p, ParamVector::zeros(6), config(0.01, 3, 0, RecordPolicy::epoch_boundaries()));
    const auto ref = planted_ref(t, *p);
    try {
        epoch_residual(t, *p, 1, ref, IterateAccess::recorded_only);
        FAIL();
    } catch (const CoverageError& e) {
        EXPECT_EQ(e.missing(), (std::vector<std::uint64_t>{5, 6, 7}));
    }
    // Replay reconstructs the same value a full trace yields.
    const Trace full = run(*p, ParamVector::zeros(6), config(0.01, 3, 0, RecordPolicy::full_trace()));
    EXPECT_EQ(epoch_residual(t, *p, 1, ref), epoch_residual(full, *p, 1, ref, IterateAccess::recorded_only));
    EXPECT_THROW(epoch_residual(t, *p, 3, ref), InputError);
}

TEST(Replay, BitwiseIdenticalToRecordedRun) {
    auto p = make_phase_retrieval(9, 4, 6);
    ParamVector x0{0.2, 0.1, -0.3, 0.5};
    const auto sparse = run(*p, x0, config(0.02, 10, 3, RecordPolicy::epoch_boundaries()));
    const auto full = run(*p, x0, config(0.02, 10, 3, RecordPolicy::full_trace()));
    const auto ref = make_reference(full, *p, ReferenceMode::final_iterate());
    PathAnalyzer an(sparse, *p, ref);
    for (const auto& [k, x] : full.checkpoints) EXPECT_EQ(an.iterate(k), x) << k;
}

TEST(DistanceSeries, FinalReferenceEndsAtZero) {
    const auto& r = convex_run();
    const auto s = distance_series(r.trace, make_reference(r.trace, *r.p, ReferenceMode::final_iterate()));
    ASSERT_EQ(s.size(), 201u);
    EXPECT_LE(s.back().second, 1e-12);
}

TEST(DistanceSeries, ConvexRunNonincreasingToPlanted) {
    const auto& r = convex_run();
    const auto s = distance_series(r.trace, r.ref);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i].second, s[i - 1].second + 1e-9);
}

TEST(DistanceSeries, ConstantIterateConstantSeries) {
    FunctionalProblem p(2, {sptest::quadratic(1.0, ParamVector{1.0, 1.0})}, "still");
    const Trace t = run(p, ParamVector{1.0, 1.0}, config(0.3, 5, 0, RecordPolicy::epoch_boundaries()));
    ReferencePoint ref;
    ref.x_star = ParamVector{0.0, 0.0};
    for (const auto& [b, d] : distance_series(t, ref)) EXPECT_EQ(d, std::sqrt(2.0));
}

TEST(EpochAudit, ConvexRunHasNoViolations) {
    const auto& r = convex_run();
    const auto audit = epoch_monotonicity_audit(r.trace, *r.p, r.ref, r.eta, *r.p->lipschitz_bound());
    EXPECT_EQ(audit.totals.violated, 0u);
    EXPECT_EQ(audit.totals.violated_raw, 0u);
    EXPECT_EQ(audit.totals.checked, 200u);
}

TEST(EpochAudit, PositiveResidualIsVacuous) {
    auto p = mixed_fixture();
    const Trace t = run(p, ParamVector{-0.5}, config(0.001, 2, 0, RecordPolicy::full_trace()));
    // Near -0.5 the phase component dominates: e_B > 0.
    const auto ref = planted_ref(t, p);
    ASSERT_GT(epoch_residual(t, p, 0, ref), 0.0);
    const auto audit = epoch_monotonicity_audit(t, p, ref, 0.001, 1.0);
    EXPECT_TRUE(audit.rows[0].vacuous);
    EXPECT_FALSE(audit.rows[0].violated);
}

TEST(EpochAudit, TwoComponentInstanceMatchesBruteForce) {
    auto p = mixed_fixture();
    const double eta = 0.1, L = 3.0;
    const Trace t = run(p, ParamVector{0.1}, config(eta, 40, 5, RecordPolicy::full_trace()));
    const auto ref = planted_ref(t, p);
    const auto audit = epoch_monotonicity_audit(t, p, ref, eta, L);
    ASSERT_EQ(audit.rows.size(), 40u);
    std::uint64_t vacuous = 0;
    for (std::uint64_t b = 0; b < 40; ++b) {
        const ParamVector& a = t.checkpoints.at(2 * b);
        const ParamVector& mid = t.checkpoints.at(2 * b + 1);
        const ParamVector& z = t.checkpoints.at(2 * b + 2);
        const double e = sptest::brute_epoch_residual(p, {a, mid}, {t.steps[2 * b].xi, t.steps[2 * b + 1].xi},
                                                      ref.x_star);
        const bool checked = e <= 0.0 && eta < 1.0 / L;
        const bool violated = checked && std::abs(z[0] - 1.0) > std::abs(a[0] - 1.0) + 1e-9;
        EXPECT_EQ(audit.rows[b].checked, checked) << b;
        EXPECT_EQ(audit.rows[b].violated, violated) << b;
        EXPECT_EQ(audit.rows[b].slack, 0.0);
        vacuous += checked ? 0 : 1;
    }
    EXPECT_EQ(audit.totals.vacuous, vacuous);
    EXPECT_GT(vacuous, 0u);
    EXPECT_LT(vacuous, 40u);
}

TEST(EpochAudit, StepAboveInverseLipschitzIsUnchecked) {
    auto p = make_consistent_least_squares(50, 100, 7);
    const double L = *p->lipschitz_bound();
    RunHooks quiet;
    quiet.on_warning = [](const std::string&) {};
    const Trace t = run(*p, ParamVector::zeros(100), config(1.5 / L, 20, 1, RecordPolicy::standard()), quiet);
    ASSERT_EQ(t.status, RunStatus::completed);
    const auto ref = planted_ref(t, *p);
    const auto ea = epoch_monotonicity_audit(t, *p, ref, 1.5 / L, L);
    EXPECT_EQ(ea.totals.checked, 0u);
    EXPECT_EQ(ea.totals.vacuous, 20u);
    EXPECT_EQ(ea.totals.violated, 0u);
    const auto sa = per_step_audit(t, *p, ref, 1.5 / L, L);
    EXPECT_EQ(sa.totals.checked, 0u);
    EXPECT_EQ(sa.totals.vacuous, 20u * 50);
    EXPECT_EQ(sa.totals.violated, 0u);
}

TEST(StepAudit, ConvexRunHasNoViolations) {
    const auto& r = convex_run();
    const auto audit = per_step_audit(r.trace, *r.p, r.ref, r.eta, *r.p->lipschitz_bound());
    EXPECT_EQ(audit.totals.checked, 200u * 50);
    EXPECT_EQ(audit.totals.violated, 0u);
    EXPECT_EQ(audit.totals.violated_raw, 0u);
}

TEST(StepAudit, PositiveStepResidualIsVacuous) {
    auto p = half_fixture();
    const Trace t = run(p, ParamVector{-0.5}, config(1e-6, 1, 0, RecordPolicy::full_trace()));
    const auto audit = per_step_audit(t, p, planted_ref(t, p), 1e-6, 4.0);
    EXPECT_EQ(audit.totals.vacuous, 2u);
    EXPECT_EQ(audit.totals.checked, 2u);
    EXPECT_EQ(audit.totals.violated, 0u);
}

TEST(StepAudit, GeometricContractionByHand) {
    // l = (x - 1)^2, L = 2, eta = 0.25: x_k - 1 = -(1/2)^k from x0 = 0.
    FunctionalProblem p(1, {sptest::quadratic(2.0, ParamVector{1.0})}, "geo", ParamVector{1.0}, 2.0);
    const Trace t = run(p, ParamVector{0.0}, config(0.25, 12, 0, RecordPolicy::full_trace()));
    const auto ref = planted_ref(t, p);
    PathAnalyzer an(t, p, ref);
    for (std::uint64_t k = 0; k < 12; ++k) {
        const auto w = an.walk(k, true);
        const auto& s = w.steps[0];
        EXPECT_EQ(s.dist, std::ldexp(1.0, -static_cast<int>(k)));
        EXPECT_EQ(s.dist_next, std::ldexp(1.0, -static_cast<int>(k) - 1));
        // Descent bound: 0.25^{k+1} <= (0.25^k - 0.25^{k+1}) / 0.5
        EXPECT_LE(s.loss_next, (s.dist * s.dist - s.dist_next * s.dist_next) / 0.5);
    }
    const auto audit = per_step_audit(t, p, ref, 0.25, 2.0);
    EXPECT_EQ(audit.totals.checked, 12u);
    EXPECT_EQ(audit.totals.violated, 0u);
}

TEST(ScFraction, ConvexInstanceIsOne) {
    const auto& r = convex_run();
    EXPECT_EQ(sc_fraction(r.trace, *r.p, 9, r.ref), 1.0);
    EXPECT_EQ(sc_fraction(r.trace, *r.p, 9, r.ref, IterateAccess::recorded_only), 1.0);
}

TEST(ScFraction, HalfReflectedComponentsGiveOneHalf) {
    auto p = half_fixture();
    const Trace t = run(p, ParamVector{-0.5}, config(1e-6, 3, 2, RecordPolicy::full_trace()));
    const auto ref = planted_ref(t, p);
    for (std::uint64_t b = 0; b < 3; ++b) EXPECT_EQ(sc_fraction(t, p, b, ref), 0.5);
}

TEST(ScFraction, SingleComponentIsZeroOrOne) {
    FunctionalProblem p(1, {sptest::phase_1d()}, "one", ParamVector{1.0});
    const Trace t = run(p, ParamVector{-0.5}, config(0.05, 30, 0, RecordPolicy::full_trace()));
    const auto ref = planted_ref(t, p);
    for (std::uint64_t b = 0; b < 30; ++b) {
        const double f = sc_fraction(t, p, b, ref);
        EXPECT_TRUE(f == 0.0 || f == 1.0);
    }
}

TEST(ScFraction, InvariantUnderRelabeling) {
    auto p = make_phase_retrieval(8, 3, 5);
    ParamVector x0 = *p->planted_minimizer();
    x0[1] += 0.9;
    const Trace t = run(*p, x0, config(0.01, 5, 3, RecordPolicy::full_trace()));
    const auto ref = planted_ref(t, *p);

    // Same components under new names sigma(i) = (3i + 1) mod 8; trace relabeled to match.
    std::vector<FunctionalProblem::Component> comps(8);
    for (std::uint32_t i = 0; i < 8; ++i) {
        const std::uint32_t j = (3 * i + 1) % 8;
        comps[j] = {[&p, i](const ParamVector& x) { return p->component_value(i, x); },
                    [&p, i](const ParamVector& x) { return p->component_grad(i, x); }};
    }
    FunctionalProblem q(3, std::move(comps), "relabeled", p->planted_minimizer());
    Trace u = t;
    u.fingerprint = q.fingerprint();
    for (auto& s : u.steps) s.xi = (3 * s.xi + 1) % 8;
    for (std::uint64_t b = 0; b < 5; ++b)
        EXPECT_EQ(sc_fraction(t, *p, b, ref), sc_fraction(u, q, b, ref)) << b;
}

TEST(Subsequences, ConvexRunMinimizesEveryComponent) {
    const auto& r = convex_run();
    PathAnalyzer an(r.trace, *r.p, r.ref);
    for (const auto& s : an.all_subsequences()) {
        ASSERT_EQ(s.post.size(), 200u);
        EXPECT_LE(s.post.back().loss, 1e-10) << "component " << s.component;
        EXPECT_LE(s.pre.back().loss, 1e-10);
    }
}

TEST(Subsequences, SingleComponentIsLossSeries) {
    FunctionalProblem p(1, {sptest::quadratic(1.0, ParamVector{2.0})}, "one", ParamVector{2.0}, 1.0);
    const Trace t = run(p, ParamVector{0.0}, config(0.3, 10, 0, RecordPolicy::epoch_boundaries()));
    const auto s = subsequence_losses(t, p, 0, planted_ref(t, p));
    ASSERT_EQ(s.pre.size(), 10u);
    for (std::uint64_t k = 0; k < 10; ++k) {
        EXPECT_EQ(s.pre[k].loss, t.steps[k].loss);
        if (k + 1 < 10) EXPECT_EQ(s.post[k].loss, t.steps[k + 1].loss);
    }
}

TEST(Subsequences, IndicesMatchLinearScanOfTrace) {
    auto p = make_consistent_least_squares(9, 12, 2);
    const Trace t = run(*p, ParamVector::zeros(12), config(0.01, 15, 8, RecordPolicy::standard()));
    const auto ref = planted_ref(t, *p);
    PathAnalyzer an(t, *p, ref);
    const auto all = an.all_subsequences();
    for (std::uint64_t v = 0; v < 9; ++v) {
        std::vector<std::uint64_t> scan;
        for (const auto& s : t.steps)
            if (s.xi == v) scan.push_back(s.k);
        const auto one = an.subsequence_losses(v);
        ASSERT_EQ(one.pre.size(), scan.size());
        for (std::size_t b = 0; b < scan.size(); ++b) {
            EXPECT_EQ(one.pre[b].k, scan[b]);
            EXPECT_EQ(one.post[b].k, scan[b] + 1);
            EXPECT_EQ(all[v].post[b].k, scan[b] + 1);
            EXPECT_EQ(all[v].post[b].loss, one.post[b].loss);
            EXPECT_EQ(all[v].pre[b].loss, one.pre[b].loss);
        }
    }
}

TEST(Subsequences, RecordedOnlySubsamples) {
    auto p = make_consistent_least_squares(5, 7, 2);
    const Trace t = run(*p, ParamVector::zeros(7), config(0.01, 20, 8, RecordPolicy::standard()));
    const auto s = subsequence_losses(t, *p, 3, planted_ref(t, *p), IterateAccess::recorded_only);
    EXPECT_EQ(s.pre.size(), 20u);
    EXPECT_GE(s.post.size(), 2u);
    EXPECT_LT(s.post.size(), 20u);
}

TEST(VarianceSeries, ZeroAtCommonMinimizer) {
    auto p = make_consistent_least_squares(6, 8, 3);
    const Trace t = run(*p, *p->planted_minimizer(), config(0.01, 3, 0, RecordPolicy::epoch_boundaries()));
    for (const auto& [b, v] : variance_series(t, *p)) EXPECT_LE(v, 1e-20);
}

TEST(VarianceSeries, ConvexRunVanishes) {
    const auto& r = convex_run();
    const auto s = variance_series(r.trace, *r.p);
    EXPECT_LE(s.back().second, 1e-8);
    EXPECT_GT(s.front().second, s.back().second);
}

TEST(VarianceSeries, SingleComponentIdenticallyZero) {
    FunctionalProblem p(2, {sptest::quadratic(1.0, ParamVector{1.0, -1.0})}, "one");
    const Trace t = run(p, ParamVector{0.0, 0.0}, config(0.1, 6, 0, RecordPolicy::epoch_boundaries()));
    for (const auto& [b, v] : variance_series(t, p)) EXPECT_EQ(v, 0.0);
}

TEST(AnalyzePath, ReportAgreesWithSingleOperations) {
    const auto& r = convex_run();
    AnalyzerOptions opts;
    const auto rep = analyze_path(r.trace, *r.p, r.ref, opts);
    PathAnalyzer an(r.trace, *r.p, r.ref);
    ASSERT_EQ(rep.epochs.size(), 200u);
    const auto dist = distance_series(r.trace, r.ref);
    const auto var = variance_series(r.trace, *r.p);
    for (std::uint64_t b = 0; b < 200; ++b) {
        EXPECT_EQ(rep.epochs[b].residual, an.epoch_residual(b));
        EXPECT_EQ(rep.epochs[b].dist, dist[b].second);
        EXPECT_EQ(rep.epochs[b].variance, var[b].second);
    }
    // Detail epochs 9, 19, ..., 199 carry per-iteration rows.
    EXPECT_EQ(rep.iters.size(), 20u * 50);
    EXPECT_EQ(rep.sc_fraction.size(), 20u);
    for (const auto& [b, f] : rep.sc_fraction) EXPECT_EQ(f, 1.0);
    double sum = 0.0;
    for (const auto& it : rep.iters)
        if (it.epoch == 19) sum += it.residual;
    EXPECT_NEAR(sum, rep.epochs[19].residual, 1e-9);
    EXPECT_EQ(rep.epoch_audit->totals.violated, 0u);
    EXPECT_EQ(rep.step_audit->totals.violated, 0u);
    EXPECT_LE(rep.max_loss_mismatch, 1e-12);
    EXPECT_EQ(rep.lipschitz.source, "problem bound");

    opts.iter_epochs_every = 50;
    const auto sparse = analyze_path(r.trace, *r.p, r.ref, opts);
    EXPECT_EQ(sparse.sc_fraction.size(), 4u);
}

TEST(AnalyzePath, EstimatesLipschitzWithoutBound) {
    auto p = make_phase_retrieval(10, 4, 1);
    ParamVector x0 = *p->planted_minimizer();
    x0[0] += 0.05;
    const Trace t = run(*p, x0, config(0.001, 5, 0, RecordPolicy::standard()));
    AnalyzerOptions opts;
    opts.lipschitz_trials = 4;
    opts.lipschitz_seed = 3;
    const auto rep = analyze_path(t, *p, planted_ref(t, *p), opts);
    EXPECT_GT(rep.lipschitz.value, 0.0);
    EXPECT_NE(rep.lipschitz.source.find("estimated"), std::string::npos);
    const auto again = analyze_path(t, *p, planted_ref(t, *p), opts);
    EXPECT_EQ(again.lipschitz.value, rep.lipschitz.value);
}
