#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "osrue/metrics.hpp"

using namespace osrue;

namespace {

enum class Kind { tp, fn_miss, fn_wrong, fp, tn };

ProbeOutcome make(std::string id, Kind k, double score) {
    ProbeOutcome o;
    o.probe_id = std::move(id);
    switch (k) {
        case Kind::tp: o.truth = "a"; o.decision = Decision::accept("a"); break;
        case Kind::fn_miss: o.truth = "a"; break;
        case Kind::fn_wrong: o.truth = "a"; o.decision = Decision::accept("b"); break;
        case Kind::fp: o.decision = Decision::accept("a"); break;
        case Kind::tn: break;
    }
    o.scores["q"] = score;
    return o;
}

std::string pid(int i) {
    char b[16];
    std::snprintf(b, sizeof b, "p%04d", i);
    return b;
}

// Random mix with a score that is informative but noisy.
std::vector<ProbeOutcome> noisy_set(std::uint64_t seed, int n) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ProbeOutcome> out;
    for (int i = 0; i < n; ++i) {
        const double r = u(rng);
        Kind k = r < 0.55 ? Kind::tp : r < 0.65 ? Kind::fn_miss : r < 0.7 ? Kind::fn_wrong : r < 0.8 ? Kind::fp : Kind::tn;
        const bool bad = k == Kind::fn_miss || k == Kind::fn_wrong || k == Kind::fp;
        out.push_back(make(pid(i), k, u(rng) + (bad ? 0.0 : 0.4)));
    }
    return out;
}

}  // namespace

TEST(Confusion, Examples) {
    const std::vector<ProbeOutcome> all_good = {make("a", Kind::tp, 0), make("b", Kind::tp, 0)};
    EXPECT_EQ(metrics::confusion_counts(all_good), (Confusion{2, 0, 0, 0}));

    const std::vector<ProbeOutcome> wrong = {make("a", Kind::fn_wrong, 0)};
    EXPECT_EQ(metrics::confusion_counts(wrong).fn, 1u);
    EXPECT_EQ(metrics::confusion_counts(wrong).tp, 0u);

    const std::vector<ProbeOutcome> nm = {make("a", Kind::fp, 0), make("b", Kind::tn, 0), make("c", Kind::tn, 0),
                                          make("d", Kind::tn, 0)};
    EXPECT_EQ(metrics::confusion_counts(nm).fp, 1u);
    EXPECT_EQ(metrics::confusion_counts(nm).tn, 3u);
}

TEST(OsrMetrics, WorkedExample) {
    const auto m = metrics::osr_metrics(7, 3, 1, 4);
    EXPECT_DOUBLE_EQ(m.fpir, 0.25);
    EXPECT_DOUBLE_EQ(m.fnir, 0.3);
    EXPECT_NEAR(m.f1, 0.777778, 1e-6);
    EXPECT_NEAR(m.f1, 2 * (7.0 / 8 * 0.7) / (7.0 / 8 + 0.7), 1e-15);
}

TEST(OsrMetrics, DegenerateCases) {
    EXPECT_EQ(metrics::osr_metrics(0, 5, 2, 4).f1, 0.0);
    const auto perfect = metrics::osr_metrics(5, 0, 0, 4);
    EXPECT_EQ(perfect.fpir, 0.0);
    EXPECT_EQ(perfect.fnir, 0.0);
    EXPECT_EQ(perfect.f1, 1.0);
    EXPECT_EQ(metrics::osr_metrics(0, 0, 0, 0).fpir, 0.0);
}

TEST(ThresholdForFpir, Examples) {
    const std::vector<double> s = {0.9, 0.7, 0.5, 0.3};
    auto fpir = [&](double tau) { return std::count_if(s.begin(), s.end(), [&](double v) { return v >= tau; }) / 4.0; };
    EXPECT_DOUBLE_EQ(metrics::threshold_for_fpir(s, 0.25), 0.8);
    EXPECT_EQ(fpir(0.8), 0.25);
    EXPECT_GT(metrics::threshold_for_fpir(s, 0.0), 0.9);
    EXPECT_EQ(fpir(metrics::threshold_for_fpir(s, 0.0)), 0.0);
    EXPECT_LT(metrics::threshold_for_fpir(s, 1.0), 0.3);
    EXPECT_EQ(fpir(metrics::threshold_for_fpir(s, 1.0)), 1.0);
    EXPECT_THROW(metrics::threshold_for_fpir({}, 0.1), Error);
}

TEST(ThresholdForFpir, AchievesTargetOnFitSet) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> s(997);
    for (double& v : s) v = n(rng);
    for (double target : {0.01, 0.05, 0.1, 0.2, 0.3, 0.5}) {
        const double tau = metrics::threshold_for_fpir(s, target);
        const auto hits = std::count_if(s.begin(), s.end(), [&](double v) { return v >= tau; });
        EXPECT_EQ(static_cast<std::size_t>(hits), static_cast<std::size_t>(std::floor(target * s.size() + 1e-9)));
    }
}

TEST(RejectionCurve, AllCorrectIsFlat) {
    std::vector<ProbeOutcome> o;
    for (int i = 0; i < 20; ++i) o.push_back(make(pid(i), i % 3 ? Kind::tp : Kind::tn, i));
    const auto c = metrics::rejection_curve(o, "q", Metric::f1);
    ASSERT_EQ(c.values.size(), 101u);
    for (double v : c.values) EXPECT_EQ(v, 1.0);
}

TEST(RejectionCurve, OracleOrderReachesOne) {
    std::vector<ProbeOutcome> o;
    for (int i = 0; i < 10; ++i) o.push_back(make(pid(i), i < 2 ? Kind::fn_miss : Kind::tp, i < 2 ? 0.0 : 1.0 + i));
    const auto c = metrics::rejection_curve(o, "q", Metric::f1, 0.5, 11);
    for (std::size_t i = 0; i < c.fractions.size(); ++i) {
        if (c.fractions[i] >= 0.2 - 1e-12) EXPECT_EQ(c.values[i], 1.0) << c.fractions[i];
        else EXPECT_LT(c.values[i], 1.0);
    }
}

TEST(RejectionCurve, FourOutcomeExample) {
    const std::vector<ProbeOutcome> o = {make("e1", Kind::fp, 0.1), make("g1", Kind::tp, 0.9),
                                         make("g2", Kind::tp, 0.8), make("g3", Kind::tp, 0.7)};
    const auto c = metrics::rejection_curve(o, "q", Metric::f1, 0.5, 3);
    ASSERT_EQ(c.fractions, (std::vector<double>{0.0, 0.25, 0.5}));
    EXPECT_NEAR(c.values[0], 6.0 / 7.0, 1e-15);
    EXPECT_NEAR(c.values[0], 0.857143, 1e-6);
    EXPECT_EQ(c.values[1], 1.0);
}

TEST(RejectionCurve, StartsAtUnfilteredMetric) {
    const auto o = noisy_set(2, 300);
    const auto base = metrics::osr_metrics(metrics::confusion_counts(o));
    EXPECT_EQ(metrics::rejection_curve(o, "q", Metric::f1).values[0], base.f1);
    EXPECT_EQ(metrics::rejection_curve(o, "q", Metric::fpir).values[0], base.fpir);
    EXPECT_EQ(metrics::rejection_curve(o, "q", Metric::fnir).values[0], base.fnir);
}

TEST(RejectionCurve, TiesBrokenByProbeId) {
    std::vector<ProbeOutcome> o = {make("b", Kind::tp, 0.5), make("a", Kind::fp, 0.5), make("c", Kind::tp, 0.9),
                                   make("d", Kind::tp, 0.9)};
    // "a" goes first, so dropping a quarter removes the FP.
    EXPECT_EQ(metrics::rejection_curve(o, "q", Metric::fpir, 0.25, 2).values[1], 0.0);
    std::swap(o[0].probe_id, o[1].probe_id);
    EXPECT_EQ(metrics::rejection_curve(o, "q", Metric::fpir, 0.25, 2).values[1], 1.0);
}

TEST(RejectionCurve, FpirFallsWhenFalsePositivesScoreLow) {
    std::vector<ProbeOutcome> o;
    for (int i = 0; i < 40; ++i) {
        const Kind k = i < 6 ? Kind::fp : i < 20 ? Kind::tn : Kind::tp;
        o.push_back(make(pid(i), k, k == Kind::fp ? 0.01 * i : 1.0 + 0.01 * i));
    }
    const auto c = metrics::rejection_curve(o, "q", Metric::fpir);
    for (std::size_t i = 1; i < c.values.size(); ++i) EXPECT_LE(c.values[i], c.values[i - 1]);
}

TEST(RejectionCurve, Errors) {
    std::vector<ProbeOutcome> o = {make("a", Kind::tp, 0.1), make("b", Kind::tp, 0.2)};
    try {
        metrics::rejection_curve(o, "q", Metric::f1, 1.0, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::curve_truncation);
    }
    EXPECT_THROW(metrics::rejection_curve(o, "missing", Metric::f1), Error);
    EXPECT_THROW(metrics::rejection_curve(o, "q", Metric::f1, 0.5, 1), Error);
}

TEST(ReferenceCurves, ZeroErrorIsFlatAndIdentical) {
    std::vector<ProbeOutcome> o;
    for (int i = 0; i < 30; ++i) o.push_back(make(pid(i), i % 2 ? Kind::tp : Kind::tn, 0));
    const auto r = metrics::reference_curves(o, Metric::f1);
    EXPECT_EQ(r.oracle.values, r.random.values);
    for (double v : r.oracle.values) EXPECT_EQ(v, 1.0);
    try {
        metrics::prr(r.oracle, r.random, r.oracle);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::undefined_prr);
    }
}

TEST(ReferenceCurves, OracleDominatesAnyScore) {
    const auto o = noisy_set(3, 400);
    const auto r = metrics::reference_curves(o, Metric::f1);
    const auto c = metrics::rejection_curve(o, "q", Metric::f1);
    for (std::size_t i = 0; i < c.values.size(); ++i) EXPECT_GE(r.oracle.values[i], c.values[i] - 1e-15);
    EXPECT_NEAR(r.random.values[0], metrics::osr_metrics(metrics::confusion_counts(o)).f1, 1e-12);
}

TEST(ReferenceCurves, SeededAndReproducible) {
    const auto o = noisy_set(4, 200);
    EXPECT_EQ(metrics::reference_curves(o, Metric::f1, 0.5, 101, 20, 9).random.values,
              metrics::reference_curves(o, Metric::f1, 0.5, 101, 20, 9).random.values);
    EXPECT_THROW(metrics::reference_curves(o, Metric::f1, 0.5, 101, 0), Error);
}

TEST(Auc, ConstantCurve) {
    RejectionCurve c{Metric::f1, metrics::fraction_grid(0.5, 101), std::vector<double>(101, 0.8)};
    EXPECT_NEAR(metrics::auc(c), 0.4, 1e-14);
}

TEST(Prr, Examples) {
    const auto o = noisy_set(5, 500);
    const auto r = metrics::reference_curves(o, Metric::f1);
    EXPECT_NEAR(metrics::prr(r.oracle, r.random, r.oracle), 1.0, 1e-12);
    EXPECT_NEAR(metrics::prr(r.random, r.random, r.oracle), 0.0, 1e-12);
    RejectionCurve mid = r.random;
    for (std::size_t i = 0; i < mid.values.size(); ++i) mid.values[i] = 0.5 * (r.random.values[i] + r.oracle.values[i]);
    EXPECT_NEAR(metrics::prr(mid, r.random, r.oracle), 0.5, 1e-12);
}

TEST(Prr, InvariantUnderMonotoneTransform) {
    auto o = noisy_set(6, 500);
    const auto r = metrics::reference_curves(o, Metric::f1);
    const double a = metrics::prr(metrics::rejection_curve(o, "q", Metric::f1), r.random, r.oracle);
    for (auto& p : o) p.scores["q"] = std::exp(3 * p.scores["q"]) - 7;
    const double b = metrics::prr(metrics::rejection_curve(o, "q", Metric::f1), r.random, r.oracle);
    EXPECT_EQ(a, b);
    EXPECT_GT(a, 0.2);
}
