#pragma once

// Open-set identification metrics (FPIR, FNIR, F1), operating-point
// selection, rejection curves with oracle/random references, and the
// Prediction Rejection Ratio.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "osrue/error.hpp"
#include "osrue/gallery.hpp"

namespace osrue {

struct ProbeOutcome {
    std::string probe_id;
    std::optional<std::string> truth;  // enrolled class id; nullopt for non-mated probes
    Decision decision;
    std::map<std::string, double, std::less<>> scores;

    bool mated() const noexcept { return truth.has_value(); }
    bool true_positive() const { return mated() && decision.accepted() && decision.class_id == truth; }
    bool false_positive() const { return !mated() && decision.accepted(); }
    bool error() const { return mated() ? !true_positive() : decision.accepted(); }
};

struct Confusion {
    std::size_t tp = 0;
    std::size_t fn = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;

    std::size_t n_mated() const noexcept { return tp + fn; }
    std::size_t n_nonmated() const noexcept { return fp + tn; }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct OsrMetrics {
    double fpir = 0.0;
    double fnir = 0.0;
    double f1 = 0.0;
};

enum class Metric { f1, fpir, fnir };

inline std::string_view metric_name(Metric m) {
    switch (m) {
        case Metric::f1: return "F1";
        case Metric::fpir: return "FPIR";
        case Metric::fnir: return "FNIR";
    }
    return "?";
}

struct RejectionCurve {
    Metric metric = Metric::f1;
    std::vector<double> fractions;
    std::vector<double> values;
};

namespace metrics {

inline constexpr double kDefaultMaxFraction = 0.5;
inline constexpr int kDefaultPoints = 101;
inline constexpr int kDefaultShuffles = 100;

namespace detail {
// floor(r * n) robust to r * n landing one ulp below an integer
inline std::size_t floor_count(double r, std::size_t n) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
}

inline void tally(Confusion& c, const ProbeOutcome& o) {
    if (o.mated()) (o.true_positive() ? c.tp : c.fn) += 1;
    else (o.decision.accepted() ? c.fp : c.tn) += 1;
}
}  // namespace detail

inline Confusion confusion_counts(std::span<const ProbeOutcome> outcomes) {
    Confusion c;
    for (const auto& o : outcomes) detail::tally(c, o);
    return c;
}

/// FPIR = FP/|P_N|, FNIR = FN/(FN+TP), F1 from precision and recall. Empty
/// denominators give 0; F1 is 0 whenever TP = 0.
inline OsrMetrics osr_metrics(std::size_t tp, std::size_t fn, std::size_t fp, std::size_t n_nonmated) {
    OsrMetrics m;
    m.fpir = n_nonmated > 0 ? static_cast<double>(fp) / static_cast<double>(n_nonmated) : 0.0;
    m.fnir = tp + fn > 0 ? static_cast<double>(fn) / static_cast<double>(tp + fn) : 0.0;
    if (tp > 0) {
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        m.f1 = 2.0 * precision * recall / (precision + recall);
    }
    return m;
}

inline OsrMetrics osr_metrics(const Confusion& c) { return osr_metrics(c.tp, c.fn, c.fp, c.n_nonmated()); }

inline double metric_value(const Confusion& c, Metric metric) {
    const auto m = osr_metrics(c);
    switch (metric) {
        case Metric::f1: return m.f1;
        case Metric::fpir: return m.fpir;
        case Metric::fnir: return m.fnir;
    }
    return 0.0;
}

/// Acceptance threshold (accept iff score >= tau) at which exactly
/// floor(target * N) of the non-mated scores are accepted. The threshold sits
/// midway between the k-th and (k+1)-th largest score.
inline double threshold_for_fpir(std::span<const double> nonmated_scores, double target) {
    if (nonmated_scores.empty()) throw Error(Errc::domain, "no non-mated scores");
    if (!(target >= 0.0 && target <= 1.0)) throw Error(Errc::domain, "target FPIR must lie in [0, 1]");
    std::vector<double> s(nonmated_scores.begin(), nonmated_scores.end());
    std::sort(s.begin(), s.end(), std::greater<>());
    const std::size_t n = s.size();
    const std::size_t k = std::min(n, detail::floor_count(target, n));
    if (k == 0) return std::nextafter(s.front(), std::numeric_limits<double>::infinity());
    if (k == n) return std::nextafter(s.back(), -std::numeric_limits<double>::infinity());
    return 0.5 * (s[k - 1] + s[k]);
}

/// Uniform grid of n_points fractions over [0, max_fraction].
inline std::vector<double> fraction_grid(double max_fraction, int n_points) {
    if (!(max_fraction > 0.0 && max_fraction <= 1.0))
        throw Error(Errc::domain, "max_fraction must lie in (0, 1]");
    if (n_points < 2) throw Error(Errc::domain, "a rejection curve needs at least two points");
    std::vector<double> grid(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) grid[i] = max_fraction * i / (n_points - 1);
    return grid;
}

/// Metric on the outcomes that survive after removing order[0..floor(r*N)) at
/// every grid fraction r. Decisions are kept as made.
inline RejectionCurve curve_for_order(std::span<const ProbeOutcome> outcomes,
                                      std::span<const std::size_t> order, Metric metric,
                                      std::span<const double> grid) {
    const std::size_t n = outcomes.size();
    Confusion retained = confusion_counts(outcomes);
    RejectionCurve curve{metric, {grid.begin(), grid.end()}, {}};
    curve.values.reserve(grid.size());
    std::size_t removed = 0;
    for (double r : grid) {
        const std::size_t target = detail::floor_count(r, n);
        if (target >= n)
            throw Error(Errc::curve_truncation, "rejection fraction leaves no probes to evaluate");
        for (; removed < target; ++removed) {
            const auto& o = outcomes[order[removed]];
            if (o.mated()) (o.true_positive() ? retained.tp : retained.fn) -= 1;
            else (o.decision.accepted() ? retained.fp : retained.tn) -= 1;
        }
        curve.values.push_back(metric_value(retained, metric));
    }
    return curve;
}

/// Indices sorted by ascending score, ties by probe_id.
inline std::vector<std::size_t> order_by_score(std::span<const ProbeOutcome> outcomes,
                                               std::string_view method) {
    std::vector<double> score(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto it = outcomes[i].scores.find(method);
        if (it == outcomes[i].scores.end())
            throw Error(Errc::schema, "probe " + outcomes[i].probe_id + " has no " +
                                          std::string(method) + " score");
        score[i] = it->second;
    }
    std::vector<std::size_t> order(outcomes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] < score[b];
        return outcomes[a].probe_id < outcomes[b].probe_id;
    });
    return order;
}

inline RejectionCurve rejection_curve(std::span<const ProbeOutcome> outcomes, std::string_view method,
                                      Metric metric, double max_fraction = kDefaultMaxFraction,
                                      int n_points = kDefaultPoints) {
    const auto grid = fraction_grid(max_fraction, n_points);
    const auto order = order_by_score(outcomes, method);
    return curve_for_order(outcomes, order, metric, grid);
}

struct ReferenceCurves {
    RejectionCurve oracle;
    RejectionCurve random;
};

inline std::vector<std::size_t> id_order(std::span<const ProbeOutcome> outcomes) {
    std::vector<std::size_t> order(outcomes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return outcomes[a].probe_id < outcomes[b].probe_id; });
    return order;
}

/// Oracle removes erroneous probes first; random averages n_shuffles seeded
/// removal orders.
inline ReferenceCurves reference_curves(std::span<const ProbeOutcome> outcomes, Metric metric,
                                        double max_fraction = kDefaultMaxFraction,
                                        int n_points = kDefaultPoints,
                                        int n_shuffles = kDefaultShuffles, std::uint64_t seed = 0) {
    if (n_shuffles < 1) throw Error(Errc::domain, "n_shuffles must be >= 1");
    const auto grid = fraction_grid(max_fraction, n_points);
    const auto by_id = id_order(outcomes);

    std::vector<std::size_t> oracle_order;
    oracle_order.reserve(outcomes.size());
    for (std::size_t i : by_id) if (outcomes[i].error()) oracle_order.push_back(i);
    for (std::size_t i : by_id) if (!outcomes[i].error()) oracle_order.push_back(i);

    ReferenceCurves refs{curve_for_order(outcomes, oracle_order, metric, grid),
                         {metric, grid, std::vector<double>(grid.size(), 0.0)}};
    for (int s = 0; s < n_shuffles; ++s) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(s)};
        std::mt19937_64 rng(seq);
        auto order = by_id;
        std::shuffle(order.begin(), order.end(), rng);
        const auto c = curve_for_order(outcomes, order, metric, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) refs.random.values[i] += c.values[i];
    }
    for (double& v : refs.random.values) v /= n_shuffles;
    return refs;
}

/// Trapezoidal area under a rejection curve.
inline double auc(const RejectionCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.fractions.size(); ++i)
        area += 0.5 * (curve.values[i] + curve.values[i - 1]) * (curve.fractions[i] - curve.fractions[i - 1]);
    return area;
}

/// (AUC_unc - AUC_random) / (AUC_oracle - AUC_random).
inline double prr(const RejectionCurve& unc, const RejectionCurve& random, const RejectionCurve& oracle) {
    if (unc.fractions != random.fractions || unc.fractions != oracle.fractions)
        throw Error(Errc::domain, "PRR curves must share one fraction grid");
    const double a_rnd = auc(random);
    const double denom = auc(oracle) - a_rnd;
    if (std::abs(denom) < 1e-12)
        throw Error(Errc::undefined_prr, "oracle and random curves coincide (nothing to filter)");
    return (auc(unc) - a_rnd) / denom;
}

}  // namespace metrics
}  // namespace osrue
