#pragma once

// End-to-end risk-controlled evaluation of a protocol: fix the operating
// point at a target FPIR, derive the equivalent gallery concentration,
// calibrate HolUE on the validation split, score the test probes with every
// method and summarize rejection curves as PRR.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "osrue/baselines.hpp"
#include "osrue/gallery.hpp"
#include "osrue/holue.hpp"
#include "osrue/io.hpp"
#include "osrue/metrics.hpp"
#include "osrue/mlp.hpp"
#include "osrue/protocol.hpp"

namespace osrue {

inline constexpr const char* kToolVersion = "1.0.0";

enum class StatsSource { validation, test };

struct EvalConfig {
    std::vector<double> target_fpirs = {0.1};
    std::vector<Method> methods = {kAllMethods.begin(), kAllMethods.end()};
    double temperature = holue::kDefaultTemperature;
    double beta = GalleryModel::kDefaultBeta;
    double max_fraction = metrics::kDefaultMaxFraction;
    int n_points = metrics::kDefaultPoints;
    int n_shuffles = metrics::kDefaultShuffles;
    std::uint64_t seed = 0;
    StatsSource stats_source = StatsSource::validation;
    MlpHyper hyper{};
};

inline constexpr std::array<Metric, 3> kAllMetrics = {Metric::f1, Metric::fpir, Metric::fnir};

struct MethodResult {
    Method method;
    std::map<Metric, RejectionCurve> curves;
    std::map<Metric, double> auc;
    std::map<Metric, std::optional<double>> prr;
};

struct OperatingPoint {
    double target_fpir = 0.0;
    double tau = 0.0;
    double kappa = 0.0;
    Confusion confusion;
    OsrMetrics base;
    std::optional<CalibrationStats> stats;
    std::optional<MlpCalibrator> calibrator;
    std::map<Metric, metrics::ReferenceCurves> references;
    std::vector<MethodResult> methods;
    std::vector<ProbeOutcome> outcomes;  // test probes

    const MethodResult* find(Method m) const {
        for (const auto& r : methods)
            if (r.method == m) return &r;
        return nullptr;
    }
    /// PRR on the F1 rejection curve; nullopt when undefined.
    std::optional<double> prr(Method m, Metric metric = Metric::f1) const {
        const auto* r = find(m);
        return r ? r->prr.at(metric) : std::nullopt;
    }
};

struct EvalReport {
    EvalConfig config;
    std::uint64_t generator_seed = 0;
    std::uint64_t protocol_seed = 0;
    int d = 0;
    std::size_t num_classes = 0;
    std::vector<OperatingPoint> points;

    /// True when a requested method has no defined F1 PRR at some point.
    bool has_undefined_prr() const {
        for (const auto& p : points)
            for (const auto& m : p.methods)
                if (!m.prr.at(Metric::f1)) return true;
        return false;
    }
};

namespace evaluate {

namespace detail {

inline bool needs(const EvalConfig& cfg, Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

inline ProbabilisticEmbedding embedding_of(const ProbeRecord& p) {
    if (!p.kappa) throw Error(Errc::schema, "probe " + p.probe_id + " has no kappa");
    return {p.vector, *p.kappa};
}

inline std::vector<const ProbeRecord*> select(const OsrProtocol& proto, Split split) {
    std::vector<const ProbeRecord*> out;
    for (const auto& p : proto.probes)
        if (p.split == split) out.push_back(&p);
    return out;
}

inline ProbeOutcome outcome_of(const ProbeRecord& p, const Gallery& g, double tau) {
    return {p.probe_id, p.class_id, gallery::decide_by_cosine(g, p.vector, tau), {}};
}

}  // namespace detail

/// Runs one operating point. Throws Errc::calibration when HolUE scores are
/// requested but cannot be calibrated.
inline OperatingPoint run_point(const OsrProtocol& proto, const EvalConfig& cfg, double target_fpir) {
    const auto& g = proto.gallery;
    const auto test = detail::select(proto, Split::test);
    const auto validation = detail::select(proto, Split::validation);

    std::vector<double> nonmated_scores;
    for (const auto* p : test)
        if (!p->mated()) nonmated_scores.push_back(baselines::acc_score(g, p->vector));
    if (nonmated_scores.empty()) throw Error(Errc::schema, "test split has no non-mated probes");

    OperatingPoint op;
    op.target_fpir = target_fpir;
    op.tau = metrics::threshold_for_fpir(nonmated_scores, target_fpir);
    op.kappa = gallery::kappa_for_threshold(op.tau, cfg.beta, g.size(), proto.dim());
    const GalleryModel model(g, op.kappa, cfg.beta);

    const bool want_mlp = detail::needs(cfg, Method::holue);
    const bool want_holue = want_mlp || detail::needs(cfg, Method::holue_sum);
    if (want_holue) {
        const auto& source = cfg.stats_source == StatsSource::validation ? validation : test;
        if (want_mlp && validation.empty())
            throw Error(Errc::calibration, "HolUE calibration needs a non-empty validation split");
        if (source.size() < 2) throw Error(Errc::calibration, "too few probes for KL statistics");
        std::vector<KlComponents> comps;
        for (const auto* p : source)
            comps.push_back(holue::kl_components(model, detail::embedding_of(*p), cfg.temperature));
        op.stats = holue::fit_stats(comps);
        if (want_mlp) {
            std::vector<NormalizedKl> features;
            std::vector<Label> labels;
            for (const auto* p : validation) {
                const auto c = holue::kl_components(model, detail::embedding_of(*p), cfg.temperature);
                features.push_back(holue::normalize(c, *op.stats));
                labels.push_back(detail::outcome_of(*p, g, op.tau).error() ? Label::error : Label::correct);
            }
            op.calibrator = holue::fit_mlp(features, labels, cfg.hyper, cfg.seed);
        }
    }

    for (const auto* p : test) {
        auto o = detail::outcome_of(*p, g, op.tau);
        for (Method m : cfg.methods) {
            double score = 0.0;
            switch (m) {
                case Method::acc_scr:
                    score = baselines::q_accscr(baselines::acc_score(g, p->vector), op.tau);
                    break;
                case Method::scf: score = baselines::q_scf(detail::embedding_of(*p)); break;
                case Method::pfe:
                    if (!p->pfe_sigma2) throw Error(Errc::schema, "probe " + p->probe_id + " has no pfe_sigma2");
                    score = baselines::q_pfe(*p->pfe_sigma2);
                    break;
                case Method::sf:
                    if (!p->sf_scale) throw Error(Errc::schema, "probe " + p->probe_id + " has no sf_scale");
                    score = baselines::q_sf(*p->sf_scale);
                    break;
                case Method::galue: score = gallery::galue_score(gallery::posterior(model, p->vector)); break;
                case Method::holue:
                case Method::holue_sum: {
                    const auto c = holue::kl_components(model, detail::embedding_of(*p), cfg.temperature);
                    const auto n = holue::normalize(c, *op.stats);
                    score = m == Method::holue ? holue::mlp_predict(*op.calibrator, n.kl1n, n.kl2n)
                                               : holue::holue_sum(n.kl1n, n.kl2n);
                    break;
                }
            }
            if (!std::isfinite(score))
                throw Error(Errc::domain, std::string(method_name(m)) + " score of " + p->probe_id + " is not finite");
            o.scores.emplace(std::string(method_name(m)), score);
        }
        op.outcomes.push_back(std::move(o));
    }

    op.confusion = metrics::confusion_counts(op.outcomes);
    op.base = metrics::osr_metrics(op.confusion);
    for (Metric metric : kAllMetrics)
        op.references.emplace(metric, metrics::reference_curves(op.outcomes, metric, cfg.max_fraction,
                                                                cfg.n_points, cfg.n_shuffles, cfg.seed));
    for (Method m : cfg.methods) {
        MethodResult r{m, {}, {}, {}};
        for (Metric metric : kAllMetrics) {
            auto curve = metrics::rejection_curve(op.outcomes, method_name(m), metric, cfg.max_fraction,
                                                  cfg.n_points);
            const auto& ref = op.references.at(metric);
            r.auc[metric] = metrics::auc(curve);
            try {
                r.prr[metric] = metrics::prr(curve, ref.random, ref.oracle);
            } catch (const Error& e) {
                if (e.code() != Errc::undefined_prr) throw;
                r.prr[metric] = std::nullopt;
            }
            r.curves.emplace(metric, std::move(curve));
        }
        op.methods.push_back(std::move(r));
    }
    return op;
}

inline EvalReport run(const OsrProtocol& proto, const EvalConfig& cfg) {
    EvalReport report{cfg, proto.generator_seed, proto.protocol_seed, proto.dim(), proto.gallery.size(), {}};
    for (double fpir : cfg.target_fpirs) report.points.push_back(run_point(proto, cfg, fpir));
    return report;
}

// ---- serialization ---------------------------------------------------------

inline nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
}

inline nlohmann::json report_json(const EvalReport& r) {
    using nlohmann::json;
    json j;
    j["tool_version"] = kToolVersion;
    json methods = json::array();
    for (Method m : r.config.methods) methods.push_back(method_name(m));
    j["config"] = {{"methods", methods},
                   {"target_fpirs", r.config.target_fpirs},
                   {"temperature", r.config.temperature},
                   {"beta", r.config.beta},
                   {"max_reject_fraction", r.config.max_fraction},
                   {"n_points", r.config.n_points},
                   {"n_shuffles", r.config.n_shuffles},
                   {"stats_source", r.config.stats_source == StatsSource::validation ? "validation" : "test"},
                   {"mlp", {{"learning_rate", r.config.hyper.learning_rate},
                            {"momentum", r.config.hyper.momentum},
                            {"epochs", r.config.hyper.epochs},
                            {"init_range", r.config.hyper.init_range}}}};
    j["seeds"] = {{"eval", r.config.seed}, {"generator", r.generator_seed}, {"protocol", r.protocol_seed}};
    j["bundle"] = {{"d", r.d}, {"gallery_classes", r.num_classes}};
    json points = json::array();
    for (const auto& p : r.points) {
        json pj;
        pj["target_fpir"] = p.target_fpir;
        pj["tau"] = p.tau;
        pj["kappa"] = p.kappa;
        pj["counts"] = {{"tp", p.confusion.tp}, {"fn", p.confusion.fn}, {"fp", p.confusion.fp},
                        {"tn", p.confusion.tn}};
        pj["base"] = {{"fpir", p.base.fpir}, {"fnir", p.base.fnir}, {"f1", p.base.f1}};
        if (p.stats)
            pj["calibration_stats"] = {{"mean1", p.stats->mean1}, {"std1", p.stats->std1},
                                       {"mean2", p.stats->mean2}, {"std2", p.stats->std2}};
        if (p.calibrator) pj["calibrator"] = io::calibrator_json(*p.calibrator, *p.stats);
        json refs;
        for (const auto& [metric, ref] : p.references)
            refs[std::string(metric_name(metric))] = {{"oracle_auc", metrics::auc(ref.oracle)},
                                                      {"random_auc", metrics::auc(ref.random)}};
        pj["references"] = refs;
        json mj;
        for (const auto& m : p.methods) {
            json one;
            for (Metric metric : kAllMetrics) {
                const std::string name(metric_name(metric));
                one["auc"][name] = m.auc.at(metric);
                one["prr"][name] = optional_json(m.prr.at(metric));
            }
            mj[std::string(method_name(m.method))] = one;
        }
        pj["methods"] = mj;
        points.push_back(pj);
    }
    j["operating_points"] = points;
    return j;
}

inline std::string curve_csv(const RejectionCurve& c) {
    std::string out = "fraction,value\n";
    for (std::size_t i = 0; i < c.fractions.size(); ++i)
        out += io::format_double(c.fractions[i]) + "," + io::format_double(c.values[i]) + "\n";
    return out;
}

/// report.json plus curves/<method>_<metric>.csv (and oracle_/random_
/// references). With several operating points each gets curves/fpir_<x>/.
inline void write_outputs(const EvalReport& r, const std::filesystem::path& out) {
    std::error_code ec;
    std::filesystem::create_directories(out / "curves", ec);
    if (ec) throw Error(Errc::io, "cannot create " + (out / "curves").string());
    io::write_text(out / "report.json", report_json(r).dump(2) + "\n");
    for (const auto& p : r.points) {
        auto dir = out / "curves";
        if (r.points.size() > 1) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "fpir_%g", p.target_fpir);
            dir /= buf;
            std::filesystem::create_directories(dir, ec);
            if (ec) throw Error(Errc::io, "cannot create " + dir.string());
        }
        for (const auto& m : p.methods)
            for (const auto& [metric, curve] : m.curves)
                io::write_text(dir / (std::string(method_name(m.method)) + "_" + std::string(metric_name(metric)) + ".csv"),
                               curve_csv(curve));
        for (const auto& [metric, ref] : p.references) {
            const std::string name(metric_name(metric));
            io::write_text(dir / ("oracle_" + name + ".csv"), curve_csv(ref.oracle));
            io::write_text(dir / ("random_" + name + ".csv"), curve_csv(ref.random));
        }
    }
}

}  // namespace evaluate
}  // namespace osrue
