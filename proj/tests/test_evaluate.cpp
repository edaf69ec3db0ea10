#include <filesystem>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "osrue/evaluate.hpp"
#include "scratch.hpp"

using namespace osrue;

TEST(Evaluate, ScenarioContract) {
    const auto proto = protocol::generate(*protocol::preset("ambiguous"));
    EvalConfig cfg;
    cfg.target_fpirs = {0.05};
    const auto r = evaluate::run(proto, cfg);
    ASSERT_EQ(r.points.size(), 1u);
    const auto& p = r.points[0];
    EXPECT_NEAR(p.base.fpir, 0.05, 0.01);
    EXPECT_LT(std::abs(gallery::equivalent_threshold(p.kappa, 0.5, proto.gallery.size(), 16) - p.tau), 1e-8);
    EXPECT_EQ(p.methods.size(), kAllMethods.size());
    for (const auto& m : p.methods) {
        const auto& c = m.curves.at(Metric::f1);
        ASSERT_EQ(c.fractions.size(), 101u);
        EXPECT_EQ(c.fractions.front(), 0.0);
        EXPECT_EQ(c.fractions.back(), 0.5);
        EXPECT_TRUE(m.prr.at(Metric::f1).has_value()) << method_name(m.method);
        EXPECT_EQ(c.values.front(), p.base.f1);
    }
    EXPECT_TRUE(p.stats.has_value());
    EXPECT_TRUE(p.calibrator.has_value());
    const auto j = evaluate::report_json(r);
    EXPECT_EQ(j["operating_points"][0]["methods"].size(), kAllMethods.size());
}

TEST(Evaluate, OracleReferenceHasUnitPrr) {
    const auto proto = protocol::generate(tiny_config());
    const auto r = evaluate::run(proto, EvalConfig{});
    const auto& p = r.points[0];
    const auto& ref = p.references.at(Metric::f1);
    EXPECT_NEAR(metrics::prr(ref.oracle, ref.random, ref.oracle), 1.0, 1e-12);
    for (const auto& m : p.methods)
        for (std::size_t i = 0; i < ref.oracle.values.size(); ++i)
            EXPECT_GE(ref.oracle.values[i], m.curves.at(Metric::f1).values[i] - 1e-15);
}

TEST(Evaluate, DeterministicReport) {
    const auto proto = protocol::generate(tiny_config());
    EvalConfig cfg;
    cfg.target_fpirs = {0.1, 0.2};
    const auto a = evaluate::report_json(evaluate::run(proto, cfg)).dump();
    const auto b = evaluate::report_json(evaluate::run(proto, cfg)).dump();
    EXPECT_EQ(a, b);
    cfg.seed = 1;
    EXPECT_NE(a, evaluate::report_json(evaluate::run(proto, cfg)).dump());
}

TEST(Evaluate, ZeroErrorBundleHasUndefinedPrr) {
    EvalConfig cfg;
    cfg.methods = {Method::galue};
    const auto r = evaluate::run(zero_error_protocol(), cfg);
    const auto& p = r.points[0];
    EXPECT_EQ(p.base.fpir, 0.0);
    EXPECT_EQ(p.base.fnir, 0.0);
    EXPECT_EQ(p.base.f1, 1.0);
    EXPECT_TRUE(r.has_undefined_prr());
    EXPECT_FALSE(p.prr(Method::galue).has_value());
}

TEST(Evaluate, EmptyValidationBlocksCalibration) {
    auto proto = protocol::generate(tiny_config());
    for (auto& pr : proto.probes) pr.split = Split::test;
    EvalConfig cfg;
    cfg.methods = {Method::holue};
    try {
        evaluate::run(proto, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::calibration);
    }
    // The sum variant can normalize on the test split instead.
    cfg.methods = {Method::holue_sum};
    cfg.stats_source = StatsSource::test;
    EXPECT_NO_THROW(evaluate::run(proto, cfg));
}

TEST(Evaluate, WritesCurvesPerOperatingPoint) {
    ScratchDir dir("eval_out");
    const auto proto = protocol::generate(tiny_config());
    EvalConfig cfg;
    cfg.methods = {Method::scf, Method::galue};
    evaluate::write_outputs(evaluate::run(proto, cfg), dir.path());
    EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "curves" / "GalUE_F1.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "curves" / "oracle_FNIR.csv"));
    const auto csv = slurp(dir.path() / "curves" / "SCF_FPIR.csv");
    EXPECT_EQ(csv.rfind("fraction,value\n0,", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 102);

    ScratchDir two("eval_two");
    cfg.target_fpirs = {0.05, 0.1};
    evaluate::write_outputs(evaluate::run(proto, cfg), two.path());
    EXPECT_TRUE(std::filesystem::exists(two.path() / "curves" / "fpir_0.05" / "SCF_F1.csv"));
    EXPECT_TRUE(std::filesystem::exists(two.path() / "curves" / "fpir_0.1" / "random_F1.csv"));
}

TEST(Evaluate, ReportCarriesReproductionFields) {
    const auto proto = protocol::generate(tiny_config());
    EvalConfig cfg;
    cfg.methods = {Method::galue};
    const auto j = evaluate::report_json(evaluate::run(proto, cfg));
    EXPECT_EQ(j["tool_version"], kToolVersion);
    EXPECT_EQ(j["seeds"]["generator"], 7);
    EXPECT_TRUE(j["config"].contains("temperature"));
    EXPECT_TRUE(j["config"].contains("beta"));
    EXPECT_TRUE(j["operating_points"][0].contains("tau"));
    EXPECT_TRUE(j["operating_points"][0].contains("kappa"));
}
