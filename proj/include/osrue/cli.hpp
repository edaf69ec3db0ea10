#pragma once

// Command-line front end: gen | eval | verify.
//
// Exit codes: 0 success, 1 I/O or internal failure, 2 config or schema
// error, 3 calibration failure (e.g. empty validation split), 4 undefined
// PRR, 5 verification failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "osrue/baselines.hpp"
#include "osrue/error.hpp"
#include "osrue/evaluate.hpp"
#include "osrue/io.hpp"
#include "osrue/oracle.hpp"
#include "osrue/protocol.hpp"

namespace osrue::cli {

enum Exit : int { ok = 0, failure = 1, bad_input = 2, calibration = 3, undefined_prr = 4, verify_failed = 5 };

inline int exit_for(const Error& e) {
    switch (e.code()) {
        case Errc::calibration:
        case Errc::training: return calibration;
        case Errc::undefined_prr: return undefined_prr;
        case Errc::io:
        case Errc::oracle_failure: return failure;
        default: return bad_input;
    }
}

struct GenArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

struct EvalArgs {
    std::string bundle;
    std::string out;
    std::vector<double> fpir;
    std::vector<std::string> methods;
    double temperature = holue::kDefaultTemperature;
    double beta = GalleryModel::kDefaultBeta;
    double max_reject_fraction = metrics::kDefaultMaxFraction;
    std::uint64_t seed = 0;
    std::string stats_source = "validation";
};

struct VerifyArgs {
    std::vector<std::string> scopes;
    std::string out = ".";
    std::uint64_t seed = 0;
    bool inject_fault = false;
};

inline int cmd_gen(const GenArgs& a, std::ostream& out, std::ostream& err) {
    try {
        const auto text = io::read_text(a.config);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::schema, std::string("config is not valid JSON: ") + e.what());
        }
        auto cfg = io::parse_synth_config(j);
        if (a.seed) cfg.seed = *a.seed;
        const auto proto = protocol::generate(cfg);
        io::write_bundle(proto, a.out);
        out << io::manifest_json(proto).dump(2) << "\n";
        return ok;
    } catch (const Error& e) {
        err << "gen: " << e.what() << "\n";
        return e.code() == Errc::io && !std::filesystem::exists(a.config) ? bad_input : exit_for(e);
    }
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    try {
        EvalConfig cfg;
        if (!a.fpir.empty()) cfg.target_fpirs = a.fpir;
        for (double f : cfg.target_fpirs)
            if (!(f > 0.0 && f < 1.0)) throw Error(Errc::schema, "--fpir must lie in (0, 1)");
        if (!a.methods.empty()) {
            cfg.methods.clear();
            for (const auto& name : a.methods) {
                const auto m = parse_method(name);
                if (!m) throw Error(Errc::schema, "unknown method " + name);
                if (std::find(cfg.methods.begin(), cfg.methods.end(), *m) == cfg.methods.end())
                    cfg.methods.push_back(*m);
            }
        }
        cfg.temperature = a.temperature;
        cfg.beta = a.beta;
        cfg.max_fraction = a.max_reject_fraction;
        cfg.seed = a.seed;
        if (a.stats_source == "validation") cfg.stats_source = StatsSource::validation;
        else if (a.stats_source == "test") cfg.stats_source = StatsSource::test;
        else throw Error(Errc::schema, "--stats-source must be validation or test");

        std::vector<std::string> warnings;
        const auto proto = io::read_bundle(a.bundle, &warnings);
        for (const auto& w : warnings) err << "warning: " << w << "\n";
        const auto report = evaluate::run(proto, cfg);
        evaluate::write_outputs(report, a.out);
        for (const auto& p : report.points) {
            out << "fpir " << p.target_fpir << ": tau " << p.tau << ", kappa " << p.kappa << ", FPIR "
                << p.base.fpir << ", FNIR " << p.base.fnir << ", F1 " << p.base.f1 << "\n";
            for (const auto& m : p.methods) {
                const auto prr = m.prr.at(Metric::f1);
                out << "  " << method_name(m.method) << " PRR(F1) ";
                if (prr) out << *prr << "\n";
                else out << "undefined\n";
            }
        }
        if (report.has_undefined_prr()) {
            err << "eval: PRR undefined (oracle and random curves coincide)\n";
            return undefined_prr;
        }
        return ok;
    } catch (const Error& e) {
        err << "eval: " << e.what() << "\n";
        return exit_for(e);
    }
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
    try {
        std::vector<std::string> scopes;
        for (const auto& s : a.scopes) {
            if (s == "all") {
                scopes = oracle::verify_scopes();
                break;
            }
            scopes.push_back(s);
        }
        if (scopes.empty()) scopes = oracle::verify_scopes();
        const oracle::VerifyOptions opt{a.seed, a.inject_fault};
        std::vector<oracle::CheckResult> results;
        for (const auto& s : scopes) {
            results.push_back(oracle::run_check(s, opt));
            const auto& r = results.back();
            out << (r.passed ? "pass " : "FAIL ") << r.name << "  cases " << r.cases << "  max deviation "
                << r.max_deviation << "  tolerance " << r.tolerance << "\n";
        }
        const auto j = oracle::verify_json(results, opt);
        std::error_code ec;
        std::filesystem::create_directories(a.out, ec);
        io::write_text(std::filesystem::path(a.out) / "verify.json", j.dump(2) + "\n");
        return j["passed"].get<bool>() ? ok : verify_failed;
    } catch (const Error& e) {
        err << "verify: " << e.what() << "\n";
        return e.code() == Errc::schema ? bad_input : verify_failed;
    }
}

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Open-set recognition uncertainty toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a synthetic bundle");
    g->add_option("--config", gen.config, "generator config JSON")->required();
    g->add_option("--out", gen.out, "bundle directory")->required();
    g->add_option("--seed", gen.seed, "override the config seed");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "evaluate uncertainty methods on a bundle");
    e->add_option("--bundle", ev.bundle, "bundle directory")->required();
    e->add_option("--out", ev.out, "output directory")->required();
    e->add_option("--fpir", ev.fpir, "target FPIR (repeatable)");
    e->add_option("--methods", ev.methods, "comma list of methods")->delimiter(',');
    e->add_option("--temperature", ev.temperature, "HolUE temperature")->capture_default_str();
    e->add_option("--beta", ev.beta, "out-of-gallery prior")->capture_default_str();
    e->add_option("--max-reject-fraction", ev.max_reject_fraction, "largest rejected fraction")
        ->capture_default_str();
    e->add_option("--seed", ev.seed, "seed for MLP init and random reference")->capture_default_str();
    e->add_option("--stats-source", ev.stats_source, "split used for KL normalization (validation|test)")
        ->capture_default_str();

    VerifyArgs ve;
    auto* v = app.add_subcommand("verify", "cross-check numerics against independent oracles");
    v->add_option("--scope", ve.scopes, "bessel|quadrature|mc|posterior|equivalence|kl|all (repeatable)");
    v->add_option("--out", ve.out, "directory for verify.json")->capture_default_str();
    v->add_option("--seed", ve.seed, "fuzz seed")->capture_default_str();
    v->add_flag("--inject-fault", ve.inject_fault)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& pe) {
        const int rc = app.exit(pe);
        return rc == 0 ? ok : bad_input;
    }
    if (*g) return cmd_gen(gen, std::cout, std::cerr);
    if (*e) return cmd_eval(ev, std::cout, std::cerr);
    return cmd_verify(ve, std::cout, std::cerr);
}

}  // namespace osrue::cli
