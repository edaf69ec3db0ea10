#pragma once

// Independent re-derivations used to cross-check the engine: quadrature for
// the vMF normalizer, Monte-Carlo checks that the marginal integrates to one,
// and linear-domain posterior and KL formulas for small problems. The verify
// suites at the bottom compare them against the engine.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <json.hpp>

#include "osrue/error.hpp"
#include "osrue/gallery.hpp"
#include "osrue/holue.hpp"
#include "osrue/vmf.hpp"

namespace osrue::oracle {

/// -log of the integral of exp(kappa cos theta) over the unit sphere in d = 2
/// or 3, by tanh-sinh quadrature in the polar angle.
inline double quad_log_c_d(int d, double kappa) {
    if (d != 2 && d != 3) throw Error(Errc::oracle_domain, "quadrature oracle supports d = 2, 3 only");
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw Error(Errc::oracle_domain, "kappa must be >= 0");
    boost::math::quadrature::tanh_sinh<double> rule;
    // exp(kappa (cos t - 1)) keeps the integrand in [0, 1].
    auto f = [&](double t) {
        const double g = std::exp(kappa * (std::cos(t) - 1.0));
        return d == 2 ? g : g * std::sin(t);
    };
    double err = 0.0;
    const double integral = rule.integrate(f, 0.0, std::numbers::pi, 1e-15, &err);
    if (!(integral > 0.0) || err > 1e-12 * integral)
        throw Error(Errc::oracle_failure, "quadrature did not converge");
    // d=2: the circle gives 2 * int_0^pi.  d=3: the azimuth adds 2 pi.
    const double factor = d == 2 ? 2.0 : 2.0 * std::numbers::pi;
    return -(std::log(factor * integral) + kappa);
}

// ---- Monte-Carlo marginal check --------------------------------------------

struct McReport {
    std::size_t n = 0;
    // E_{z~p}[1 / (S p_hat(z))]
    double importance_mean = 0.0;
    double importance_se = 0.0;
    // E_{z~uniform}[S p_hat(z)]
    double uniform_mean = 0.0;
    double uniform_se = 0.0;
    bool passed = false;
};

using LogDensity = std::function<double(const UnitVector&)>;

/// Checks that p(z) integrates to one. z is drawn from the generative
/// process; both estimators have expectation 1 when log_density is the true
/// log p(z). Passes when both lie within 3 standard errors of 1.
inline McReport mc_marginal_check(const GalleryModel& model, std::size_t n, std::uint64_t seed,
                                  const std::optional<LogDensity>& log_density = std::nullopt) {
    if (n < 10'000) throw Error(Errc::oracle_domain, "MC check needs at least 1e4 samples");
    const LogDensity density =
        log_density ? *log_density : LogDensity([&](const UnitVector& z) { return gallery::log_marginal(model, z); });
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, model.num_classes() - 1);
    const auto d = static_cast<std::size_t>(model.dim());
    const double log_s = model.log_surface();

    double s1 = 0.0, s1sq = 0.0, s2 = 0.0, s2sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        UnitVector z = u01(rng) < model.beta()
                           ? vmf::detail::uniform_direction(d, rng)
                           : vmf::detail::draw_vmf({model.gallery().means()[pick(rng)], model.kappa()}, rng);
        const double a = std::exp(-log_s - density(z));
        s1 += a;
        s1sq += a * a;
        const double b = std::exp(log_s + density(vmf::detail::uniform_direction(d, rng)));
        s2 += b;
        s2sq += b * b;
    }
    const double nn = static_cast<double>(n);
    McReport r;
    r.n = n;
    r.importance_mean = s1 / nn;
    r.importance_se = std::sqrt(std::max(0.0, s1sq / nn - r.importance_mean * r.importance_mean) / (nn - 1.0));
    r.uniform_mean = s2 / nn;
    r.uniform_se = std::sqrt(std::max(0.0, s2sq / nn - r.uniform_mean * r.uniform_mean) / (nn - 1.0));
    r.passed = std::abs(r.importance_mean - 1.0) <= 3.0 * r.importance_se &&
               std::abs(r.uniform_mean - 1.0) <= 3.0 * r.uniform_se;
    return r;
}

// ---- linear-domain posterior and KL ----------------------------------------

inline constexpr int kMaxDim = 8;
inline constexpr double kMaxKappa = 50.0;
inline constexpr std::size_t kMaxClasses = 20;

namespace detail {

inline double surface_area(int d) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

// kappa^{d/2-1} / ((2 pi)^{d/2} I_{d/2-1}(kappa))
inline double c_d(int d, double kappa) {
    const double nu = 0.5 * d - 1.0;
    return std::pow(kappa, nu) / (std::pow(2.0 * std::numbers::pi, 0.5 * d) * std::cyl_bessel_i(nu, kappa));
}

inline void require_envelope(const GalleryModel& model) {
    if (model.dim() > kMaxDim || model.kappa() > kMaxKappa || model.num_classes() > kMaxClasses)
        throw Error(Errc::oracle_domain, "model outside the linear-domain oracle envelope");
}

// p(c) p(z|c) for every class followed by the out-of-gallery term.
inline std::vector<double> joint(const GalleryModel& model, const UnitVector& z) {
    const int d = model.dim();
    const auto& means = model.gallery().means();
    const double prior = (1.0 - model.beta()) / static_cast<double>(means.size());
    const double c = c_d(d, model.kappa());
    std::vector<double> out;
    for (const auto& mu : means) {
        double cos = 0.0;
        for (std::size_t i = 0; i < mu.dim(); ++i) cos += mu[i] * z[i];
        out.push_back(prior * c * std::exp(model.kappa() * cos));
    }
    out.push_back(model.beta() / surface_area(d));
    return out;
}

}  // namespace detail

inline Posterior independent_posterior(const GalleryModel& model, const UnitVector& z) {
    detail::require_envelope(model);
    if (static_cast<int>(z.dim()) != model.dim()) throw Error(Errc::dimension_mismatch, "probe d");
    const auto j = detail::joint(model, z);
    double total = 0.0;
    for (double v : j) total += v;
    Posterior post;
    for (std::size_t c = 0; c + 1 < j.size(); ++c) post.gallery_probs.push_back(j[c] / total);
    post.oog_prob = j.back() / total;
    return post;
}

/// KL summands at T = 1 straight from their definitions: kl1 is the KL of
/// the class posterior at mu_x against the prior over gallery classes, kl2
/// the out-of-gallery term beta/S / p(mu_x) * log(p(mu_x|x) / p(mu_x)).
inline KlComponents independent_kl_unscaled(const GalleryModel& model, const ProbabilisticEmbedding& pemb) {
    detail::require_envelope(model);
    if (pemb.kappa > kMaxKappa) throw Error(Errc::oracle_domain, "embedding kappa outside envelope");
    const auto j = detail::joint(model, pemb.mean);
    double pz = 0.0;
    for (double v : j) pz += v;
    const double prior = (1.0 - model.beta()) / static_cast<double>(model.num_classes());
    double kl1 = 0.0;
    for (std::size_t c = 0; c + 1 < j.size(); ++c) {
        const double p = j[c] / pz;
        if (p > 0.0) kl1 += p * std::log(p / prior);
    }
    const double self = detail::c_d(model.dim(), pemb.kappa) * std::exp(pemb.kappa);
    const double kl2 = j.back() / pz * std::log(self / pz);
    return {kl1, kl2, 1.0};
}

// ---- verify suites ---------------------------------------------------------

struct CheckResult {
    std::string name;
    bool passed = false;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    std::size_t cases = 0;
    double seconds = 0.0;
};

struct VerifyOptions {
    std::uint64_t seed = 0;
    // Test fixture: perturbs every engine value before comparison.
    bool inject_fault = false;
};

inline const std::vector<std::string>& verify_scopes() {
    static const std::vector<std::string> s = {"bessel", "quadrature", "mc", "posterior", "equivalence", "kl"};
    return s;
}

namespace detail {

class Tracker {
public:
    Tracker(std::string name, double tol, const VerifyOptions& opt)
        : opt_(opt), start_(std::chrono::steady_clock::now()) {
        r_.name = std::move(name);
        r_.tolerance = tol;
        r_.passed = true;
    }
    double engine(double v) const { return opt_.inject_fault ? v * (1.0 + 1e-6) + 1e-6 : v; }
    // Records |a - b| against the tolerance.
    void compare(double engine_value, double oracle_value) {
        const double dev = std::abs(engine(engine_value) - oracle_value);
        record(dev, dev <= r_.tolerance);
    }
    void compare_relative(double engine_value, double oracle_value) {
        const double dev = std::abs(engine(engine_value) - oracle_value) / std::max(1e-300, std::abs(oracle_value));
        record(dev, dev <= r_.tolerance);
    }
    void require(bool ok, double dev = 0.0) { record(dev, ok); }
    CheckResult finish() {
        r_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        return r_;
    }
    const VerifyOptions& options() const { return opt_; }

private:
    void record(double dev, bool ok) {
        ++r_.cases;
        if (!(dev <= r_.max_deviation)) r_.max_deviation = std::isnan(dev) ? INFINITY : dev;
        if (!ok || std::isnan(dev)) r_.passed = false;
    }
    VerifyOptions opt_;
    CheckResult r_;
    std::chrono::steady_clock::time_point start_;
};

inline double log_sinh(double x) { return x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0); }

// log I_{n+1/2}(x) for x large against n^2 via the terminating Hankel sum.
inline double log_bessel_half_large_x(int n, double x) {
    double term = 1.0, sum = 1.0;
    for (int k = 0; k < n; ++k) {
        term *= -static_cast<double>((n + k + 1) * (n - k)) / (static_cast<double>(k + 1) * 2.0 * x);
        sum += term;
    }
    return -0.5 * std::log(2.0 * std::numbers::pi * x) + x + std::log(sum);
}

inline UnitVector random_direction(std::size_t d, std::mt19937_64& rng) { return vmf::detail::uniform_direction(d, rng); }

inline Gallery random_gallery(std::size_t d, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::string> ids;
    std::vector<UnitVector> means;
    for (std::size_t c = 0; c < k; ++c) {
        ids.push_back("c" + std::to_string(c));
        means.push_back(random_direction(d, rng));
    }
    return Gallery(std::move(ids), std::move(means));
}

// A probe at cosine `cos` from mu in a random orthogonal direction.
inline UnitVector at_cosine(const UnitVector& mu, double cos, std::mt19937_64& rng) {
    const std::size_t d = mu.dim();
    auto t = vmf::detail::gaussian_vector(d, rng);
    const double proj = numeric::dot(t, mu.coords());
    for (std::size_t i = 0; i < d; ++i) t[i] -= proj * mu[i];
    const double tn = numeric::norm2(t);
    const double s = std::sqrt(std::max(0.0, 1.0 - cos * cos)) / tn;
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = cos * mu[i] + s * t[i];
    return UnitVector::normalized(std::move(v));
}

// Mixture of uniform probes, samples near a class and probes near the
// decision threshold.
inline UnitVector fuzz_probe(const GalleryModel& model, double tau, std::mt19937_64& rng) {
    const auto d = static_cast<std::size_t>(model.dim());
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_int_distribution<std::size_t> pick(0, model.num_classes() - 1);
    const auto& mu = model.gallery().means()[pick(rng)];
    switch (kind(rng)) {
        case 0: return random_direction(d, rng);
        case 1: return vmf::detail::draw_vmf({mu, model.kappa()}, rng);
        default: {
            std::uniform_real_distribution<double> jitter(-0.05, 0.05);
            return at_cosine(mu, std::clamp(tau + jitter(rng), -1.0, 1.0), rng);
        }
    }
}

}  // namespace detail

inline CheckResult check_bessel(const VerifyOptions& opt) {
    detail::Tracker t("bessel", 1e-10, opt);
    const double xs[] = {0.1, 0.5, 1.0, 2.0, 10.0, 50.0, 100.0, 499.0, 501.0, 1e3, 1e4, 1e5};
    for (double x : xs) {
        const double pre = 0.5 * std::log(2.0 / (std::numbers::pi * x));
        t.compare(vmf::log_bessel_i(0.5, x), pre + detail::log_sinh(x));
        // I_{3/2}(x) = sqrt(2/(pi x)) (cosh x - sinh x / x)
        const double em = std::exp(-2.0 * x);
        const double i32 = (1.0 - 1.0 / x) + em * (1.0 + 1.0 / x);
        t.compare(vmf::log_bessel_i(1.5, x), pre + x - std::log(2.0) + std::log(i32));
        if (x >= 1.0) {
            // I_{5/2}(x) = sqrt(2/(pi x)) ((1 + 3/x^2) sinh x - (3/x) cosh x)
            const double a = 1.0 + 3.0 / (x * x);
            const double b = 3.0 / x;
            const double i52 = (a - b) - em * (a + b);
            t.compare(vmf::log_bessel_i(2.5, x), pre + x - std::log(2.0) + std::log(i52));
        }
    }
    // Large half-integer orders where the terminating sum is well conditioned.
    const std::pair<int, double> large[] = {{20, 1e4}, {63, 1e5}, {255, 1e6}, {10, 1e3}};
    for (auto [n, x] : large) t.compare(vmf::log_bessel_i(n + 0.5, x), detail::log_bessel_half_large_x(n, x));
    // Finite in high dimension at large concentration.
    const double v = vmf::log_c_d(512, 1e5);
    t.require(std::isfinite(t.engine(v)));
    return t.finish();
}

inline CheckResult check_quadrature(const VerifyOptions& opt) {
    detail::Tracker t("quadrature", 1e-8, opt);
    for (int d : {2, 3}) {
        t.compare(vmf::log_c_d(d, 0.0), quad_log_c_d(d, 0.0));
        for (double kappa : {0.1, 1.0, 10.0, 100.0}) t.compare_relative(vmf::log_c_d(d, kappa), quad_log_c_d(d, kappa));
    }
    return t.finish();
}

inline CheckResult check_mc(const VerifyOptions& opt) {
    // Deviation is reported in standard errors.
    detail::Tracker t("mc", 3.0, opt);
    std::mt19937_64 rng(opt.seed ^ 0x6d63ULL);
    struct Case { std::size_t d, k; double kappa, beta; };
    const Case cases[] = {{3, 1, 1.0, 0.5}, {3, 5, 10.0, 0.3}, {4, 3, 5.0, 0.7}};
    std::uint64_t s = opt.seed;
    for (const auto& c : cases) {
        const GalleryModel model(detail::random_gallery(c.d, c.k, rng), c.kappa, c.beta);
        const LogDensity engine = [&](const UnitVector& z) { return t.engine(gallery::log_marginal(model, z)); };
        const auto r = mc_marginal_check(model, 100'000, ++s, engine);
        t.require(r.passed, std::max(std::abs(r.importance_mean - 1.0) / r.importance_se,
                                     std::abs(r.uniform_mean - 1.0) / r.uniform_se));
        // Negative control: a density scaled by 1.1 must be caught.
        const LogDensity scaled = [&](const UnitVector& z) { return gallery::log_marginal(model, z) + std::log(1.1); };
        t.require(!mc_marginal_check(model, 100'000, ++s, scaled).passed);
    }
    return t.finish();
}

inline CheckResult check_posterior(const VerifyOptions& opt) {
    detail::Tracker t("posterior", 1e-9, opt);
    std::mt19937_64 rng(opt.seed ^ 0x706fULL);
    std::uniform_int_distribution<int> dim(2, kMaxDim);
    std::uniform_int_distribution<std::size_t> classes(1, kMaxClasses);
    std::uniform_real_distribution<double> log_kappa(std::log(1e-3), std::log(kMaxKappa));
    std::uniform_real_distribution<double> beta(0.05, 0.95);
    for (int i = 0; i < 1000; ++i) {
        const GalleryModel model(detail::random_gallery(dim(rng), classes(rng), rng), std::exp(log_kappa(rng)), beta(rng));
        const auto z = detail::fuzz_probe(model, 0.5, rng);
        const auto a = gallery::posterior(model, z);
        const auto b = independent_posterior(model, z);
        for (std::size_t c = 0; c < a.gallery_probs.size(); ++c) t.compare(a.gallery_probs[c], b.gallery_probs[c]);
        t.compare(a.oog_prob, b.oog_prob);
    }
    // K=1, d=3, kappa=1, beta=0.5, z = mu.
    const GalleryModel hand(Gallery({"a"}, {UnitVector({0.0, 0.0, 1.0})}), 1.0, 0.5);
    const auto p = gallery::posterior(hand, UnitVector({0.0, 0.0, 1.0}));
    t.require(std::abs(t.engine(p.gallery_probs[0]) - 0.69817) <= 1e-5 &&
              std::abs(t.engine(p.oog_prob) - 0.30183) <= 1e-5);
    return t.finish();
}

inline CheckResult check_equivalence(const VerifyOptions& opt) {
    detail::Tracker t("equivalence", 0.0, opt);
    std::mt19937_64 rng(opt.seed ^ 0x6571ULL);
    std::uniform_real_distribution<double> log_kappa(std::log(0.1), std::log(1e3));
    std::uniform_real_distribution<double> beta(0.05, 0.95);
    const std::size_t dims[] = {2, 16, 128};
    const std::size_t ks[] = {1, 10, 100};
    constexpr int kModels = 100;
    constexpr int kProbes = 10'000 / (9 * kModels) + 1;  // >= 1e4 pairs overall
    for (std::size_t d : dims)
        for (std::size_t k : ks)
            for (int m = 0; m < kModels; ++m) {
                const GalleryModel model(detail::random_gallery(d, k, rng), std::exp(log_kappa(rng)), beta(rng));
                const double tau = t.engine(gallery::equivalent_threshold(model));
                for (int i = 0; i < kProbes; ++i) {
                    const auto z = detail::fuzz_probe(model, tau, rng);
                    const auto a = gallery::decide(gallery::posterior(model, z), model.gallery());
                    const auto b = gallery::decide_by_cosine(model.gallery(), z, tau);
                    t.require(a == b, a == b ? 0.0 : 1.0);
                }
            }
    return t.finish();
}

inline CheckResult check_kl(const VerifyOptions& opt) {
    detail::Tracker t("kl", 1e-10, opt);
    std::mt19937_64 rng(opt.seed ^ 0x6b6cULL);
    std::uniform_int_distribution<int> dim(2, kMaxDim);
    std::uniform_int_distribution<std::size_t> classes(1, kMaxClasses);
    std::uniform_real_distribution<double> kappa(0.5, kMaxKappa);
    std::uniform_real_distribution<double> beta(0.05, 0.95);
    for (int i = 0; i < 100; ++i) {
        const GalleryModel model(detail::random_gallery(dim(rng), classes(rng), rng), kappa(rng), beta(rng));
        const ProbabilisticEmbedding pemb(detail::fuzz_probe(model, 0.5, rng), kappa(rng));
        const auto a = holue::kl_components(model, pemb, 1.0);
        const auto b = independent_kl_unscaled(model, pemb);
        t.compare(a.kl1 / std::max(1.0, std::abs(b.kl1)), b.kl1 / std::max(1.0, std::abs(b.kl1)));
        t.compare(a.kl2 / std::max(1.0, std::abs(b.kl2)), b.kl2 / std::max(1.0, std::abs(b.kl2)));
    }
    const UnitVector mu({0.0, 0.0, 1.0});
    const GalleryModel hand(Gallery({"a"}, {mu}), 1.0, 0.5);
    const auto c = holue::kl_components(hand, ProbabilisticEmbedding(mu, 5.0), 1.0);
    t.require(std::abs(t.engine(c.kl1) - 0.23309) <= 1e-3 && std::abs(t.engine(c.kl2) - 0.54265) <= 1e-3);
    return t.finish();
}

inline CheckResult run_check(const std::string& scope, const VerifyOptions& opt) {
    if (scope == "bessel") return check_bessel(opt);
    if (scope == "quadrature") return check_quadrature(opt);
    if (scope == "mc") return check_mc(opt);
    if (scope == "posterior") return check_posterior(opt);
    if (scope == "equivalence") return check_equivalence(opt);
    if (scope == "kl") return check_kl(opt);
    throw Error(Errc::schema, "unknown verify scope " + scope);
}

inline nlohmann::json verify_json(const std::vector<CheckResult>& results, const VerifyOptions& opt) {
    nlohmann::json checks = nlohmann::json::array();
    bool all = true;
    for (const auto& r : results) {
        all = all && r.passed;
        checks.push_back({{"name", r.name},
                          {"status", r.passed ? "pass" : "fail"},
                          {"max_deviation", r.max_deviation},
                          {"tolerance", r.tolerance},
                          {"cases", r.cases}});
    }
    return {{"passed", all}, {"seed", opt.seed}, {"checks", checks}};
}

}  // namespace osrue::oracle
