#pragma once

// GalUE: Bayesian open-set recognition over a gallery of vMF classes with a
// uniform out-of-gallery continuum. All probabilities are formed in log domain.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "osrue/error.hpp"
#include "osrue/numeric.hpp"
#include "osrue/vmf.hpp"

namespace osrue {

class Gallery {
public:
    Gallery(std::vector<std::string> class_ids, std::vector<UnitVector> means)
        : class_ids_(std::move(class_ids)), means_(std::move(means)) {
        if (means_.empty()) throw Error(Errc::schema, "gallery needs at least one class");
        if (class_ids_.size() != means_.size())
            throw Error(Errc::schema, "class id count does not match mean count");
        const std::size_t d = means_.front().dim();
        for (const auto& m : means_)
            if (m.dim() != d) throw Error(Errc::dimension_mismatch, "gallery rows differ in d");
        std::unordered_set<std::string> seen;
        for (const auto& id : class_ids_)
            if (!seen.insert(id).second) throw Error(Errc::duplicate_id, "class id " + id);
    }

    std::size_t size() const noexcept { return means_.size(); }
    std::size_t dim() const noexcept { return means_.front().dim(); }
    const std::vector<std::string>& class_ids() const noexcept { return class_ids_; }
    const std::vector<UnitVector>& means() const noexcept { return means_; }

    /// Cosine similarity of z to every class mean.
    std::vector<double> cosines(const UnitVector& z) const {
        if (z.dim() != dim())
            throw Error(Errc::dimension_mismatch, "probe d=" + std::to_string(z.dim()) +
                                                      ", gallery d=" + std::to_string(dim()));
        std::vector<double> out(size());
        for (std::size_t c = 0; c < size(); ++c) out[c] = numeric::dot(means_[c].coords(), z.coords());
        return out;
    }

private:
    std::vector<std::string> class_ids_;
    std::vector<UnitVector> means_;
};

class GalleryModel {
public:
    static constexpr double kDefaultBeta = 0.5;

    GalleryModel(Gallery gallery, double kappa, double beta = kDefaultBeta)
        : gallery_(std::move(gallery)), kappa_(kappa), beta_(beta) {
        if (!(kappa_ > 0.0) || !std::isfinite(kappa_))
            throw Error(Errc::domain, "gallery kappa must be finite and > 0");
        if (!(beta_ > 0.0 && beta_ < 1.0)) throw Error(Errc::domain, "beta must lie in (0, 1)");
        const int d = static_cast<int>(gallery_.dim());
        log_c_ = vmf::log_c_d(d, kappa_);
        log_alpha_ = vmf::log_alpha(d, kappa_);
        log_surface_ = vmf::log_surface_area(d);
    }

    const Gallery& gallery() const noexcept { return gallery_; }
    double kappa() const noexcept { return kappa_; }
    double beta() const noexcept { return beta_; }
    int dim() const noexcept { return static_cast<int>(gallery_.dim()); }
    std::size_t num_classes() const noexcept { return gallery_.size(); }

    double log_c() const noexcept { return log_c_; }
    double log_alpha() const noexcept { return log_alpha_; }
    double log_surface() const noexcept { return log_surface_; }

    /// log P(c) for any single gallery class.
    double log_class_prior() const noexcept {
        return std::log1p(-beta_) - std::log(static_cast<double>(num_classes()));
    }
    /// log(beta / S_{d-1}), the out-of-gallery density term.
    double log_oog_term() const noexcept { return std::log(beta_) - log_surface_; }

    /// log P(c) + log p(z|c) for every gallery class.
    std::vector<double> log_joint(const UnitVector& z) const {
        auto terms = gallery_.cosines(z);
        const double offset = log_class_prior() + log_c_;
        for (double& t : terms) t = offset + kappa_ * t;
        return terms;
    }

private:
    Gallery gallery_;
    double kappa_;
    double beta_;
    double log_c_ = 0.0;
    double log_alpha_ = 0.0;
    double log_surface_ = 0.0;
};

struct Posterior {
    std::vector<double> gallery_probs;
    double oog_prob = 0.0;

    std::size_t num_classes() const noexcept { return gallery_probs.size(); }
};

struct Decision {
    enum class Kind { reject, accept };
    Kind kind = Kind::reject;
    std::optional<std::string> class_id;

    bool accepted() const noexcept { return kind == Kind::accept; }
    static Decision reject() { return {}; }
    static Decision accept(std::string id) { return {Kind::accept, std::move(id)}; }
    friend bool operator==(const Decision&, const Decision&) = default;
};

namespace gallery {

/// Normalized arithmetic mean of a template's sample embeddings.
inline UnitVector aggregate_template(const std::vector<UnitVector>& samples) {
    if (samples.empty()) throw Error(Errc::degenerate_template, "empty template");
    const std::size_t d = samples.front().dim();
    std::vector<double> acc(d, 0.0);
    for (const auto& s : samples) {
        if (s.dim() != d) throw Error(Errc::dimension_mismatch, "template samples differ in d");
        for (std::size_t i = 0; i < d; ++i) acc[i] += s[i];
    }
    for (double& a : acc) a /= static_cast<double>(samples.size());
    if (numeric::norm2(acc) < 1e-12)
        throw Error(Errc::degenerate_template, "template mean has vanishing norm");
    return UnitVector::normalized(std::move(acc));
}

/// log p(z) under the gallery mixture plus the uniform out-of-gallery continuum.
inline double log_marginal(const GalleryModel& model, const UnitVector& z) {
    auto terms = model.log_joint(z);
    terms.push_back(model.log_oog_term());
    return numeric::log_sum_exp(terms);
}

inline Posterior posterior(const GalleryModel& model, const UnitVector& z) {
    auto terms = model.log_joint(z);
    const double oog = model.log_oog_term();
    const double log_pz = numeric::log_add_exp(numeric::log_sum_exp(terms), oog);
    Posterior post;
    post.gallery_probs.resize(terms.size());
    for (std::size_t c = 0; c < terms.size(); ++c) post.gallery_probs[c] = std::exp(terms[c] - log_pz);
    post.oog_prob = std::exp(oog - log_pz);
    return post;
}

/// Index of the largest gallery probability, lowest index on ties.
inline std::size_t argmax_class(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < values.size(); ++c)
        if (values[c] > values[best]) best = c;
    return best;
}

inline Decision decide(const Posterior& post, const Gallery& gallery) {
    if (post.gallery_probs.size() != gallery.size())
        throw Error(Errc::dimension_mismatch, "posterior and gallery class counts differ");
    const std::size_t best = argmax_class(post.gallery_probs);
    if (post.oog_prob > post.gallery_probs[best]) return Decision::reject();
    return Decision::accept(gallery.class_ids()[best]);
}

/// q_GalUE: the largest of p_0, p_1, ..., p_K.
inline double galue_score(const Posterior& post) {
    double best = post.oog_prob;
    for (double p : post.gallery_probs) best = std::max(best, p);
    return best;
}

/// Cosine threshold tau = (1/kappa) log(beta/(1-beta) * K * alpha(kappa)) at
/// which the posterior rule and the max-cosine rule make identical decisions.
inline double equivalent_threshold(double kappa, double beta, std::size_t num_classes, int d) {
    if (!(kappa > 0.0)) throw Error(Errc::domain, "kappa must be > 0");
    if (!(beta > 0.0 && beta < 1.0)) throw Error(Errc::domain, "beta must lie in (0, 1)");
    const double log_odds = std::log(beta) - std::log1p(-beta);
    return (log_odds + std::log(static_cast<double>(num_classes)) + vmf::log_alpha(d, kappa)) /
           kappa;
}

inline double equivalent_threshold(const GalleryModel& model) {
    return equivalent_threshold(model.kappa(), model.beta(), model.num_classes(), model.dim());
}

/// Cosine-threshold baseline: accept iff max_c <mu_c, z> >= tau.
inline Decision decide_by_cosine(const Gallery& gallery, const UnitVector& z, double tau) {
    const auto cos = gallery.cosines(z);
    const std::size_t best = argmax_class(cos);
    if (cos[best] >= tau) return Decision::accept(gallery.class_ids()[best]);
    return Decision::reject();
}

struct KappaBracket {
    double lo = 1e-2;
    double hi = 1e6;
};

/// Concentration kappa whose equivalent threshold equals target_tau.
///
/// tau(kappa) is not monotone in general: for K * beta / (1 - beta) > 1 it
/// falls from +inf, reaches a minimum and then climbs towards 1. The root on
/// the climbing (large-kappa) branch is returned when it exists; otherwise
/// the root on the falling branch. Decisions depend on tau only, so both
/// roots give the same recognition answers.
inline double kappa_for_threshold(double target_tau, double beta, std::size_t num_classes, int d,
                                  KappaBracket bracket = {}) {
    if (!(target_tau > -1.0 && target_tau < 1.0))
        throw Error(Errc::domain, "target tau must lie in (-1, 1)");
    if (!(bracket.lo > 0.0 && bracket.hi > bracket.lo))
        throw Error(Errc::domain, "invalid kappa bracket");
    auto f = [&](double log_k) {
        return equivalent_threshold(std::exp(log_k), beta, num_classes, d) - target_tau;
    };
    const double a = std::log(bracket.lo);
    const double b = std::log(bracket.hi);

    // Locate the minimum of tau on a grid, then refine by golden section.
    constexpr int kGrid = 256;
    int best = 0;
    double best_val = f(a);
    for (int i = 1; i <= kGrid; ++i) {
        const double v = f(a + (b - a) * i / kGrid);
        if (v < best_val) best_val = v, best = i;
    }
    double lo = a + (b - a) * std::max(0, best - 1) / kGrid;
    double hi = a + (b - a) * std::min(kGrid, best + 1) / kGrid;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
        const double m1 = hi - g * (hi - lo);
        const double m2 = lo + g * (hi - lo);
        if (f(m1) < f(m2)) hi = m2; else lo = m1;
    }
    const double x_min = 0.5 * (lo + hi);
    const double f_min = std::min(f(x_min), best_val);
    const double f_a = f(a);
    const double f_b = f(b);

    auto bisect = [&](double left, double right) {
        double f_left = f(left);
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (left + right);
            const double f_mid = f(mid);
            if (f_mid == 0.0) return mid;
            if ((f_mid < 0.0) == (f_left < 0.0)) left = mid, f_left = f_mid;
            else right = mid;
            if (right - left <= 1e-15 * std::max(1.0, std::abs(mid))) break;
        }
        return 0.5 * (left + right);
    };

    double root;
    if (f_min <= 0.0 && f_b >= 0.0) root = bisect(x_min, b);
    else if (f_min <= 0.0 && f_a >= 0.0) root = bisect(a, x_min);
    else {
        const double tau_min = f_min + target_tau;
        const double tau_max = std::max(f_a, f_b) + target_tau;
        throw Error(Errc::unreachable_threshold,
                    "tau " + std::to_string(target_tau) + " outside achievable range [" +
                        std::to_string(tau_min) + ", " + std::to_string(tau_max) +
                        "] for kappa in [" + std::to_string(bracket.lo) + ", " +
                        std::to_string(bracket.hi) + "]");
    }
    const double kappa = std::exp(root);
    const double residual = std::abs(f(root));
    if (!(residual < 1e-8))
        throw Error(Errc::unreachable_threshold,
                    "bisection residual " + std::to_string(residual) + " exceeds 1e-8");
    return kappa;
}

}  // namespace gallery
}  // namespace osrue
