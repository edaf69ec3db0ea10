#pragma once

// Holistic uncertainty: a probe's vMF belief (mu(x), kappa(x)) is pushed
// through the gallery model at temperature T, and the KL divergence between
// the resulting class posterior and the prior is split into a gallery part
// (kl1) and an out-of-gallery part (kl2).

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "osrue/error.hpp"
#include "osrue/gallery.hpp"
#include "osrue/numeric.hpp"
#include "osrue/vmf.hpp"

namespace osrue {

struct ProbabilisticEmbedding {
    UnitVector mean;
    double kappa;

    ProbabilisticEmbedding(UnitVector m, double k) : mean(std::move(m)), kappa(k) {
        if (!(kappa > 0.0) || !std::isfinite(kappa))
            throw Error(Errc::domain, "embedding kappa must be finite and > 0");
    }
};

struct KlComponents {
    double kl1 = 0.0;
    double kl2 = 0.0;
    double temperature = 1.0;
};

struct CalibrationStats {
    double mean1 = 0.0;
    double std1 = 1.0;
    double mean2 = 0.0;
    double std2 = 1.0;
};

struct NormalizedKl {
    double kl1n = 0.0;
    double kl2n = 0.0;
};

namespace holue {

inline constexpr double kDefaultTemperature = 20.0;

namespace detail {

inline void require_temperature(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(Errc::domain, "temperature must be > 0");
}

// Log-domain numerators of the temperature-T posterior at mu_x and the log of
// their normalizer. Index K holds the out-of-gallery term.
struct ScaledTerms {
    std::vector<double> log_num;
    double log_norm;
};

inline ScaledTerms scaled_terms(const GalleryModel& model, const UnitVector& mu_x, double t) {
    ScaledTerms s;
    s.log_num = model.log_joint(mu_x);
    s.log_num.push_back(model.log_oog_term());
    for (double& v : s.log_num) v /= t;
    s.log_norm = numeric::log_sum_exp(s.log_num);
    return s;
}

}  // namespace detail

/// Temperature-T posterior evaluated at the embedding mean.
inline Posterior scaled_gallery_posterior(const GalleryModel& model,
                                          const ProbabilisticEmbedding& pemb, double t) {
    detail::require_temperature(t);
    const auto s = detail::scaled_terms(model, pemb.mean, t);
    Posterior post;
    const std::size_t k = model.num_classes();
    post.gallery_probs.resize(k);
    for (std::size_t c = 0; c < k; ++c) post.gallery_probs[c] = std::exp(s.log_num[c] - s.log_norm);
    post.oog_prob = std::exp(s.log_num[k] - s.log_norm);
    return post;
}

/// Mean-value approximation of the two KL summands at temperature t.
inline KlComponents kl_components(const GalleryModel& model, const ProbabilisticEmbedding& pemb,
                                  double t) {
    detail::require_temperature(t);
    const auto s = detail::scaled_terms(model, pemb.mean, t);
    const std::size_t k = model.num_classes();
    const double log_prior = model.log_class_prior();

    double kl1 = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const double log_p = s.log_num[c] - s.log_norm;
        const double p = std::exp(log_p);
        if (p > 0.0) kl1 += p * (log_p - log_prior);
    }

    // kl2 = (beta/S)^{1/T} / p(mu_x) * log[(beta/S)^{1/T-1} p(mu_x|x) / p(mu_x)]
    const double log_oog = model.log_oog_term();
    const double log_pz = gallery::log_marginal(model, pemb.mean);
    const double log_self = vmf::log_c_d(model.dim(), pemb.kappa) + pemb.kappa;
    const double log_weight = log_oog / t - log_pz;
    const double log_ratio = (1.0 / t - 1.0) * log_oog + log_self - log_pz;
    const double kl2 = log_ratio == 0.0 ? 0.0 : std::exp(log_weight) * log_ratio;

    return {kl1, kl2, t};
}

/// Sample mean and unbiased standard deviation of each KL summand.
inline CalibrationStats fit_stats(std::span<const KlComponents> comps) {
    if (comps.size() < 2) throw Error(Errc::calibration, "need at least two validation probes");
    const double n = static_cast<double>(comps.size());
    double m1 = 0.0, m2 = 0.0;
    for (const auto& c : comps) m1 += c.kl1, m2 += c.kl2;
    m1 /= n;
    m2 /= n;
    double v1 = 0.0, v2 = 0.0;
    for (const auto& c : comps) {
        v1 += (c.kl1 - m1) * (c.kl1 - m1);
        v2 += (c.kl2 - m2) * (c.kl2 - m2);
    }
    const double s1 = std::sqrt(v1 / (n - 1.0));
    const double s2 = std::sqrt(v2 / (n - 1.0));
    if (!(s1 > 0.0) || !(s2 > 0.0))
        throw Error(Errc::calibration, "KL component has zero variance on the calibration set");
    return {m1, s1, m2, s2};
}

inline NormalizedKl normalize(const KlComponents& c, const CalibrationStats& stats) {
    return {(c.kl1 - stats.mean1) / stats.std1, (c.kl2 - stats.mean2) / stats.std2};
}

/// Normalized-sum HolUE score; higher means more confident.
inline double holue_sum(double kl1n, double kl2n) { return kl1n + kl2n; }

}  // namespace holue
}  // namespace osrue
