#pragma once

// Comparison confidence scores. Every score is oriented so that a higher
// value means a more trustworthy recognition result.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "osrue/error.hpp"
#include "osrue/gallery.hpp"
#include "osrue/holue.hpp"

namespace osrue {

enum class Method { acc_scr, scf, pfe, sf, galue, holue, holue_sum };

inline constexpr std::array<Method, 7> kAllMethods = {
    Method::acc_scr, Method::scf, Method::pfe, Method::sf,
    Method::galue, Method::holue, Method::holue_sum};

inline std::string_view method_name(Method m) {
    switch (m) {
        case Method::acc_scr: return "AccScr";
        case Method::scf: return "SCF";
        case Method::pfe: return "PFE";
        case Method::sf: return "SF";
        case Method::galue: return "GalUE";
        case Method::holue: return "HolUE";
        case Method::holue_sum: return "HolUE-sum";
    }
    return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
    for (Method m : kAllMethods)
        if (method_name(m) == name) return m;
    return std::nullopt;
}

struct QualityRecord {
    std::string probe_id;
    Method method;
    double score;
};

namespace baselines {

/// s(p) = max_c <mu_c, z>.
inline double acc_score(const Gallery& gallery, const UnitVector& z) {
    double best = -2.0;
    for (double c : gallery.cosines(z)) best = std::max(best, c);
    return best;
}

/// Distance of the acceptance score to the decision threshold.
inline double q_accscr(double s, double tau) { return std::abs(s - tau); }

inline double q_scf(const ProbabilisticEmbedding& pemb) { return pemb.kappa; }

/// Negative harmonic mean of the PFE variance vector.
inline double q_pfe(std::span<const double> sigma2) {
    if (sigma2.empty()) throw Error(Errc::domain, "empty PFE variance vector");
    double inv_sum = 0.0;
    for (double s : sigma2) {
        if (!(s > 0.0) || !std::isfinite(s)) throw Error(Errc::domain, "PFE variances must be > 0");
        inv_sum += 1.0 / s;
    }
    return -static_cast<double>(sigma2.size()) / inv_sum;
}

inline double q_sf(double scale) { return scale; }

}  // namespace baselines
}  // namespace osrue
