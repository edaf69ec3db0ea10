#pragma once

// Directional-statistics kernels on the unit sphere S^{d-1}: surface areas,
// log-domain modified Bessel functions of the first kind, the von Mises-Fisher
// normalizer and density, and a seeded vMF sampler.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "osrue/error.hpp"
#include "osrue/numeric.hpp"

namespace osrue {

/// A point on the unit sphere S^{d-1}, d >= 2.
class UnitVector {
public:
    static constexpr double kTolerance = 1e-9;

    /// Takes ownership of `coords`, which must already be unit-norm.
    explicit UnitVector(std::vector<double> coords) : coords_(std::move(coords)) {
        check_dim(coords_.size());
        const double n = numeric::norm2(coords_);
        if (!(std::abs(n - 1.0) <= kTolerance))
            throw Error(Errc::non_unit_vector, "norm " + std::to_string(n) + " is not 1");
    }

    /// Rescales `coords` to unit length.
    static UnitVector normalized(std::vector<double> coords) {
        check_dim(coords.size());
        const double n = numeric::norm2(coords);
        if (!(n > 0.0) || !std::isfinite(n))
            throw Error(Errc::non_unit_vector, "cannot normalize a zero or non-finite vector");
        for (double& c : coords) c /= n;
        return UnitVector(std::move(coords));
    }

    std::size_t dim() const noexcept { return coords_.size(); }
    std::span<const double> coords() const noexcept { return coords_; }
    double operator[](std::size_t i) const noexcept { return coords_[i]; }

    double dot(const UnitVector& other) const {
        if (other.dim() != dim())
            throw Error(Errc::dimension_mismatch,
                        std::to_string(dim()) + " vs " + std::to_string(other.dim()));
        return numeric::dot(coords_, other.coords_);
    }

    friend bool operator==(const UnitVector&, const UnitVector&) = default;

private:
    static void check_dim(std::size_t d) {
        if (d < 2) throw Error(Errc::invalid_dimension, "unit vectors need d >= 2");
    }

    std::vector<double> coords_;
};

struct VmfParams {
    UnitVector mean;
    double kappa = 0.0;  // 0 is the uniform distribution
};

namespace vmf {

namespace detail {

inline void require_dim(int d) {
    if (d < 2) throw Error(Errc::invalid_dimension, "d = " + std::to_string(d) + " < 2");
}

inline void require_kappa(double kappa) {
    if (!(kappa >= 0.0) || !std::isfinite(kappa))
        throw Error(Errc::domain, "kappa must be finite and >= 0");
}

// log 0F1(; b; y) for b > 0, y >= 0 by direct summation. Every term is
// positive, so the only hazard is overflow; the running sum is rescaled and
// the scale is carried in log form.
inline double log_hyp0f1_series(double b, double y) {
    if (y == 0.0) return 0.0;
    double term = 1.0;
    double sum = 1.0;
    double log_scale = 0.0;
    for (int m = 0; m < 1'000'000; ++m) {
        term *= y / ((m + 1.0) * (b + m));
        sum += term;
        if (sum > 1e280) {
            log_scale += std::log(sum);
            term /= sum;
            sum = 1.0;
        }
        // past the peak of the term sequence and below double resolution
        if ((m + 1.0) * (b + m) > y && term < sum * 1e-17) break;
    }
    return log_scale + std::log(sum);
}

inline double log_bessel_i_series(double order, double x) {
    return order * std::log(0.5 * x) - std::lgamma(order + 1.0) +
           log_hyp0f1_series(order + 1.0, 0.25 * x * x);
}

// Uniform (Debye) expansion for large order: sum_k u_k(t) / order^k.
inline double log_bessel_i_debye(double order, double x) {
    const double z = x / order;
    const double sq = std::sqrt(1.0 + z * z);
    const double t = 1.0 / sq;
    const double eta = sq + std::log(z / (1.0 + sq));
    const double t2 = t * t;

    const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
    const double u2 = t2 * (81.0 + t2 * (-462.0 + t2 * 385.0)) / 1152.0;
    const double u3 =
        t * t2 * (30375.0 + t2 * (-369603.0 + t2 * (765765.0 - t2 * 425425.0))) / 414720.0;
    const double u4 =
        t2 * t2 *
        (4465125.0 + t2 * (-94121676.0 + t2 * (349922430.0 +
                                               t2 * (-446185740.0 + t2 * 185910725.0)))) /
        39813120.0;
    const double u5 =
        t * t2 * t2 *
        (1519035525.0 +
         t2 * (-49286948607.0 +
               t2 * (284499769554.0 +
                     t2 * (-614135872350.0 + t2 * (566098157625.0 - t2 * 188699385875.0))))) /
        6688604160.0;
    const double u6 =
        t2 * t2 * t2 *
        (2757049477875.0 +
         t2 * (-127577298354750.0 +
               t2 * (1050760774457901.0 +
                     t2 * (-3369032068261860.0 +
                           t2 * (5104696716244125.0 +
                                 t2 * (-3685299006138750.0 + t2 * 1023694168371875.0)))))) /
        4815794995200.0;

    const double iv = 1.0 / order;
    const double series =
        1.0 + iv * (u1 + iv * (u2 + iv * (u3 + iv * (u4 + iv * (u5 + iv * u6)))));
    return -0.5 * std::log(2.0 * std::numbers::pi * order) + order * eta -
           0.25 * std::log1p(z * z) + std::log(series);
}

// Hankel large-argument expansion, used for small orders at large x.
inline double log_bessel_i_hankel(double order, double x) {
    const double mu = 4.0 * order * order;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double odd = 2.0 * k - 1.0;
        const double next = -term * (mu - odd * odd) / (8.0 * k * x);
        if (std::abs(next) >= std::abs(term)) break;  // asymptotic: stop at smallest term
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

// Branch boundaries, validated against 60-digit references (see tests).
inline constexpr double kSeriesMaxX = 500.0;
inline constexpr double kDebyeMinOrder = 20.0;

}  // namespace detail

/// log S_{d-1} = log(2 pi^{d/2} / Gamma(d/2)).
inline double log_surface_area(int d) {
    detail::require_dim(d);
    const double n = 0.5 * d;
    return std::log(2.0) + n * std::log(std::numbers::pi) - std::lgamma(n);
}

/// log I_order(x) for order, x >= 0.
inline double log_bessel_i(double order, double x) {
    if (!(order >= 0.0) || !(x >= 0.0) || !std::isfinite(order) || !std::isfinite(x))
        throw Error(Errc::domain, "log_bessel_i needs finite order >= 0 and x >= 0");
    if (x == 0.0) return order == 0.0 ? 0.0 : numeric::kNegInf;
    if (x <= detail::kSeriesMaxX) return detail::log_bessel_i_series(order, x);
    if (order >= detail::kDebyeMinOrder) return detail::log_bessel_i_debye(order, x);
    return detail::log_bessel_i_hankel(order, x);
}

/// log alpha(kappa) = log 0F1(; d/2; kappa^2/4) = -log(S_{d-1} C_d(kappa)).
inline double log_alpha(int d, double kappa) {
    detail::require_dim(d);
    detail::require_kappa(kappa);
    if (kappa == 0.0) return 0.0;
    const double n = 0.5 * d;
    const double order = n - 1.0;
    if (kappa <= detail::kSeriesMaxX) return detail::log_hyp0f1_series(n, 0.25 * kappa * kappa);
    return log_bessel_i(order, kappa) - order * std::log(0.5 * kappa) + std::lgamma(n);
}

/// log C_d(kappa), the vMF normalizing constant; at kappa = 0 this is the
/// uniform density -log S_{d-1}.
inline double log_c_d(int d, double kappa) {
    return -log_surface_area(d) - log_alpha(d, kappa);
}

inline double vmf_log_pdf(const VmfParams& params, const UnitVector& z) {
    const double cosine = params.mean.dot(z);
    return log_c_d(static_cast<int>(z.dim()), params.kappa) + params.kappa * cosine;
}

/// Mean resultant length A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa).
inline double mean_resultant_length(int d, double kappa) {
    detail::require_dim(d);
    detail::require_kappa(kappa);
    if (kappa == 0.0) return 0.0;
    const double n = 0.5 * d;
    return std::exp(log_bessel_i(n, kappa) - log_bessel_i(n - 1.0, kappa));
}

namespace detail {

inline std::vector<double> gaussian_vector(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(d);
    for (double& x : v) x = normal(rng);
    return v;
}

inline UnitVector uniform_direction(std::size_t d, std::mt19937_64& rng) {
    for (;;) {
        auto v = gaussian_vector(d, rng);
        if (numeric::norm2(v) > 1e-12) return UnitVector::normalized(std::move(v));
    }
}

// Ulrich-Wood draw of the cosine W = <mu, z>, returned together with 1 - W^2
// computed without cancellation.
inline std::pair<double, double> wood_cosine(std::size_t d, double kappa, std::mt19937_64& rng) {
    const double dm1 = static_cast<double>(d) - 1.0;
    const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
    const double x0 = (1.0 - b) / (1.0 + b);
    const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);
    std::gamma_distribution<double> gamma(0.5 * dm1, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (;;) {
        const double g1 = gamma(rng);
        const double g2 = gamma(rng);
        const double beta = g1 / (g1 + g2);
        const double den = 1.0 - (1.0 - b) * beta;
        const double w = (1.0 - (1.0 + b) * beta) / den;
        const double one_minus_w = 2.0 * b * beta / den;
        const double u = unif(rng);
        if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u))
            return {w, one_minus_w * (2.0 - one_minus_w)};
    }
}

inline UnitVector draw_vmf(const VmfParams& params, std::mt19937_64& rng) {
    const std::size_t d = params.mean.dim();
    if (params.kappa == 0.0) return uniform_direction(d, rng);
    const auto [w, one_minus_w2] = wood_cosine(d, params.kappa, rng);
    // Random tangent direction at the mean.
    std::vector<double> tangent;
    double tn = 0.0;
    do {
        tangent = gaussian_vector(d, rng);
        const double proj = numeric::dot(tangent, params.mean.coords());
        for (std::size_t i = 0; i < d; ++i) tangent[i] -= proj * params.mean[i];
        tn = numeric::norm2(tangent);
    } while (tn < 1e-12);
    const double s = std::sqrt(std::max(0.0, one_minus_w2)) / tn;
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = w * params.mean[i] + s * tangent[i];
    return UnitVector::normalized(std::move(out));
}

}  // namespace detail

/// n i.i.d. vMF draws; the generator is owned by the call and seeded from `seed`.
inline std::vector<UnitVector> sample_vmf(const VmfParams& params, std::uint64_t seed,
                                          std::size_t n) {
    detail::require_kappa(params.kappa);
    std::mt19937_64 rng(seed);
    std::vector<UnitVector> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(detail::draw_vmf(params, rng));
    return out;
}

}  // namespace vmf
}  // namespace osrue
