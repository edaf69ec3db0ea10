#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace osrue::numeric {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(args[i])); -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> args) {
    double hi = kNegInf;
    for (double a : args) hi = std::max(hi, a);
    if (hi == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double a : args) sum += std::exp(a - hi);
    return hi + std::log(sum);
}

inline double log_add_exp(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == kNegInf) return a;
    return a + std::log1p(std::exp(b - a));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace osrue::numeric
