#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <coxfield/error.hpp>

namespace coxfield {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kBranchPoint = -0.367879441171442321595523770161;  // -1/e

/**
 * Principal branch W0 of the Lambert W function, i.e. the solution w >= -1
 * of w * exp(w) = x for x >= -1/e.
 *
 * Halley iteration started from a series expansion near the branch point,
 * a Pade-like guess near zero and log(x) - log(log(x)) for large x.
 * Inputs below -1/e by at most 1e-12 are clamped to the branch point.
 */
inline double lambert_w0(double x) {
    if (std::isnan(x)) return x;
    if (x < kBranchPoint) {
        if (x < kBranchPoint - 1e-12) {
            throw DomainError("lambert_w0: argument below -1/e");
        }
        return -1.0;
    }
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return x;

    double w;
    const double q = x - kBranchPoint;
    if (q < 0.3) {
        // branch point expansion in p = sqrt(2 (e x + 1))
        const double p = std::sqrt(2.0 * std::numbers::e * q);
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
    } else if (x < std::numbers::e) {
        w = std::log1p(x) * (1.0 - std::log1p(std::log1p(x)) / (2.0 + std::log1p(x)));
    } else {
        const double lx = std::log(x);
        const double llx = std::log(lx);
        w = lx - llx + llx / lx;
    }
    if (q == 0.0) return -1.0;

    for (int iter = 0; iter < 50; ++iter) {
        const double ew = std::exp(w);
        const double f = w * ew - x;
        const double wp1 = w + 1.0;
        if (wp1 == 0.0) break;
        const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        const double step = f / denom;
        w -= step;
        if (w < -1.0) w = -1.0;
        if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(w))) {
            break;
        }
    }
    return w;
}

/// W0(exp(log_x)) for arguments whose exponential would overflow.
inline double lambert_w0_exp(double log_x) {
    if (log_x < 700.0) return lambert_w0(std::exp(log_x));
    // w + log(w) = log_x, Newton from the asymptotic guess
    double w = log_x - std::log(log_x);
    for (int iter = 0; iter < 50; ++iter) {
        const double f = w + std::log(w) - log_x;
        const double step = f / (1.0 + 1.0 / w);
        w -= step;
        if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * w) break;
    }
    return w;
}

inline double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

/// Upper tail P[Z > x] of the standard normal distribution.
inline double std_normal_tail(double x) { return 0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0); }

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double soft_threshold(double x, double a) { return relu(x - a) - relu(-x - a); }

}  // namespace coxfield
