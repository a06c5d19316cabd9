#pragma once

#include <cmath>

#include <coxfield/error.hpp>
#include <coxfield/scalar_math.hpp>

namespace coxfield {

/**
 * Elastic-net penalty r(b) = alpha * |b|_1 + eta / 2 * |b|_2^2.
 *
 * Also constructible from the (strength, l1_ratio) parametrization with
 * alpha = strength * l1_ratio and eta = strength * (1 - l1_ratio).
 */
struct ElasticNetPenalty {
    double alpha = 0.0;
    double eta = 0.0;

    ElasticNetPenalty() = default;
    ElasticNetPenalty(double alpha_, double eta_) : alpha(alpha_), eta(eta_) {
        if (!(alpha >= 0.0) || !(eta >= 0.0)) {
            throw DomainError("ElasticNetPenalty: alpha and eta must be nonnegative");
        }
    }

    static ElasticNetPenalty from_strength(double rho, double l1_ratio) {
        if (!(rho >= 0.0) || !(l1_ratio >= 0.0 && l1_ratio <= 1.0)) {
            throw DomainError("ElasticNetPenalty: need rho >= 0 and l1_ratio in [0, 1]");
        }
        return {rho * l1_ratio, rho * (1.0 - l1_ratio)};
    }

    double strength() const { return alpha + eta; }
    double l1_ratio() const { return strength() > 0.0 ? alpha / strength() : 1.0; }

    double value(double b) const { return alpha * std::abs(b) + 0.5 * eta * b * b; }
};

// Per-observation Cox loss g(x, lam, delta) = lam * exp(x) - delta * x and its
// derivatives in x. lam is the cumulative hazard at the subject's time.

inline double g(double x, double lam, int delta) { return std::exp(x) * lam - delta * x; }

inline double g_dot(double x, double lam, int delta) { return lam * std::exp(x) - delta; }

inline double g_ddot(double x, double lam, int /*delta*/) { return lam * std::exp(x); }

/**
 * prox of g(., lam, delta) with step tau:
 *   argmin_z (z - u)^2 / (2 tau) + g(z, lam, delta)
 *     = u + tau * delta - W0(tau * lam * exp(tau * delta + u)).
 * The W0 argument is handled in log space once it would overflow.
 * tau = 0 is accepted as the limit (identity map).
 */
inline double prox_g(double u, double lam, int delta, double tau) {
    if (!(tau >= 0.0)) throw DomainError("prox_g: tau must be nonnegative");
    if (!(lam >= 0.0)) throw DomainError("prox_g: lam must be nonnegative");
    if (tau == 0.0) return u;
    const double shift = u + tau * delta;
    if (lam == 0.0) return shift;
    const double log_arg = std::log(tau * lam) + shift;
    return shift - lambert_w0_exp(log_arg);
}

// With W = W0(tau lam exp(tau delta + u)) the prox satisfies lam exp(prox) = W / tau,
// which gives cancellation-free forms of both envelope derivatives.
namespace detail {
inline double prox_g_lambert(double u, double lam, int delta, double tau) {
    return lambert_w0_exp(std::log(tau * lam) + u + tau * delta);
}
}  // namespace detail

/// Derivative of the zero-temperature Moreau envelope: (u - prox) / tau = g_dot(prox).
inline double moreau_dot_g(double u, double lam, int delta, double tau) {
    if (!(tau >= 0.0)) throw DomainError("moreau_dot_g: tau must be nonnegative");
    if (tau == 0.0 || lam == 0.0) return g_dot(prox_g(u, lam, delta, tau), lam, delta);
    return detail::prox_g_lambert(u, lam, delta, tau) / tau - delta;
}

/// Second derivative of the Moreau envelope: g_ddot(prox) / (1 + tau * g_ddot(prox)).
inline double moreau_ddot_g(double u, double lam, int delta, double tau) {
    if (!(tau >= 0.0)) throw DomainError("moreau_ddot_g: tau must be nonnegative");
    if (tau == 0.0 || lam == 0.0) return g_ddot(u, lam, delta);
    const double w = detail::prox_g_lambert(u, lam, delta, tau);
    return w / (tau * (1.0 + w));
}

/// Value of the Moreau envelope min_z (z - u)^2 / (2 tau) + g(z, lam, delta).
inline double moreau_g(double u, double lam, int delta, double tau) {
    const double z = prox_g(u, lam, delta, tau);
    return (z - u) * (z - u) / (2.0 * tau) + g(z, lam, delta);
}

inline double prox_enet(double u, double tau_hat, const ElasticNetPenalty& pen) {
    return soft_threshold(u, pen.alpha * tau_hat) / (1.0 + pen.eta * tau_hat);
}

// At the kink |u| = alpha * tau_hat the derivative is taken as 0.
inline double prox_enet_dot(double u, double tau_hat, const ElasticNetPenalty& pen) {
    return std::abs(u) > pen.alpha * tau_hat ? 1.0 / (1.0 + pen.eta * tau_hat) : 0.0;
}

}  // namespace coxfield
