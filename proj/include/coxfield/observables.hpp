#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <coxfield/error.hpp>
#include <coxfield/prox.hpp>
#include <coxfield/solvers.hpp>
#include <coxfield/survival.hpp>

namespace coxfield {

/// Order-parameter estimates obtained from one fit, with per-quantity validity.
struct OrderParameterEstimate {
    Solver source = Solver::amp;
    double w = 0.0;
    double v = 0.0;
    double tau = 0.0;
    double w_hat = 0.0;
    double v_hat = 0.0;
    double tau_hat = 0.0;
    // v_hat from the curvature average tau_hat^2 <g_ddot> / zeta, reported alongside
    double v_hat_curvature = 0.0;
    // A = w^2 + v^2 and the raw v^2 = A - w^2 before the square root
    double a_norm = 0.0;
    double v_sq_raw = 0.0;
    bool w_valid = true;
    bool v_valid = true;
    bool w_hat_valid = true;
};

/// psi = beta_hat - tau_hat X' g_dot(X beta_hat, Lambda(T), Delta).
inline Vector local_field(const SurvivalDataset& data, const Vector& beta_hat, const StepHazard& hazard,
                          double tau_hat) {
    if (!(tau_hat >= 0.0)) throw DomainError("local_field: tau_hat must be nonnegative");
    if (beta_hat.size() != data.p()) throw DomainError("local_field: beta_hat has wrong length");
    const Vector eta = data.design() * beta_hat;
    Vector gd(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) gd[i] = g_dot(eta[i], hazard(data.times()[i]), data.events()[i]);
    return beta_hat - tau_hat * (data.design().transpose() * gd);
}

namespace detail {

inline OrderParameterEstimate estimate_chain(const SurvivalDataset& data, const Vector& beta_hat,
                                             const StepHazard& hazard, double tau, double tau_hat, double zeta,
                                             Solver source) {
    if (!(tau > 0.0 && tau_hat > 0.0)) throw DomainError("estimate: tau and tau_hat must be positive");
    const double n = static_cast<double>(data.n());
    const double p = static_cast<double>(data.p());
    const Vector eta = data.design() * beta_hat;
    Vector gd(data.n());
    double mean_gdd = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double lam = hazard(data.times()[i]);
        gd[i] = g_dot(eta[i], lam, data.events()[i]);
        mean_gdd += g_ddot(eta[i], lam, data.events()[i]);
    }
    mean_gdd /= n;

    OrderParameterEstimate est;
    est.source = source;
    est.tau = tau;
    est.tau_hat = tau_hat;
    est.v_hat = tau_hat * std::sqrt(gd.squaredNorm() / n / zeta);
    est.v_hat_curvature = tau_hat * std::sqrt(mean_gdd / zeta);

    const Vector psi = beta_hat - tau_hat * (data.design().transpose() * gd);
    const double w_hat_sq = psi.squaredNorm() / p - est.v_hat * est.v_hat;
    est.w_hat = std::sqrt(std::max(0.0, w_hat_sq));

    est.a_norm = (eta + tau * gd).squaredNorm() / n;
    const double ratio = zeta * tau / tau_hat;
    const double b = 0.5 * eta.squaredNorm() / n - 0.5 * zeta * est.v_hat * est.v_hat * tau * tau / (tau_hat * tau_hat) -
                     0.5 * est.a_norm * (1.0 - 2.0 * ratio);
    if (est.w_hat > 0.0) {
        est.w = b / (est.w_hat * ratio);
    } else {
        est.w = 0.0;
        est.w_hat_valid = false;
        est.w_valid = (b == 0.0);
    }
    est.v_sq_raw = est.a_norm - est.w * est.w;
    if (est.v_sq_raw < 0.0) {
        est.v_valid = false;
        est.v = 0.0;
    } else {
        est.v = std::sqrt(est.v_sq_raw);
    }
    return est;
}

}  // namespace detail

/// Estimates from a converged AMP fit, using its own tau and tau_hat.
inline OrderParameterEstimate estimate_from_amp(const SurvivalDataset& data, const FitResult& fit, double zeta) {
    if (fit.no_events) throw DomainError("estimate_from_amp: data has no events");
    return detail::estimate_chain(data, fit.beta_hat, fit.hazard, fit.tau, fit.tau_hat, zeta, Solver::amp);
}

/**
 * Recovers (tau, tau_hat) for a fit that does not produce them. With k the
 * fraction of nonzero coefficients, solves
 *   zeta (k - eta tau) = <tau g_ddot / (1 + tau g_ddot)>,   tau_hat = tau / (k - eta tau)
 * for tau in (0, k / eta) (or (0, inf) when eta = 0) by safeguarded Newton.
 */
inline std::pair<double, double> estimate_tau_cd(const SurvivalDataset& data, const FitResult& fit,
                                                 const ElasticNetPenalty& pen, double zeta) {
    const double p = static_cast<double>(data.p());
    const double k = static_cast<double>((fit.beta_hat.array() != 0.0).count()) / p;
    if (k == 0.0) throw DomainError("estimate_tau_cd: null model, tau_hat undefined");
    const Vector eta = data.design() * fit.beta_hat;
    Vector curv(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) curv[i] = g_ddot(eta[i], fit.hazard(data.times()[i]), data.events()[i]);
    const double inv_n = 1.0 / static_cast<double>(data.n());

    // f is strictly decreasing: f(0) = zeta k > 0
    const auto f = [&](double t) {
        double avg = 0.0;
        double davg = 0.0;
        for (Eigen::Index i = 0; i < curv.size(); ++i) {
            const double c = curv[i];
            avg += t * c / (1.0 + t * c);
            davg += c / ((1.0 + t * c) * (1.0 + t * c));
        }
        return std::pair{zeta * (k - pen.eta * t) - avg * inv_n, -zeta * pen.eta - davg * inv_n};
    };

    double lo = 0.0;
    double hi;
    if (pen.eta > 0.0) {
        hi = k / pen.eta;
    } else {
        hi = 1.0;
        int expansions = 0;
        while (f(hi).first > 0.0) {
            hi *= 2.0;
            if (++expansions > 200) {
                throw NumericalError("estimate_tau_cd: no sign change (zeta * k = " + std::to_string(zeta * k) +
                                     " is not below the curvature bound)");
            }
        }
    }
    if (f(hi).first > 0.0) {
        throw NumericalError("estimate_tau_cd: no sign change in (0, k / eta)");
    }
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const auto [val, der] = f(t);
        if (val > 0.0) lo = t; else hi = t;
        if (hi - lo <= 1e-10 * std::max(1.0, hi) || val == 0.0) break;
        double next = t - val / der;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-14 * std::max(1.0, t)) { t = next; break; }
        t = next;
    }
    const double tau = t;
    return {tau, tau / (k - pen.eta * tau)};
}

/// Estimates from a CD fit: tau and tau_hat from estimate_tau_cd, then the same chain as for AMP.
inline OrderParameterEstimate estimate_from_cd(const SurvivalDataset& data, const FitResult& fit,
                                               const ElasticNetPenalty& pen, double zeta) {
    if (fit.no_events) throw DomainError("estimate_from_cd: data has no events");
    const auto [tau, tau_hat] = estimate_tau_cd(data, fit, pen, zeta);
    return detail::estimate_chain(data, fit.beta_hat, fit.hazard, tau, tau_hat, zeta, Solver::cd);
}

/// w = beta0' beta_hat / (sqrt(p) |beta0|), v^2 = |beta_hat|^2 / p - w^2.
inline std::pair<double, double> true_overlaps(const Vector& beta_hat, const Vector& beta0) {
    if (beta_hat.size() != beta0.size()) throw DomainError("true_overlaps: length mismatch");
    const double norm0 = beta0.norm();
    if (!(norm0 > 0.0)) throw DomainError("true_overlaps: beta0 is zero");
    const double p = static_cast<double>(beta0.size());
    const double w = beta0.dot(beta_hat) / (std::sqrt(p) * norm0);
    const double v2 = beta_hat.squaredNorm() / p - w * w;
    return {w, std::sqrt(std::max(0.0, v2))};
}

}  // namespace coxfield
