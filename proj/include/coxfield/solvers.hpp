#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <coxfield/error.hpp>
#include <coxfield/prox.hpp>
#include <coxfield/survival.hpp>

namespace coxfield {

enum class Solver { amp, cd };

inline const char* to_string(Solver s) { return s == Solver::amp ? "amp" : "cd"; }

inline Solver solver_from_string(const std::string& s) {
    if (s == "amp") return Solver::amp;
    if (s == "cd") return Solver::cd;
    throw DomainError("unknown solver '" + s + "' (expected amp or cd)");
}

struct SolverConfig {
    double tol = 1e-8;
    int max_epochs = 1000;
    /// weight of the proposed iterate in the damped update (AMP only)
    double damping = 0.5;

    static SolverConfig defaults(Solver s) {
        SolverConfig cfg;
        cfg.max_epochs = s == Solver::amp ? 1000 : 100;
        return cfg;
    }

    void validate() const {
        if (!(tol > 0.0)) throw DomainError("SolverConfig: tol must be positive");
        if (max_epochs < 1) throw DomainError("SolverConfig: max_epochs must be positive");
        if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("SolverConfig: damping must lie in (0, 1]");
    }
};

struct FitResult {
    Solver solver = Solver::amp;
    Vector beta_hat;
    StepHazard hazard;
    /// AMP field xi (AMP only; empty for CD)
    Vector xi;
    /// AMP effective step sizes (AMP only; zero for CD)
    double tau = 0.0;
    double tau_hat = 0.0;
    bool converged = false;
    int epochs = 0;
    double final_err = std::numeric_limits<double>::infinity();
    /// no events in the data: the fit is the trivial beta = 0
    bool no_events = false;
    /// CD coordinates skipped because of zero curvature
    int skipped_coordinates = 0;
    std::string diagnostic;
};

namespace detail {

inline void require_finite(const Vector& v, const char* what, int epoch) {
    if (!v.allFinite()) {
        throw NumericalError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch) +
                             " (regularization too weak?)");
    }
}

inline void require_finite(double v, const char* what, int epoch) {
    if (!std::isfinite(v)) {
        throw NumericalError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch) +
                             " (regularization too weak?)");
    }
}

inline double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

inline FitResult trivial_fit(const SurvivalDataset& data, Solver solver) {
    FitResult fit;
    fit.solver = solver;
    fit.beta_hat = Vector::Zero(data.p());
    if (solver == Solver::amp) {
        fit.xi = Vector::Zero(data.n());
        fit.tau = 1.0;
        fit.tau_hat = 1.0;
    }
    fit.converged = true;
    fit.epochs = 1;
    fit.final_err = 0.0;
    fit.no_events = true;
    fit.diagnostic = "no events: beta = 0 and the hazard is identically zero";
    return fit;
}

inline void check_penalty(const ElasticNetPenalty& pen) {
    if (!(pen.strength() > 0.0)) {
        throw DomainError("solver: regularization strength must be positive (the minimizer may not exist)");
    }
}

}  // namespace detail

/**
 * COX-AMP: generalized AMP steps in beta alternated with Nelson-Aalen
 * updates of the hazard. One epoch
 *
 *   Lambda  <- NA(T, prox_g(xi, Lambda(T), Delta, tau))
 *   xi      <- X beta + tau * Mdot(xi, tau)
 *   tau_hat <- zeta / < Mddot(xi, tau) >
 *   psi     <- beta - tau_hat X' Mdot(xi, tau)
 *   beta    <- prox_enet(psi, tau_hat)
 *   tau     <- tau_hat < prox_enet'(psi, tau_hat) >
 *
 * with xi, tau_hat, beta and tau damped towards the proposals by cfg.damping.
 * The error is the root of the summed squared sup-norm changes of all
 * iterates. The returned beta_hat is the last (undamped) prox output so that
 * entries shrunk to zero are exactly zero.
 */
inline FitResult fit_amp(const SurvivalDataset& data, const ElasticNetPenalty& pen,
                         const FitResult* init = nullptr, SolverConfig cfg = SolverConfig::defaults(Solver::amp)) {
    cfg.validate();
    detail::check_penalty(pen);
    if (data.event_count() == 0) return detail::trivial_fit(data, Solver::amp);

    const Matrix& x = data.design();
    const auto& delta = data.events();
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    const double zeta = data.zeta();
    double d = cfg.damping;

    Vector beta = Vector::Zero(p);
    Vector xi = Vector::Zero(n);
    double tau = 1.0;
    double tau_hat = 1.0;
    if (init != nullptr && init->beta_hat.size() == p) {
        beta = init->beta_hat;
        xi = init->xi.size() == n ? init->xi : Vector(x * beta);
        if (init->tau > 0.0) tau = init->tau;
        if (init->tau_hat > 0.0) tau_hat = init->tau_hat;
    }
    Vector lam = init != nullptr && init->beta_hat.size() == p ? init->hazard.at(data.times())
                                                                : nelson_aalen_at_times(data, Vector::Zero(n));

    FitResult fit;
    fit.solver = Solver::amp;
    constexpr int kStallWindow = 40;
    constexpr double kMinDamping = 1.0 / 64.0;
    double best_err = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    Vector beta_prop = beta;
    Vector pred(n), mdot(n), psi(p);
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        fit.epochs = epoch;

        for (Eigen::Index i = 0; i < n; ++i) pred[i] = prox_g(xi[i], lam[i], delta[i], tau);
        detail::require_finite(pred, "prox output", epoch);
        Vector lam_new = nelson_aalen_at_times(data, pred);
        double err2 = std::pow(detail::max_abs_diff(lam_new, lam), 2);
        lam.swap(lam_new);

        const Vector eta = x * beta;
        Vector xi_new(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double proposal = eta[i] + tau * moreau_dot_g(xi[i], lam[i], delta[i], tau);
            xi_new[i] = (1.0 - d) * xi[i] + d * proposal;
        }
        detail::require_finite(xi_new, "xi", epoch);
        err2 += std::pow(detail::max_abs_diff(xi_new, xi), 2);
        xi.swap(xi_new);

        double curvature = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            mdot[i] = moreau_dot_g(xi[i], lam[i], delta[i], tau);
            curvature += moreau_ddot_g(xi[i], lam[i], delta[i], tau);
        }
        curvature /= static_cast<double>(n);
        if (!(curvature > 0.0)) throw NumericalError("fit_amp: vanishing average curvature");
        const double tau_hat_new = (1.0 - d) * tau_hat + d * zeta / curvature;
        detail::require_finite(tau_hat_new, "tau_hat", epoch);
        err2 += std::pow(tau_hat_new - tau_hat, 2);
        tau_hat = tau_hat_new;

        psi.noalias() = beta - tau_hat * (x.transpose() * mdot);
        double active = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            beta_prop[j] = prox_enet(psi[j], tau_hat, pen);
            active += prox_enet_dot(psi[j], tau_hat, pen);
        }
        const Vector beta_new = (1.0 - d) * beta + d * beta_prop;
        detail::require_finite(beta_new, "beta", epoch);
        err2 += std::pow(detail::max_abs_diff(beta_new, beta), 2);
        beta = beta_new;

        const double tau_new = (1.0 - d) * tau + d * tau_hat * active / static_cast<double>(p);
        err2 += std::pow(tau_new - tau, 2);
        tau = tau_new;

        fit.final_err = std::sqrt(err2);
        detail::require_finite(fit.final_err, "error", epoch);
        if (fit.final_err < cfg.tol) {
            fit.converged = true;
            break;
        }
        // A coordinate sitting next to the soft-threshold kink can make the
        // active fraction in the tau update flip every epoch. When the error
        // stalls, shrink the damping weight so the flips die out.
        if (fit.final_err < best_err * 0.5) {
            best_err = fit.final_err;
            best_epoch = epoch;
        } else if (epoch - best_epoch >= kStallWindow && d > kMinDamping) {
            d = std::max(0.5 * d, kMinDamping);
            best_epoch = epoch;
            best_err = fit.final_err;
        }
    }

    fit.beta_hat = beta_prop;
    fit.xi = xi;
    fit.tau = tau;
    fit.tau_hat = tau_hat;
    fit.hazard = nelson_aalen(data, x * fit.beta_hat);
    if (!fit.converged) fit.diagnostic = "maximum number of epochs reached";
    return fit;
}

/**
 * Coordinate-wise descent on the Cox partial likelihood. Each epoch
 * linearizes the loss at (beta, Lambda) with score s = X'(W 1 - Delta) and
 * curvature M = X' W X, W = diag(Lambda(T) exp(X beta)), runs one sweep of
 * elastic-net coordinate updates on that quadratic model and then refreshes
 * Lambda by Nelson-Aalen. M is never formed: the sweep keeps the residual
 * X (phi - beta) and evaluates the needed row of M against it.
 */
inline FitResult fit_cd(const SurvivalDataset& data, const ElasticNetPenalty& pen, const FitResult* init = nullptr,
                        SolverConfig cfg = SolverConfig::defaults(Solver::cd)) {
    cfg.validate();
    detail::check_penalty(pen);
    if (data.event_count() == 0) return detail::trivial_fit(data, Solver::cd);

    const Matrix& x = data.design();
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    const Vector delta = data.events().cast<double>();

    Vector beta = init != nullptr && init->beta_hat.size() == p ? init->beta_hat : Vector(Vector::Zero(p));
    Vector eta = x * beta;
    Vector lam = nelson_aalen_at_times(data, eta);

    FitResult fit;
    fit.solver = Solver::cd;
    Vector weights(n), resid(n), score(p);
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        fit.epochs = epoch;
        weights = lam.array() * eta.array().exp();
        detail::require_finite(weights, "weights", epoch);
        score.noalias() = x.transpose() * (weights - delta);

        Vector phi = beta;
        resid.setZero();
        int skipped = 0;
        for (Eigen::Index k = 0; k < p; ++k) {
            const auto col = x.col(k);
            const double curv = (weights.array() * col.array().square()).sum();
            if (!(curv > 0.0)) {
                ++skipped;
                continue;
            }
            // e_k' M (beta - phi) = -sum_i x_ik w_i resid_i
            const double cross = -(col.array() * weights.array() * resid.array()).sum();
            const double arg = phi[k] + (cross - score[k]) / curv;
            const double updated = prox_enet(arg, 1.0 / curv, pen);
            if (updated != phi[k]) {
                resid += (updated - phi[k]) * col;
                phi[k] = updated;
            }
        }
        fit.skipped_coordinates = std::max(fit.skipped_coordinates, skipped);
        detail::require_finite(phi, "beta", epoch);

        eta += resid;
        Vector lam_new = nelson_aalen_at_times(data, eta);
        const double err =
            std::sqrt(std::pow(detail::max_abs_diff(phi, beta), 2) + std::pow(detail::max_abs_diff(lam_new, lam), 2));
        beta.swap(phi);
        lam.swap(lam_new);
        fit.final_err = err;
        detail::require_finite(err, "error", epoch);
        if (err < cfg.tol) {
            fit.converged = true;
            break;
        }
    }

    fit.beta_hat = beta;
    fit.hazard = nelson_aalen(data, x * beta);
    if (fit.skipped_coordinates > 0) fit.diagnostic = "zero-curvature coordinates skipped; ";
    if (!fit.converged) fit.diagnostic += "maximum number of epochs reached";
    return fit;
}

inline FitResult fit(const SurvivalDataset& data, const ElasticNetPenalty& pen, Solver solver,
                     const FitResult* init, const SolverConfig& cfg) {
    return solver == Solver::amp ? fit_amp(data, pen, init, cfg) : fit_cd(data, pen, init, cfg);
}

inline FitResult fit(const SurvivalDataset& data, const ElasticNetPenalty& pen, Solver solver) {
    return fit(data, pen, solver, nullptr, SolverConfig::defaults(solver));
}

/**
 * Warm-started regularization path. Grid points are fitted in the given
 * order (decreasing strength), each initialized from the last successful
 * fit. A point whose fit breaks down numerically is recorded with
 * converged = false and the path continues.
 */
inline std::vector<FitResult> reg_path(const SurvivalDataset& data, const std::vector<ElasticNetPenalty>& grid,
                                       Solver solver, const SolverConfig& cfg) {
    std::vector<FitResult> out;
    out.reserve(grid.size());
    std::optional<FitResult> warm;
    for (const auto& pen : grid) {
        try {
            out.push_back(fit(data, pen, solver, warm ? &*warm : nullptr, cfg));
            if (out.back().converged) warm = out.back();
        } catch (const NumericalError& e) {
            FitResult failed;
            failed.solver = solver;
            failed.diagnostic = e.what();
            out.push_back(std::move(failed));
        }
    }
    return out;
}

}  // namespace coxfield
