#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <coxfield/error.hpp>
#include <coxfield/prox.hpp>
#include <coxfield/scalar_math.hpp>
#include <coxfield/survival.hpp>
#include <coxfield/synthgen.hpp>

namespace coxfield {

/// The six replica-symmetric scalars.
struct OrderParameters {
    double w = 0.0;
    double v = 0.0;
    double tau = 0.0;
    double w_hat = 0.0;
    double v_hat = 0.0;
    double tau_hat = 0.0;

    std::array<double, 6> as_array() const { return {w, v, tau, w_hat, v_hat, tau_hat}; }
    static OrderParameters from_array(const std::array<double, 6>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

    double max_abs_diff(const OrderParameters& o) const {
        const auto a = as_array();
        const auto b = o.as_array();
        double m = 0.0;
        for (std::size_t k = 0; k < 6; ++k) m = std::max(m, std::abs(a[k] - b[k]));
        return m;
    }
};

/// Everything the RS equations need to know about the model.
struct RsProblem {
    ElasticNetPenalty pen;
    double nu = 0.005;
    double theta0 = 1.0;
    double zeta = 2.0;
    GeneratorSpec gen;
};

/**
 * Population of i.i.d. tuples (Delta, T, Z0, Q) with Z0, Q ~ N(0, 1)
 * independent and (Delta, T) | Z0 drawn from the generator at linear
 * predictor theta0 * Z0.
 */
struct RsPopulation {
    Vector z0;
    Vector q;
    IntVector delta;
    Vector t;
    std::vector<Eigen::Index> order;

    Eigen::Index size() const { return z0.size(); }
};

inline RsPopulation sample_population(const GeneratorSpec& gen, double theta0, Eigen::Index size,
                                      std::uint64_t seed) {
    gen.validate();
    if (size < 100) throw DomainError("sample_population: population size must be at least 100");
    RsPopulation pop;
    pop.z0.resize(size);
    pop.q.resize(size);
    pop.delta.resize(size);
    pop.t.resize(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        auto eng = rng::make_engine(seed, rng::Stream::population, static_cast<std::uint64_t>(i));
        pop.z0[i] = rng::standard_normal(eng);
        pop.q[i] = rng::standard_normal(eng);
        const auto draw = sample_event(theta0 * pop.z0[i], gen, eng);
        pop.t[i] = draw.time;
        pop.delta[i] = draw.event;
    }
    pop.order.resize(static_cast<std::size_t>(size));
    std::iota(pop.order.begin(), pop.order.end(), Eigen::Index{0});
    std::stable_sort(pop.order.begin(), pop.order.end(),
                     [&pop](Eigen::Index a, Eigen::Index b) { return pop.t[a] < pop.t[b]; });
    return pop;
}

/// Functional order parameter Lambda, stored at the population times.
struct RsLambda {
    Vector at_population;
    StepHazard step;
    int iterations = 0;
};

struct LambdaOptions {
    double damping = 0.5;
    double tol = 1e-8;
    int max_iter = 500;
};

namespace detail {

inline std::size_t usize(const RsPopulation& pop) { return static_cast<std::size_t>(pop.size()); }

inline Vector population_na(const RsPopulation& pop, const Vector& lin_pred, StepHazard* step) {
    Vector out(pop.size());
    const auto n = usize(pop);
    detail::nelson_aalen_core({pop.t.data(), n}, {pop.delta.data(), n}, pop.order, {lin_pred.data(), n},
                              {out.data(), n}, step);
    return out;
}

inline Vector population_xi(const RsPopulation& pop, const Vector& lam, double w, double v, double tau) {
    Vector xi(pop.size());
    for (Eigen::Index i = 0; i < pop.size(); ++i) {
        xi[i] = prox_g(w * pop.z0[i] + v * pop.q[i], lam[i], pop.delta[i], tau);
    }
    return xi;
}

}  // namespace detail

/**
 * Solves the self-consistent pair
 *   Lambda(t) = E[Delta [T <= t] / S(T)],  S(t) = E[[T >= t] exp(xi)],
 *   xi = prox_g(w Z0 + v Q, Lambda(T), Delta, tau),
 * with expectations replaced by population means. Since the 1/N factors
 * cancel, one sweep is a weighted Nelson-Aalen estimate at weights exp(xi).
 * Starts from the Nelson-Aalen estimate at xi = w Z0 + v Q.
 */
inline RsLambda solve_lambda(const RsPopulation& pop, double w, double v, double tau,
                             const LambdaOptions& opt = {}, const Vector* init = nullptr) {
    if (!(tau >= 0.0)) throw DomainError("solve_lambda: tau must be nonnegative");
    Vector lam;
    if (init != nullptr && init->size() == pop.size()) {
        lam = *init;
    } else {
        lam = detail::population_na(pop, w * pop.z0 + v * pop.q, nullptr);
    }
    double change = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opt.max_iter; ++it) {
        const Vector proposal = detail::population_na(pop, detail::population_xi(pop, lam, w, v, tau), nullptr);
        change = (proposal - lam).cwiseAbs().maxCoeff();
        if (!std::isfinite(change)) throw NumericalError("solve_lambda: non-finite hazard");
        lam = (1.0 - opt.damping) * lam + opt.damping * proposal;
        if (change <= opt.tol) {
            RsLambda out;
            out.iterations = it;
            out.at_population = detail::population_na(pop, detail::population_xi(pop, lam, w, v, tau), &out.step);
            return out;
        }
    }
    throw NumericalError("solve_lambda: no convergence after " + std::to_string(opt.max_iter) +
                         " iterations (last change " + std::to_string(change) + ")");
}

/// max |NA(T, xi(Lambda)) - Lambda| over the population.
inline double lambda_residual(const RsPopulation& pop, const RsLambda& lambda, double w, double v, double tau) {
    const Vector again = detail::population_na(pop, detail::population_xi(pop, lambda.at_population, w, v, tau), nullptr);
    return (again - lambda.at_population).cwiseAbs().maxCoeff();
}

/**
 * Prior-side expectations of phi = prox_enet(w_hat beta0 / theta0 + v_hat Z, tau_hat)
 * under the Gauss-Bernoulli signal law, in closed form.
 */
struct PriorMoments {
    double beta0_phi;   // E[beta0 phi] / theta0
    double z_phi;       // E[Z phi]
    double phi2;        // E[phi^2]
    double prox_dot;    // E[prox_enet'(.)]
};

inline PriorMoments enet_prior_moments(double w_hat, double v_hat, double tau_hat, const ElasticNetPenalty& pen,
                                       double nu) {
    if (!(v_hat > 0.0)) throw NumericalError("enet_prior_moments: v_hat must be positive (chi undefined)");
    if (!(tau_hat > 0.0)) throw NumericalError("enet_prior_moments: tau_hat must be positive");
    const double a = pen.alpha * tau_hat;
    const double shrink = 1.0 / (1.0 + pen.eta * tau_hat);
    const double sigma1 = std::sqrt(v_hat * v_hat + w_hat * w_hat / nu);
    const double chi0 = a / v_hat;
    const double chi1 = a / sigma1;
    const double tail0 = std_normal_tail(chi0);
    const double tail1 = std_normal_tail(chi1);
    // E[st(sigma Z, a)^2] = 2 [ (sigma^2 + a^2) Phi(a / sigma) - sigma a phi(a / sigma) ]
    const auto st2 = [a](double sigma, double chi, double tail) {
        return 2.0 * ((sigma * sigma + a * a) * tail - sigma * a * std_normal_pdf(chi));
    };
    PriorMoments m;
    m.beta0_phi = 2.0 * shrink * w_hat * tail1;
    m.prox_dot = 2.0 * shrink * (nu * tail1 + (1.0 - nu) * tail0);
    m.z_phi = v_hat * m.prox_dot;
    m.phi2 = shrink * shrink * (nu * st2(sigma1, chi1, tail1) + (1.0 - nu) * st2(v_hat, chi0, tail0));
    return m;
}

/// Population means entering the data-side equations.
struct DataMoments {
    double z0_gdot;    // E[Z0 g_dot(xi)]
    double gdot2;      // E[g_dot(xi)^2] = E[(xi - w Z0 - v Q)^2] / tau^2
    double mddot;      // E[g_ddot(xi) / (1 + tau g_ddot(xi))]
};

inline DataMoments data_moments(const RsPopulation& pop, const RsLambda& lambda, double w, double v, double tau) {
    DataMoments m{0.0, 0.0, 0.0};
    for (Eigen::Index i = 0; i < pop.size(); ++i) {
        const double u = w * pop.z0[i] + v * pop.q[i];
        const double lam = lambda.at_population[i];
        const double gd = moreau_dot_g(u, lam, pop.delta[i], tau);
        m.z0_gdot += pop.z0[i] * gd;
        m.gdot2 += gd * gd;
        m.mddot += moreau_ddot_g(u, lam, pop.delta[i], tau);
    }
    const double inv = 1.0 / static_cast<double>(pop.size());
    m.z0_gdot *= inv;
    m.gdot2 *= inv;
    m.mddot *= inv;
    return m;
}

/**
 * One evaluation of the elastic-net RS right-hand sides at op, with Lambda
 * already solved at (op.w, op.v, op.tau).
 *
 * Data side (with xi - w Z0 - v Q = -tau g_dot(xi)):
 *   tau_hat' = zeta / E[g_ddot / (1 + tau g_ddot)]
 *   w_hat'   = w - (tau_hat' / zeta) E[Z0 g_dot]
 *   v_hat'^2 = tau_hat'^2 E[g_dot^2] / zeta
 * Prior side, evaluated at the new conjugate parameters:
 *   w' = E[beta0 phi] / theta0,  tau' = tau_hat' E[prox'],  v'^2 = E[phi^2] - w'^2.
 */
inline OrderParameters rs_rhs_enet(const OrderParameters& op, const RsPopulation& pop, const RsLambda& lambda,
                                   const RsProblem& problem) {
    const DataMoments dm = data_moments(pop, lambda, op.w, op.v, op.tau);
    if (!(dm.mddot > 0.0)) throw NumericalError("rs_rhs_enet: vanishing curvature average");
    OrderParameters next;
    next.tau_hat = problem.zeta / dm.mddot;
    next.w_hat = op.w - next.tau_hat / problem.zeta * dm.z0_gdot;
    next.v_hat = next.tau_hat * std::sqrt(dm.gdot2 / problem.zeta);

    const PriorMoments pm = enet_prior_moments(next.w_hat, next.v_hat, next.tau_hat, problem.pen, problem.nu);
    next.w = pm.beta0_phi;
    next.tau = next.tau_hat * pm.prox_dot;
    const double v2 = pm.phi2 - next.w * next.w;
    if (v2 < -1e-12 * std::max(1.0, pm.phi2)) {
        throw NumericalError("RS inconsistency: E[phi^2] < w^2");
    }
    next.v = std::sqrt(std::max(0.0, v2));
    return next;
}

struct RsOptions {
    double damping = 0.5;
    double tol = 1e-6;
    int max_iter = 2000;
    LambdaOptions lambda;
};

struct RsSolution {
    OrderParameters op;
    RsLambda lambda;
    bool converged = false;
    int iterations = 0;
    double final_change = std::numeric_limits<double>::infinity();
};

inline OrderParameters default_rs_start() { return {0.1, 0.1, 0.1, 0.1, 1.0, 1.0}; }

/**
 * Damped fixed-point iteration alternating solve_lambda and rs_rhs_enet on a
 * fixed population; converged when the sup-change of the six scalars is at
 * most opt.tol.
 */
inline RsSolution solve_rs(const RsProblem& problem, const RsPopulation& pop, const RsOptions& opt = {},
                           std::optional<OrderParameters> start = std::nullopt) {
    if (!(problem.pen.strength() > 0.0)) throw DomainError("solve_rs: regularization strength must be positive");
    if (!(problem.nu > 0.0 && problem.nu <= 1.0)) throw DomainError("solve_rs: nu must lie in (0, 1]");
    if (!(problem.zeta > 0.0)) throw DomainError("solve_rs: zeta must be positive");
    RsSolution sol;
    OrderParameters op = start.value_or(default_rs_start());
    Vector lam_warm;
    for (int it = 1; it <= opt.max_iter; ++it) {
        sol.lambda = solve_lambda(pop, op.w, op.v, op.tau, opt.lambda, lam_warm.size() ? &lam_warm : nullptr);
        lam_warm = sol.lambda.at_population;
        const OrderParameters proposal = rs_rhs_enet(op, pop, sol.lambda, problem);
        const auto a = op.as_array();
        const auto b = proposal.as_array();
        std::array<double, 6> mixed{};
        for (std::size_t k = 0; k < 6; ++k) mixed[k] = (1.0 - opt.damping) * a[k] + opt.damping * b[k];
        sol.final_change = op.max_abs_diff(proposal);
        sol.iterations = it;
        if (!std::isfinite(sol.final_change)) throw NumericalError("solve_rs: non-finite order parameters");
        if (sol.final_change <= opt.tol) {
            sol.op = op;
            sol.converged = true;
            return sol;
        }
        op = OrderParameters::from_array(mixed);
    }
    sol.op = op;
    sol.lambda = solve_lambda(pop, op.w, op.v, op.tau, opt.lambda, &lam_warm);
    return sol;
}

inline RsSolution solve_rs(const RsProblem& problem, Eigen::Index pop_size, std::uint64_t seed,
                           const RsOptions& opt = {}) {
    return solve_rs(problem, sample_population(problem.gen, problem.theta0, pop_size, seed), opt);
}

/// i.i.d. draws (beta0, Z) from the Gauss-Bernoulli signal law times N(0, 1).
struct PriorSamples {
    Vector beta0;
    Vector z;
};

inline PriorSamples sample_prior(double nu, double theta0, Eigen::Index size, std::uint64_t seed) {
    if (!(nu > 0.0 && nu <= 1.0)) throw DomainError("sample_prior: nu must lie in (0, 1]");
    auto eng = rng::make_engine(seed, rng::Stream::prior);
    PriorSamples s{Vector(size), Vector(size)};
    const double sigma = theta0 / std::sqrt(nu);
    for (Eigen::Index k = 0; k < size; ++k) {
        const bool active = rng::uniform_open(eng) < nu;
        const double g = rng::standard_normal(eng);
        s.beta0[k] = active ? sigma * g : 0.0;
        s.z[k] = rng::standard_normal(eng);
    }
    return s;
}

/// Monte Carlo residuals (lhs - rhs) of the six general RS equations with their standard errors.
struct RsResiduals {
    std::array<double, 6> value{};
    std::array<double, 6> stderr_{};
};

/**
 * Residuals of the general-prior RS equations
 *   w = E[beta0 phi] / theta0,           v_hat tau / tau_hat = E[Z phi],
 *   w^2 + v^2 = E[phi^2],                 w_hat = w - tau_hat / (zeta tau) (w - E[Z0 xi]),
 *   v (1 - zeta tau / tau_hat) = E[Q xi], zeta v_hat^2 = tau_hat^2 / tau^2 E[(xi - w Z0 - v Q)^2],
 * with every expectation a plain sample mean over the population and the
 * prior samples. Verification only.
 */
inline RsResiduals rs_residuals_general(const OrderParameters& op, const RsPopulation& pop,
                                        const PriorSamples& prior, const RsProblem& problem,
                                        const LambdaOptions& lopt = {}) {
    const RsLambda lambda = solve_lambda(pop, op.w, op.v, op.tau, lopt);
    const Vector xi = detail::population_xi(pop, lambda.at_population, op.w, op.v, op.tau);

    const auto mean_and_se = [](const std::vector<double>& terms) {
        const double n = static_cast<double>(terms.size());
        double mean = 0.0;
        for (double t : terms) mean += t;
        mean /= n;
        double var = 0.0;
        for (double t : terms) var += (t - mean) * (t - mean);
        var /= (n - 1.0);
        return std::pair{mean, std::sqrt(var / n)};
    };

    const auto m = static_cast<std::size_t>(prior.beta0.size());
    std::vector<double> t1(m), t2(m), t3(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double phi =
            prox_enet(op.w_hat * prior.beta0[kk] / problem.theta0 + op.v_hat * prior.z[kk], op.tau_hat, problem.pen);
        t1[k] = op.w - prior.beta0[kk] * phi / problem.theta0;
        t2[k] = op.v_hat * op.tau / op.tau_hat - prior.z[kk] * phi;
        t3[k] = op.w * op.w + op.v * op.v - phi * phi;
    }
    const auto n = detail::usize(pop);
    std::vector<double> t4(n), t5(n), t6(n);
    const double ratio = problem.zeta * op.tau / op.tau_hat;
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double resid = xi[ii] - op.w * pop.z0[ii] - op.v * pop.q[ii];
        t4[i] = op.w_hat - (op.w - op.tau_hat / (problem.zeta * op.tau) * (op.w - pop.z0[ii] * xi[ii]));
        t5[i] = op.v * (1.0 - ratio) - pop.q[ii] * xi[ii];
        t6[i] = problem.zeta * op.v_hat * op.v_hat - op.tau_hat * op.tau_hat / (op.tau * op.tau) * resid * resid;
    }
    RsResiduals out;
    const std::array<const std::vector<double>*, 6> all{&t1, &t2, &t3, &t4, &t5, &t6};
    for (std::size_t k = 0; k < 6; ++k) {
        const auto [mean, se] = mean_and_se(*all[k]);
        out.value[k] = mean;
        out.stderr_[k] = se;
    }
    return out;
}

}  // namespace coxfield
