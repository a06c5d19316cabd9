#pragma once
// Independent reference computations used by the tests. Nothing here calls
// into the library code it is meant to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Core>

namespace oracle {

/// W0(x) by bisection on w exp(w) = x.
inline double lambert_bisection(double x) {
    double lo = -1.0;
    double hi = std::max(1.0, std::log1p(std::max(0.0, x)) + 1.0);
    while (hi * std::exp(hi) < x) hi *= 2.0;
    for (int k = 0; k < 400; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (mid * std::exp(mid) < x ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Adaptive Gauss-Kronrod on [a, b] (infinite limits allowed).
inline double integrate(const std::function<double(double)>& f, double a, double b) {
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14, &err);
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

/// P[Z > x] by quadrature of the density.
inline double normal_tail(double x) {
    return integrate(normal_pdf, x, std::numeric_limits<double>::infinity());
}

/// Golden-section minimizer of a unimodal function on [a, b].
inline double golden_min(const std::function<double(double)>& f, double a, double b, int iters = 400) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int k = 0; k < iters && b - a > 1e-15 * (1.0 + std::abs(a)); ++k) {
        if (fc < fd) {
            b = d; d = c; fd = fc; c = b - r * (b - a); fc = f(c);
        } else {
            a = c; c = d; fc = fd; d = a + r * (b - a); fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// argmin_z (z - u)^2 / (2 tau) + lam exp(z) - delta z by golden section, bracketed around u.
inline double prox_cox(double u, double lam, int delta, double tau) {
    const auto f = [&](double z) { return (z - u) * (z - u) / (2.0 * tau) + lam * std::exp(z) - delta * z; };
    // the derivative is positive at u + tau delta; step left until it turns negative
    const double hi = u + tau * delta + 1e-9;
    double lo = hi - 1.0;
    while (lam * std::exp(lo) + (lo - u) / tau - delta > 0.0) lo = hi - 2.0 * (hi - lo);
    return golden_min(f, lo, hi);
}

/**
 * Penalized negative log partial likelihood, written directly from its
 * definition with O(n^2) risk-set loops:
 *   sum_i Delta_i [ log((1/n) sum_{j: T_j >= T_i} exp(eta_j)) - eta_i ] + alpha |b|_1 + eta/2 |b|^2
 */
struct TinyCox {
    Eigen::MatrixXd x;
    Eigen::VectorXd t;
    Eigen::VectorXi d;
    double alpha = 0.0;
    double eta = 0.0;

    double smooth(const Eigen::VectorXd& b) const {
        const Eigen::VectorXd lp = x * b;
        const auto n = t.size();
        double v = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!d[i]) continue;
            double s = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) if (t[j] >= t[i]) s += std::exp(lp[j]);
            v += std::log(s / n) - lp[i];
        }
        return v + 0.5 * eta * b.squaredNorm();
    }

    Eigen::VectorXd grad(const Eigen::VectorXd& b) const {
        const Eigen::VectorXd lp = x * b;
        const auto n = t.size();
        Eigen::VectorXd g = eta * b;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!d[i]) continue;
            double s = 0.0;
            Eigen::VectorXd sx = Eigen::VectorXd::Zero(b.size());
            for (Eigen::Index j = 0; j < n; ++j) {
                if (t[j] >= t[i]) {
                    const double e = std::exp(lp[j]);
                    s += e;
                    sx += e * x.row(j).transpose();
                }
            }
            g += sx / s - x.row(i).transpose();
        }
        return g;
    }

    double objective(const Eigen::VectorXd& b) const { return smooth(b) + alpha * b.lpNorm<1>(); }

    /// Proximal gradient with backtracking, run until the iterate stops moving.
    Eigen::VectorXd minimize() const {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
        double step = 1.0;
        for (int it = 0; it < 200000; ++it) {
            const Eigen::VectorXd g = grad(b);
            const double f0 = smooth(b);
            Eigen::VectorXd next;
            while (true) {
                next = b - step * g;
                for (Eigen::Index k = 0; k < next.size(); ++k) {
                    const double a = step * alpha;
                    next[k] = next[k] > a ? next[k] - a : (next[k] < -a ? next[k] + a : 0.0);
                }
                const Eigen::VectorXd diff = next - b;
                if (smooth(next) <= f0 + g.dot(diff) + diff.squaredNorm() / (2.0 * step) + 1e-15) break;
                step *= 0.5;
            }
            const double move = (next - b).lpNorm<Eigen::Infinity>();
            b = next;
            step *= 1.5;
            if (move < 1e-14) break;
        }
        return b;
    }
};

struct QuadMoments {
    double beta0_phi, z_phi, phi2, prox_dot;
};

/**
 * Elastic-net prior-side expectations by 1-D quadrature. Conditioning on
 * x = w_hat b + v_hat Z (b = beta0 / theta0, b ~ N(0, 1/nu) on the active
 * part) turns each expectation into an integral over x ~ N(0, s^2), since
 * E[b | x] and E[Z | x] are linear in x.
 */
inline QuadMoments quadrature_moments(double w_hat, double v_hat, double tau_hat, double alpha, double eta,
                                      double nu) {
    const double a = alpha * tau_hat;
    const double c = 1.0 / (1.0 + eta * tau_hat);
    const double inf = std::numeric_limits<double>::infinity();
    const auto phi = [&](double x) { return c * (x > a ? x - a : (x < -a ? x + a : 0.0)); };
    const auto expect = [&](double s, const std::function<double(double)>& f) {
        const auto dens = [&](double x) { return f(x) * normal_pdf(x / s) / s; };
        return integrate(dens, -inf, -a) + integrate(dens, -a, a) + integrate(dens, a, inf);
    };
    const double s1 = std::sqrt(v_hat * v_hat + w_hat * w_hat / nu);
    const double s0 = v_hat;
    QuadMoments m{};
    m.beta0_phi = nu * expect(s1, [&](double x) { return (w_hat / nu) * x / (s1 * s1) * phi(x); });
    m.z_phi = nu * expect(s1, [&](double x) { return v_hat * x / (s1 * s1) * phi(x); }) +
              (1 - nu) * expect(s0, [&](double x) { return x / v_hat * phi(x); });
    m.phi2 = nu * expect(s1, [&](double x) { return phi(x) * phi(x); }) +
             (1 - nu) * expect(s0, [&](double x) { return phi(x) * phi(x); });
    m.prox_dot = nu * expect(s1, [&](double x) { return std::abs(x) > a ? c : 0.0; }) +
                 (1 - nu) * expect(s0, [&](double x) { return std::abs(x) > a ? c : 0.0; });
    return m;
}

/// Sample skewness and excess kurtosis.
inline std::pair<double, double> skew_kurt(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n; m3 /= n; m4 /= n;
    return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

}  // namespace oracle
