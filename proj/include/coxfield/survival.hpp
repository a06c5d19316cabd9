#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>

#include <coxfield/error.hpp>
#include <coxfield/prox.hpp>

namespace coxfield {

using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using Matrix = Eigen::MatrixXd;

/**
 * Right-censored survival data: observed times T, event indicators Delta and
 * the n x p design X. The ascending time order is computed once on
 * construction and shared by every risk-set computation.
 */
class SurvivalDataset {
public:
    SurvivalDataset() = default;

    SurvivalDataset(Vector times, IntVector events, Matrix design)
        : times_(std::move(times)), events_(std::move(events)), design_(std::move(design)) {
        const auto n = times_.size();
        if (n == 0) throw DomainError("SurvivalDataset: empty dataset");
        if (events_.size() != n || design_.rows() != n) {
            throw DomainError("SurvivalDataset: times, events and design rows must agree");
        }
        if (design_.cols() == 0) throw DomainError("SurvivalDataset: design has no columns");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(times_[i]) || !(times_[i] > 0.0)) {
                throw DomainError("SurvivalDataset: times must be finite and positive");
            }
            if (events_[i] != 0 && events_[i] != 1) {
                throw DomainError("SurvivalDataset: events must be 0 or 1");
            }
        }
        if (!design_.allFinite()) throw DomainError("SurvivalDataset: design has non-finite entries");
        order_.resize(static_cast<std::size_t>(n));
        std::iota(order_.begin(), order_.end(), Eigen::Index{0});
        std::stable_sort(order_.begin(), order_.end(),
                         [this](Eigen::Index a, Eigen::Index b) { return times_[a] < times_[b]; });
    }

    Eigen::Index n() const { return times_.size(); }
    Eigen::Index p() const { return design_.cols(); }
    double zeta() const { return static_cast<double>(p()) / static_cast<double>(n()); }

    const Vector& times() const { return times_; }
    const IntVector& events() const { return events_; }
    const Matrix& design() const { return design_; }
    /// Subject indices sorted by ascending time.
    const std::vector<Eigen::Index>& order() const { return order_; }

    Eigen::Index event_count() const { return events_.sum(); }

private:
    Vector times_;
    IntVector events_;
    Matrix design_;
    std::vector<Eigen::Index> order_;
};

/**
 * Right-continuous nondecreasing step function t -> sum of jumps at knots <= t.
 */
class StepHazard {
public:
    StepHazard() = default;
    StepHazard(std::vector<double> knots, std::vector<double> jumps)
        : knots_(std::move(knots)), jumps_(std::move(jumps)) {
        if (knots_.size() != jumps_.size()) throw DomainError("StepHazard: size mismatch");
        cumulative_.resize(knots_.size());
        double acc = 0.0;
        for (std::size_t k = 0; k < knots_.size(); ++k) {
            if (k > 0 && !(knots_[k] > knots_[k - 1])) {
                throw DomainError("StepHazard: knots must be strictly increasing");
            }
            if (!(jumps_[k] >= 0.0)) throw DomainError("StepHazard: jumps must be nonnegative");
            acc += jumps_[k];
            cumulative_[k] = acc;
        }
    }

    double operator()(double t) const {
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        if (it == knots_.begin()) return 0.0;
        return cumulative_[static_cast<std::size_t>(it - knots_.begin()) - 1];
    }

    Vector at(const Vector& t) const {
        Vector out(t.size());
        for (Eigen::Index i = 0; i < t.size(); ++i) out[i] = (*this)(t[i]);
        return out;
    }

    bool empty() const { return knots_.empty(); }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& jumps() const { return jumps_; }

private:
    std::vector<double> knots_;
    std::vector<double> jumps_;
    std::vector<double> cumulative_;
};

namespace detail {

// Nelson-Aalen with risk weights exp(lin_pred): returns the hazard at every
// subject's own time (in input order) and, optionally, the step function.
// Subjects tied with an event time are in its risk set and see its jump.
inline void nelson_aalen_core(std::span<const double> times, std::span<const int> events,
                              std::span<const Eigen::Index> order, std::span<const double> lin_pred,
                              std::span<double> at_subjects, StepHazard* hazard) {
    const std::size_t n = times.size();
    double shift = -std::numeric_limits<double>::infinity();
    for (double v : lin_pred) shift = std::max(shift, v);
    if (!std::isfinite(shift)) throw NumericalError("nelson_aalen: non-finite linear predictor");

    // risk sums over groups of tied times, scanned from the latest time
    std::vector<std::size_t> group_start;
    for (std::size_t k = 0; k < n; ++k) {
        if (k == 0 || times[order[k]] != times[order[k - 1]]) group_start.push_back(k);
    }
    const std::size_t groups = group_start.size();
    std::vector<double> jump(groups, 0.0);
    double risk = 0.0;
    for (std::size_t gi = groups; gi-- > 0;) {
        const std::size_t end = gi + 1 < groups ? group_start[gi + 1] : n;
        int deaths = 0;
        for (std::size_t k = group_start[gi]; k < end; ++k) {
            const auto i = static_cast<std::size_t>(order[k]);
            risk += std::exp(lin_pred[i] - shift);
            deaths += events[i];
        }
        if (deaths > 0) jump[gi] = deaths / risk * std::exp(-shift);
    }

    std::vector<double> knots, jumps;
    double acc = 0.0;
    for (std::size_t gi = 0; gi < groups; ++gi) {
        const std::size_t end = gi + 1 < groups ? group_start[gi + 1] : n;
        acc += jump[gi];
        for (std::size_t k = group_start[gi]; k < end; ++k) {
            at_subjects[static_cast<std::size_t>(order[k])] = acc;
        }
        if (jump[gi] > 0.0 && hazard != nullptr) {
            knots.push_back(times[order[group_start[gi]]]);
            jumps.push_back(jump[gi]);
        }
    }
    if (hazard != nullptr) *hazard = StepHazard(std::move(knots), std::move(jumps));
}

}  // namespace detail

/// Nelson-Aalen cumulative hazard evaluated at each subject's own time.
inline Vector nelson_aalen_at_times(const SurvivalDataset& data, const Vector& lin_pred) {
    if (lin_pred.size() != data.n()) throw DomainError("nelson_aalen: lin_pred has wrong length");
    Vector out(data.n());
    const auto n = static_cast<std::size_t>(data.n());
    detail::nelson_aalen_core({data.times().data(), n}, {data.events().data(), n}, data.order(),
                              {lin_pred.data(), n}, {out.data(), n}, nullptr);
    return out;
}

/**
 * Nelson-Aalen estimator
 *   Lambda(t) = sum_i Delta_i [T_i <= t] / sum_j [T_j >= T_i] exp(lin_pred_j).
 * With no events the returned hazard is empty (identically zero).
 */
inline StepHazard nelson_aalen(const SurvivalDataset& data, const Vector& lin_pred) {
    if (lin_pred.size() != data.n()) throw DomainError("nelson_aalen: lin_pred has wrong length");
    const auto n = static_cast<std::size_t>(data.n());
    std::vector<double> scratch(n);
    StepHazard hazard;
    detail::nelson_aalen_core({data.times().data(), n}, {data.events().data(), n}, data.order(),
                              {lin_pred.data(), n}, scratch, &hazard);
    return hazard;
}

/**
 * Penalized negative log partial likelihood
 *   sum_i Delta_i [ log((1/n) sum_j [T_j >= T_i] exp(x_j'b)) - x_i'b ] + r(b).
 */
inline double penalized_partial_likelihood(const SurvivalDataset& data, const Vector& beta,
                                           const ElasticNetPenalty& pen) {
    if (beta.size() != data.p()) throw DomainError("penalized_partial_likelihood: beta has wrong length");
    const Vector eta = data.design() * beta;
    const double shift = eta.maxCoeff();
    if (!std::isfinite(shift)) return std::numeric_limits<double>::infinity();
    const auto& order = data.order();
    const auto n = static_cast<std::size_t>(data.n());
    double risk = 0.0;
    double value = 0.0;
    std::size_t k = n;
    while (k > 0) {
        // one group of tied times
        std::size_t start = k - 1;
        const double t = data.times()[order[start]];
        while (start > 0 && data.times()[order[start - 1]] == t) --start;
        for (std::size_t m = start; m < k; ++m) risk += std::exp(eta[order[m]] - shift);
        for (std::size_t m = start; m < k; ++m) {
            const auto i = order[m];
            if (data.events()[i] == 1) {
                value += std::log(risk / static_cast<double>(n)) + shift - eta[i];
            }
        }
        k = start;
    }
    double penalty = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) penalty += pen.value(beta[j]);
    return value + penalty;
}

/**
 * Harrell's concordance index. A pair (i, j) is comparable when subject i
 * had an event and T_j > T_i; it is concordant when score_i > score_j.
 * Score ties count one half.
 */
inline double harrell_c(const Vector& times, const IntVector& events, const Vector& scores) {
    const auto n = times.size();
    if (events.size() != n || scores.size() != n) throw DomainError("harrell_c: length mismatch");
    double concordant = 0.0;
    double comparable = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (events[i] != 1) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!(times[j] > times[i])) continue;
            comparable += 1.0;
            if (scores[i] > scores[j]) {
                concordant += 1.0;
            } else if (scores[i] == scores[j]) {
                concordant += 0.5;
            }
        }
    }
    if (comparable == 0.0) throw DomainError("harrell_c: no comparable pairs");
    return concordant / comparable;
}

/// Corrected linear predictors x_i'b + tau * g_dot(x_i'b, Lambda(T_i), Delta_i).
inline Vector rscv_predictors(const SurvivalDataset& data, const Vector& beta_hat,
                              const StepHazard& hazard, double tau_star) {
    if (!(tau_star >= 0.0)) throw DomainError("rscv_predictors: tau_star must be nonnegative");
    const Vector eta = data.design() * beta_hat;
    Vector out(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out[i] = eta[i] + tau_star * g_dot(eta[i], hazard(data.times()[i]), data.events()[i]);
    }
    return out;
}

inline double rscv_c_index(const SurvivalDataset& data, const Vector& beta_hat, const StepHazard& hazard,
                           double tau_star) {
    return harrell_c(data.times(), data.events(), rscv_predictors(data, beta_hat, hazard, tau_star));
}

}  // namespace coxfield
