#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <coxfield/survival.hpp>

#include "oracles.hpp"

using namespace coxfield;

namespace {

SurvivalDataset make_random_data(int n, int p, unsigned seed, double event_rate = 0.7, bool ties = false) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.1, 3.0);
    std::bernoulli_distribution bd(event_rate);
    Vector t(n);
    IntVector d(n);
    Matrix x(n, p);
    for (int i = 0; i < n; ++i) {
        t[i] = ties ? std::round(ud(eng) * 2.0) / 2.0 + 0.5 : ud(eng);
        d[i] = bd(eng);
        for (int j = 0; j < p; ++j) x(i, j) = nd(eng);
    }
    return SurvivalDataset(t, d, x);
}

// Nelson-Aalen straight from the definition
double na_reference(const SurvivalDataset& data, const Vector& lp, double t) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (!data.events()[i] || data.times()[i] > t) continue;
        double risk = 0.0;
        for (Eigen::Index j = 0; j < data.n(); ++j) {
            if (data.times()[j] >= data.times()[i]) risk += std::exp(lp[j]);
        }
        acc += 1.0 / risk;
    }
    return acc;
}

}  // namespace

TEST(Dataset, Validation) {
    Matrix x = Matrix::Ones(3, 2);
    EXPECT_THROW(SurvivalDataset(Vector::Ones(2), IntVector::Ones(3), x), DomainError);
    EXPECT_THROW(SurvivalDataset((Vector(3) << 1, -1, 2).finished(), IntVector::Ones(3), x), DomainError);
    EXPECT_THROW(SurvivalDataset(Vector::Ones(3), (IntVector(3) << 1, 2, 0).finished(), x), DomainError);
    const SurvivalDataset ok((Vector(3) << 3, 1, 2).finished(), (IntVector(3) << 1, 0, 1).finished(), x);
    EXPECT_EQ(ok.order(), (std::vector<Eigen::Index>{1, 2, 0}));
    EXPECT_EQ(ok.event_count(), 2);
    EXPECT_DOUBLE_EQ(ok.zeta(), 2.0 / 3.0);
}

TEST(NelsonAalen, MatchesDefinitionWithTies) {
    for (bool ties : {false, true}) {
        const auto data = make_random_data(40, 2, 17, 0.6, ties);
        const Vector lp = data.design().col(0) * 0.3;
        const StepHazard h = nelson_aalen(data, lp);
        const Vector at = nelson_aalen_at_times(data, lp);
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            EXPECT_NEAR(at[i], na_reference(data, lp, data.times()[i]), 1e-12);
            EXPECT_NEAR(h(data.times()[i]), at[i], 1e-15);
        }
        EXPECT_EQ(h(0.0), 0.0);
    }
}

TEST(NelsonAalen, HandComputed) {
    // times 1, 2, 3 all events, unit weights: 1/3, 1/3 + 1/2, 1/3 + 1/2 + 1
    const SurvivalDataset data((Vector(3) << 2, 1, 3).finished(), IntVector::Ones(3), Matrix::Zero(3, 1));
    const StepHazard h = nelson_aalen(data, Vector::Zero(3));
    EXPECT_NEAR(h(1.0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(h(2.5), 1.0 / 3.0 + 0.5, 1e-15);
    EXPECT_NEAR(h(10.0), 1.0 / 3.0 + 0.5 + 1.0, 1e-15);
}

TEST(NelsonAalen, MonotoneAndShiftCovariant) {
    const auto data = make_random_data(200, 3, 4);
    const Vector lp = data.design() * Vector::LinSpaced(3, -0.5, 0.5);
    const StepHazard h = nelson_aalen(data, lp);
    double prev = 0.0;
    for (double t = 0.0; t < 3.5; t += 0.01) {
        EXPECT_GE(h(t), prev);
        prev = h(t);
    }
    for (double c : {-3.0, 0.7, 25.0}) {
        const StepHazard hc = nelson_aalen(data, (lp.array() + c).matrix());
        for (double t : {0.5, 1.5, 2.9}) EXPECT_NEAR(hc(t), std::exp(-c) * h(t), 1e-12 * h(t));
    }
}

TEST(NelsonAalen, NoEventsGivesZero) {
    auto data = make_random_data(20, 1, 8, 0.0);
    const StepHazard h = nelson_aalen(data, Vector::Zero(20));
    EXPECT_TRUE(h.empty());
    EXPECT_EQ(h(100.0), 0.0);
}

TEST(StepHazard, Validation) {
    EXPECT_THROW(StepHazard({1.0, 1.0}, {0.1, 0.1}), DomainError);
    EXPECT_THROW(StepHazard({1.0, 2.0}, {0.1, -0.1}), DomainError);
    const StepHazard h({1.0, 2.0}, {0.5, 0.25});
    EXPECT_EQ(h(0.999), 0.0);
    EXPECT_EQ(h(1.0), 0.5);
    EXPECT_EQ(h(5.0), 0.75);
}

TEST(PartialLikelihood, MatchesDirectDefinition) {
    const auto data = make_random_data(25, 3, 21, 0.7, true);
    oracle::TinyCox ref{data.design(), data.times(), data.events(), 0.4, 0.3};
    const ElasticNetPenalty pen(0.4, 0.3);
    for (int k = 0; k < 5; ++k) {
        const Vector b = Vector::Random(3);
        EXPECT_NEAR(penalized_partial_likelihood(data, b, pen), ref.objective(b), 1e-10);
    }
}

TEST(HarrellC, BruteForceExample) {
    const Vector t = (Vector(4) << 1, 2, 3, 4).finished();
    const IntVector d = (IntVector(4) << 1, 0, 1, 1).finished();
    // comparable: (0,1),(0,2),(0,3),(2,3)
    const Vector s = (Vector(4) << 4, 3, 1, 2).finished();
    EXPECT_DOUBLE_EQ(harrell_c(t, d, s), 3.0 / 4.0);
    const Vector tied = Vector::Constant(4, 1.0);
    EXPECT_DOUBLE_EQ(harrell_c(t, d, tied), 0.5);
    EXPECT_THROW(harrell_c(t, IntVector::Zero(4), s), DomainError);
}

TEST(HarrellC, InvariantUnderMonotoneTransform) {
    const auto data = make_random_data(80, 1, 30);
    const Vector s = data.design().col(0);
    const double c = harrell_c(data.times(), data.events(), s);
    EXPECT_DOUBLE_EQ(harrell_c(data.times(), data.events(), (s.array() * 3.0 + 1.0).matrix()), c);
    EXPECT_DOUBLE_EQ(harrell_c(data.times(), data.events(), s.array().exp().matrix()), c);
    EXPECT_NEAR(harrell_c(data.times(), data.events(), -s), 1.0 - c, 1e-15);
}

TEST(Rscv, ZeroTauIsPlainCIndex) {
    const auto data = make_random_data(60, 2, 12);
    const Vector b = (Vector(2) << 0.5, -0.2).finished();
    const StepHazard h = nelson_aalen(data, data.design() * b);
    EXPECT_DOUBLE_EQ(rscv_c_index(data, b, h, 0.0), harrell_c(data.times(), data.events(), data.design() * b));
    const Vector pred = rscv_predictors(data, b, h, 0.5);
    const Vector eta = data.design() * b;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        EXPECT_NEAR(pred[i], eta[i] + 0.5 * (h(data.times()[i]) * std::exp(eta[i]) - data.events()[i]), 1e-14);
    }
}
