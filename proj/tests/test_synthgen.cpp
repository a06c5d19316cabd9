#include <cmath>

#include <gtest/gtest.h>

#include <coxfield/synthgen.hpp>

#include "oracles.hpp"

using namespace coxfield;

TEST(Signal, NormAndSparsity) {
    for (auto [p, nu] : {std::pair{2000L, 0.005}, {500L, 0.005}, {100L, 1.0}, {37L, 0.2}}) {
        SignalSpec s;
        s.p = p;
        s.nu = nu;
        s.theta0 = 1.3;
        s.seed = 4;
        const Vector b = sample_signal(s);
        EXPECT_NEAR(b.squaredNorm() / static_cast<double>(p), 1.3 * 1.3, 1e-12);
        EXPECT_EQ((b.array() != 0.0).count(), s.active());
    }
    SignalSpec large;
    large.p = 2000;
    EXPECT_EQ(large.active(), 10);
}

TEST(Signal, Deterministic) {
    SignalSpec s;
    s.seed = 99;
    EXPECT_EQ(sample_signal(s), sample_signal(s));
    SignalSpec t = s;
    t.seed = 100;
    EXPECT_NE(sample_signal(s), sample_signal(t));
}

TEST(Design, MomentsAndDeterminism) {
    const Matrix x = sample_design(400, 250, 3);
    EXPECT_NEAR(x.mean(), 0.0, 4.0 / std::sqrt(400.0 * 250.0) / std::sqrt(250.0));
    EXPECT_NEAR(x.array().square().mean() * 250.0, 1.0, 0.01);
    EXPECT_EQ(x, sample_design(400, 250, 3));
}

TEST(Rng, UniformAndNormalKs) {
    auto eng = rng::make_engine(1, rng::Stream::prior);
    std::vector<double> u(100000), z(100000);
    for (auto& v : u) v = rng::uniform_open(eng);
    for (auto& v : z) v = rng::standard_normal(eng);
    // 1% critical value of the KS statistic is about 1.63 / sqrt(N)
    const double crit = 1.63 / std::sqrt(100000.0);
    EXPECT_LT(oracle::ks_statistic(u, [](double x) { return x; }), crit);
    EXPECT_LT(oracle::ks_statistic(z, [](double x) { return 1.0 - oracle::normal_tail(x); }), crit);
}

TEST(Generator, LatentTimeKs) {
    // At eta = 0 without censoring pressure, the latent time has S(t) = 1 / (1 + exp(phi0) t^rho0).
    const GeneratorSpec gen;
    auto eng = rng::make_engine(7, rng::Stream::observations);
    std::vector<double> times(100000);
    for (auto& t : times) t = gen.latent_time(-std::log(rng::uniform_open(eng)), 0.0);
    const auto cdf = [&](double t) { return 1.0 - std::exp(-gen.baseline_hazard(t)); };
    EXPECT_LT(oracle::ks_statistic(times, cdf), 1.63 / std::sqrt(100000.0));
    // with a linear predictor the survival is exp(-Lambda0(t) e^eta)
    const double eta = 0.8;
    for (auto& t : times) t = gen.latent_time(-std::log(rng::uniform_open(eng)), eta);
    const auto cdf_eta = [&](double t) { return 1.0 - std::exp(-gen.baseline_hazard(t) * std::exp(eta)); };
    EXPECT_LT(oracle::ks_statistic(times, cdf_eta), 1.63 / std::sqrt(100000.0));
}

TEST(Generator, ObservedOutcomesKs) {
    // T = min(latent, C), C ~ U[1, 2]: P[T > t] = S(t) P[C > t]
    const GeneratorSpec gen;
    std::vector<double> obs;
    int events = 0;
    for (int i = 0; i < 100000; ++i) {
        auto eng = rng::make_engine(5, rng::Stream::observations, static_cast<std::uint64_t>(i));
        const auto draw = sample_event(0.0, gen, eng);
        obs.push_back(draw.time);
        events += draw.event;
    }
    const auto cdf = [&](double t) {
        const double s = std::exp(-gen.baseline_hazard(t));
        const double c = t < gen.tau1 ? 1.0 : (t > gen.tau2 ? 0.0 : (gen.tau2 - t) / (gen.tau2 - gen.tau1));
        return 1.0 - s * c;
    };
    EXPECT_LT(oracle::ks_statistic(obs, cdf), 1.63 / std::sqrt(100000.0));
    EXPECT_GT(events, 0);
    EXPECT_LT(events, 100000);
}

TEST(Generator, BaselineHazard) {
    const GeneratorSpec gen;
    EXPECT_NEAR(gen.baseline_hazard(1.5), std::log(1.0 + 1.5 * 1.5 / 2.0), 1e-15);
    GeneratorSpec bad;
    bad.tau2 = 0.5;
    EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Generator, DatasetShapeAndDeterminism) {
    SignalSpec sig;
    sig.p = 200;
    sig.nu = 0.05;
    const GeneratorSpec gen;
    const auto a = generate_dataset(sig, gen, 7);
    const auto b = generate_dataset(sig, gen, 7);
    EXPECT_EQ(a.data.n(), 100);
    EXPECT_EQ(a.data.p(), 200);
    EXPECT_EQ(a.data.times(), b.data.times());
    EXPECT_EQ(a.data.events(), b.data.events());
    EXPECT_EQ(a.beta0, b.beta0);
    EXPECT_GT(a.data.event_count(), 0);
    EXPECT_LT(a.data.event_count(), a.data.n());
    const auto test = generate_test_set(a.beta0, 100, gen, 8);
    EXPECT_EQ(test.n(), 100);
    EXPECT_NE(test.times(), a.data.times());
}
