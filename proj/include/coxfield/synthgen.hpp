#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include <coxfield/error.hpp>
#include <coxfield/survival.hpp>

namespace coxfield {

/**
 * Random streams. Every consumer derives its own std::mt19937_64 from a base
 * seed, a stream tag and (for per-subject draws) the subject index, mixed
 * through splitmix64. Draws for subject i therefore do not depend on n or on
 * the order in which subjects are generated.
 */
namespace rng {

using Engine = std::mt19937_64;

enum class Stream : std::uint64_t { signal = 1, design = 2, observations = 3, population = 4, prior = 5 };

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    std::uint64_t s = splitmix64(seed);
    s = splitmix64(s ^ static_cast<std::uint64_t>(stream));
    s = splitmix64(s ^ index);
    return Engine(s);
}

/// Uniform draw on the open interval (0, 1).
inline double uniform_open(Engine& eng) {
    return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_normal(Engine& eng) {
    // Box-Muller keeps the stream layout independent of the standard library
    const double u1 = uniform_open(eng);
    const double u2 = uniform_open(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace rng

struct SignalSpec {
    Eigen::Index p = 500;
    double nu = 0.005;
    double theta0 = 1.0;
    std::uint64_t seed = 0;

    Eigen::Index active() const {
        const auto s = static_cast<Eigen::Index>(std::llround(nu * static_cast<double>(p)));
        return std::max<Eigen::Index>(s, 1);
    }
};

/// Log-logistic baseline Lambda0(t) = log(1 + exp(phi0) t^rho0), censoring C ~ U[tau1, tau2].
struct GeneratorSpec {
    double phi0 = -std::log(2.0);
    double rho0 = 2.0;
    double tau1 = 1.0;
    double tau2 = 2.0;
    double zeta = 2.0;

    void validate() const {
        if (!(rho0 > 0.0)) throw DomainError("GeneratorSpec: rho0 must be positive");
        if (!(tau1 > 0.0 && tau1 < tau2)) throw DomainError("GeneratorSpec: need 0 < tau1 < tau2");
        if (!(zeta > 0.0)) throw DomainError("GeneratorSpec: zeta must be positive");
    }

    double baseline_hazard(double t) const { return std::log1p(std::exp(phi0) * std::pow(t, rho0)); }

    /// Latent time with S(t) = exp(-Lambda0(t) e^eta) given an Exp(1) draw e = -log U.
    double latent_time(double exp1, double eta) const {
        const double target = exp1 * std::exp(-eta);
        return std::pow(std::exp(-phi0) * std::expm1(target), 1.0 / rho0);
    }
};

/// beta0 = (theta0 sqrt(p) U_s, 0_{p-s}) with U_s uniform on the unit sphere.
inline Vector sample_signal(const SignalSpec& spec) {
    if (spec.p < 1) throw DomainError("sample_signal: p must be positive");
    if (!(spec.nu > 0.0 && spec.nu <= 1.0)) throw DomainError("sample_signal: nu must lie in (0, 1]");
    if (!(spec.theta0 > 0.0)) throw DomainError("sample_signal: theta0 must be positive");
    const Eigen::Index s = std::min(spec.active(), spec.p);
    auto eng = rng::make_engine(spec.seed, rng::Stream::signal);
    Vector beta = Vector::Zero(spec.p);
    double norm2 = 0.0;
    while (norm2 == 0.0) {
        for (Eigen::Index k = 0; k < s; ++k) beta[k] = rng::standard_normal(eng);
        norm2 = beta.head(s).squaredNorm();
    }
    beta.head(s) *= spec.theta0 * std::sqrt(static_cast<double>(spec.p)) / std::sqrt(norm2);
    return beta;
}

/// n x p design with i.i.d. N(0, 1/p) entries.
inline Matrix sample_design(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    if (n < 1 || p < 1) throw DomainError("sample_design: n and p must be positive");
    auto eng = rng::make_engine(seed, rng::Stream::design);
    const double scale = 1.0 / std::sqrt(static_cast<double>(p));
    Matrix x(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = scale * rng::standard_normal(eng);
    }
    return x;
}

struct EventDraw {
    double time;
    int event;
};

/// One (T, Delta) draw given the linear predictor; consumes two uniforms.
inline EventDraw sample_event(double eta, const GeneratorSpec& gen, rng::Engine& eng) {
    const double exp1 = -std::log(rng::uniform_open(eng));
    const double latent = gen.latent_time(exp1, eta);
    const double censor = gen.tau1 + (gen.tau2 - gen.tau1) * rng::uniform_open(eng);
    if (latent < censor) return {latent, 1};
    return {censor, 0};
}

/// Observed (times, events) for every row of the design; subject i uses its own stream.
inline std::pair<Vector, IntVector> sample_observations(const Matrix& design, const Vector& beta0,
                                                        const GeneratorSpec& gen, std::uint64_t seed) {
    gen.validate();
    if (beta0.size() != design.cols()) throw DomainError("sample_observations: beta0 has wrong length");
    const Vector eta = design * beta0;
    Vector times(design.rows());
    IntVector events(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        auto eng = rng::make_engine(seed, rng::Stream::observations, static_cast<std::uint64_t>(i));
        const auto draw = sample_event(eta[i], gen, eng);
        times[i] = draw.time;
        events[i] = draw.event;
    }
    return {std::move(times), std::move(events)};
}

/// A synthetic dataset together with the signal that generated it.
struct SyntheticSample {
    SurvivalDataset data;
    Vector beta0;
};

/// n = round(p / zeta) subjects; signal, design and outcomes from streams of one seed.
inline SyntheticSample generate_dataset(const SignalSpec& signal, const GeneratorSpec& gen, std::uint64_t seed) {
    gen.validate();
    const auto n = static_cast<Eigen::Index>(std::llround(static_cast<double>(signal.p) / gen.zeta));
    if (n < 1) throw DomainError("generate_dataset: zeta too large for p");
    SignalSpec sig = signal;
    sig.seed = seed;
    Vector beta0 = sample_signal(sig);
    Matrix x = sample_design(n, signal.p, seed);
    auto [times, events] = sample_observations(x, beta0, gen, seed);
    return {SurvivalDataset(std::move(times), std::move(events), std::move(x)), std::move(beta0)};
}

/// Fresh subjects from the same model and the given signal (held-out evaluation).
inline SurvivalDataset generate_test_set(const Vector& beta0, Eigen::Index n, const GeneratorSpec& gen,
                                         std::uint64_t seed) {
    Matrix x = sample_design(n, beta0.size(), seed);
    auto [times, events] = sample_observations(x, beta0, gen, seed);
    return SurvivalDataset(std::move(times), std::move(events), std::move(x));
}

}  // namespace coxfield
