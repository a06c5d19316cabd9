#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include <coxfield/error.hpp>
#include <coxfield/observables.hpp>
#include <coxfield/rs_theory.hpp>
#include <coxfield/solvers.hpp>
#include <coxfield/survival.hpp>
#include <coxfield/synthgen.hpp>

namespace coxfield::io {

using json = nlohmann::ordered_json;

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_double(std::string_view s, std::size_t line) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double value = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw DomainError("csv line " + std::to_string(line) + ": cannot parse number '" + std::string(s) + "'");
    }
    return value;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

/// Dataset CSV: header `time,event,x1,...,xp`, one subject per row.
inline void write_dataset_csv(std::ostream& os, const SurvivalDataset& data) {
    os << "time,event";
    for (Eigen::Index j = 1; j <= data.p(); ++j) os << ",x" << j;
    os << '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        os << format_double(data.times()[i]) << ',' << data.events()[i];
        for (Eigen::Index j = 0; j < data.p(); ++j) os << ',' << format_double(data.design()(i, j));
        os << '\n';
    }
}

inline SurvivalDataset read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw DomainError("csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_commas(line);
    if (header.size() < 3 || header[0] != "time" || header[1] != "event") {
        throw DomainError("csv: header must start with time,event followed by x1..xp");
    }
    const std::size_t p = header.size() - 2;
    for (std::size_t j = 0; j < p; ++j) {
        if (header[j + 2] != "x" + std::to_string(j + 1)) {
            throw DomainError("csv: expected column x" + std::to_string(j + 1));
        }
    }
    std::vector<double> times;
    std::vector<int> events;
    std::vector<double> cells;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() != p + 2) {
            throw DomainError("csv line " + std::to_string(lineno) + ": expected " + std::to_string(p + 2) +
                              " fields, found " + std::to_string(fields.size()));
        }
        times.push_back(parse_double(fields[0], lineno));
        const double ev = parse_double(fields[1], lineno);
        if (ev != 0.0 && ev != 1.0) throw DomainError("csv line " + std::to_string(lineno) + ": event must be 0 or 1");
        events.push_back(static_cast<int>(ev));
        for (std::size_t j = 0; j < p; ++j) cells.push_back(parse_double(fields[j + 2], lineno));
    }
    const auto n = static_cast<Eigen::Index>(times.size());
    if (n == 0) throw DomainError("csv: no data rows");
    Matrix x(n, static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
            x(i, j) = cells[static_cast<std::size_t>(i) * p + static_cast<std::size_t>(j)];
        }
    }
    return SurvivalDataset(Eigen::Map<Vector>(times.data(), n), Eigen::Map<IntVector>(events.data(), n),
                           std::move(x));
}

inline SurvivalDataset read_dataset_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DomainError("cannot open " + path);
    return read_dataset_csv(is);
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DomainError("cannot write " + path);
    os << text;
}

inline json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector vector_from_json(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline json to_json(const SignalSpec& s) {
    return {{"p", s.p}, {"nu", s.nu}, {"theta0", s.theta0}, {"seed", s.seed}};
}

inline json to_json(const GeneratorSpec& g) {
    return {{"phi0", g.phi0}, {"rho0", g.rho0}, {"tau1", g.tau1}, {"tau2", g.tau2}, {"zeta", g.zeta}};
}

inline GeneratorSpec generator_from_json(const json& j) {
    GeneratorSpec g;
    g.phi0 = j.value("phi0", g.phi0);
    g.rho0 = j.value("rho0", g.rho0);
    g.tau1 = j.value("tau1", g.tau1);
    g.tau2 = j.value("tau2", g.tau2);
    g.zeta = j.value("zeta", g.zeta);
    g.validate();
    return g;
}

/// Sidecar written next to a generated dataset: the specs and the true signal.
inline json sidecar_json(const SignalSpec& signal, const GeneratorSpec& gen, std::uint64_t seed, Eigen::Index n,
                         const Vector& beta0) {
    return {{"signal", to_json(signal)}, {"generator", to_json(gen)}, {"seed", seed}, {"n", n},
            {"beta0", vector_json(beta0)}};
}

inline json to_json(const StepHazard& h) { return {{"knots", h.knots()}, {"jumps", h.jumps()}}; }

inline json to_json(const FitResult& fit, const ElasticNetPenalty& pen) {
    return {{"solver", to_string(fit.solver)},
            {"alpha", pen.alpha},
            {"eta", pen.eta},
            {"converged", fit.converged},
            {"epochs", fit.epochs},
            {"final_err", fit.final_err},
            {"no_events", fit.no_events},
            {"skipped_coordinates", fit.skipped_coordinates},
            {"diagnostic", fit.diagnostic},
            {"tau", fit.tau},
            {"tau_hat", fit.tau_hat},
            {"nonzeros", (fit.beta_hat.array() != 0.0).count()},
            {"beta_hat", vector_json(fit.beta_hat)},
            {"xi", vector_json(fit.xi)},
            {"hazard", to_json(fit.hazard)}};
}

struct StoredFit {
    FitResult fit;
    ElasticNetPenalty pen;
};

inline StoredFit fit_from_json(const json& j) {
    StoredFit out;
    out.pen = ElasticNetPenalty(j.at("alpha").get<double>(), j.at("eta").get<double>());
    FitResult& f = out.fit;
    f.solver = solver_from_string(j.at("solver").get<std::string>());
    f.converged = j.at("converged").get<bool>();
    f.epochs = j.value("epochs", 0);
    // non-finite values are serialized as null
    f.final_err = j.contains("final_err") && j.at("final_err").is_number() ? j.at("final_err").get<double>()
                                                                           : std::numeric_limits<double>::infinity();
    f.no_events = j.value("no_events", false);
    f.skipped_coordinates = j.value("skipped_coordinates", 0);
    f.diagnostic = j.value("diagnostic", std::string{});
    f.tau = j.at("tau").get<double>();
    f.tau_hat = j.at("tau_hat").get<double>();
    f.beta_hat = vector_from_json(j.at("beta_hat"));
    if (j.contains("xi")) f.xi = vector_from_json(j.at("xi"));
    f.hazard = StepHazard(j.at("hazard").at("knots").get<std::vector<double>>(),
                          j.at("hazard").at("jumps").get<std::vector<double>>());
    return out;
}

inline json to_json(const OrderParameterEstimate& e) {
    return {{"source", to_string(e.source)},
            {"w", e.w},
            {"v", e.v},
            {"tau", e.tau},
            {"w_hat", e.w_hat},
            {"v_hat", e.v_hat},
            {"tau_hat", e.tau_hat},
            {"v_hat_curvature", e.v_hat_curvature},
            {"a_norm", e.a_norm},
            {"v_sq_raw", e.v_sq_raw},
            {"w_valid", e.w_valid},
            {"v_valid", e.v_valid},
            {"w_hat_valid", e.w_hat_valid}};
}

inline json to_json(const OrderParameters& op) {
    return {{"w", op.w}, {"v", op.v}, {"tau", op.tau}, {"w_hat", op.w_hat}, {"v_hat", op.v_hat}, {"tau_hat", op.tau_hat}};
}

}  // namespace coxfield::io
