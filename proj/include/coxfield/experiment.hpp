#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <coxfield/io.hpp>
#include <coxfield/observables.hpp>
#include <coxfield/rs_theory.hpp>
#include <coxfield/solvers.hpp>
#include <coxfield/survival.hpp>
#include <coxfield/synthgen.hpp>

namespace coxfield {

/// One regularization setting: L1 weight alpha and l1 ratio lambda (eta = alpha (1 - lambda) / lambda).
struct GridPoint {
    double alpha = 0.0;
    double l1_ratio = 0.75;

    ElasticNetPenalty penalty() const {
        if (!(alpha > 0.0) || !(l1_ratio > 0.0 && l1_ratio <= 1.0)) {
            throw DomainError("grid point: need alpha > 0 and l1_ratio in (0, 1]");
        }
        return ElasticNetPenalty::from_strength(alpha / l1_ratio, l1_ratio);
    }
};

inline std::vector<GridPoint> default_alpha_grid(double l1_ratio = 0.75) {
    std::vector<GridPoint> grid;
    for (double a : {3.0, 2.0, 1.5, 1.0, 0.7, 0.5, 0.35, 0.25, 0.18, 0.12, 0.08, 0.05}) grid.push_back({a, l1_ratio});
    return grid;
}

struct ExperimentConfig {
    double zeta = 2.0;
    Eigen::Index p = 500;
    double nu = 0.005;
    double theta0 = 1.0;
    GeneratorSpec gen;
    std::vector<GridPoint> pen_grid = default_alpha_grid();
    /// solver whose fits feed the true overlaps and the C-indices
    Solver solver = Solver::cd;
    /// also fit the other solver and report its estimates
    bool compare_solvers = true;
    int repetitions = 10;
    std::uint64_t base_seed = 1;
    Eigen::Index pop_size = 5000;
    SolverConfig amp_cfg = SolverConfig::defaults(Solver::amp);
    SolverConfig cd_cfg = [] {
        SolverConfig c = SolverConfig::defaults(Solver::cd);
        c.max_epochs = 1000;
        return c;
    }();
    RsOptions rs;
    std::string output_dir;

    Eigen::Index n() const { return static_cast<Eigen::Index>(std::llround(static_cast<double>(p) / zeta)); }

    void use_paper_scale() {
        p = 2000;
        repetitions = 20;
    }

    void validate() const {
        gen.validate();
        if (std::abs(gen.zeta - zeta) > 0.0) throw DomainError("ExperimentConfig: gen.zeta must equal zeta");
        if (n() < 10) throw DomainError("ExperimentConfig: n = round(p / zeta) must be at least 10");
        if (repetitions < 1) throw DomainError("ExperimentConfig: repetitions must be at least 1");
        if (pen_grid.empty()) throw DomainError("ExperimentConfig: empty pen_grid");
        for (const auto& g : pen_grid) (void)g.penalty();
        if (pop_size < 100) throw DomainError("ExperimentConfig: pop_size must be at least 100");
        amp_cfg.validate();
        cd_cfg.validate();
    }
};

inline ExperimentConfig experiment_config_from_json(const io::json& j) {
    ExperimentConfig cfg;
    if (j.value("paper_scale", false)) cfg.use_paper_scale();
    cfg.zeta = j.value("zeta", cfg.zeta);
    cfg.p = j.value("p", cfg.p);
    cfg.nu = j.value("nu", cfg.nu);
    cfg.theta0 = j.value("theta0", cfg.theta0);
    if (j.contains("generator")) cfg.gen = io::generator_from_json(j.at("generator"));
    cfg.gen.zeta = cfg.zeta;
    if (j.contains("pen_grid")) {
        cfg.pen_grid.clear();
        for (const auto& e : j.at("pen_grid")) cfg.pen_grid.push_back({e.at("alpha").get<double>(), e.value("l1_ratio", 0.75)});
    } else if (j.contains("alpha_grid")) {
        cfg.pen_grid.clear();
        const double l1 = j.value("l1_ratio", 0.75);
        for (const auto& a : j.at("alpha_grid")) cfg.pen_grid.push_back({a.get<double>(), l1});
    }
    if (j.contains("solver")) cfg.solver = solver_from_string(j.at("solver").get<std::string>());
    cfg.compare_solvers = j.value("compare_solvers", cfg.compare_solvers);
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    cfg.pop_size = j.value("pop_size", cfg.pop_size);
    cfg.amp_cfg.tol = j.value("tol", cfg.amp_cfg.tol);
    cfg.cd_cfg.tol = cfg.amp_cfg.tol;
    cfg.amp_cfg.max_epochs = j.value("amp_max_epochs", cfg.amp_cfg.max_epochs);
    cfg.cd_cfg.max_epochs = j.value("cd_max_epochs", cfg.cd_cfg.max_epochs);
    cfg.amp_cfg.damping = j.value("damping", cfg.amp_cfg.damping);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.validate();
    return cfg;
}

/// Everything measured for one repetition at one grid point. NaN marks "not available".
struct PointRecord {
    static constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    bool amp_converged = false;
    bool cd_converged = false;
    std::array<double, 6> amp_est{nan, nan, nan, nan, nan, nan};
    std::array<double, 6> cd_est{nan, nan, nan, nan, nan, nan};
    double true_w = nan;
    double true_v = nan;
    double rscv_c = nan;
    double test_c = nan;
    double nonzeros = nan;
    double amp_cd_rel = nan;
    std::string failure;
};

struct Summary {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double sd = std::numeric_limits<double>::quiet_NaN();
    int count = 0;

    double se() const { return count > 1 ? sd / std::sqrt(static_cast<double>(count)) : std::numeric_limits<double>::quiet_NaN(); }
};

inline Summary summarize(const std::vector<double>& values) {
    Summary s;
    double sum = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) {
            sum += v;
            ++s.count;
        }
    }
    if (s.count == 0) return s;
    s.mean = sum / s.count;
    double ss = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
    }
    s.sd = s.count > 1 ? std::sqrt(ss / (s.count - 1)) : 0.0;
    return s;
}

struct ExperimentReport {
    ExperimentConfig cfg;
    std::vector<RsSolution> rs;                    // per grid point
    std::vector<std::string> rs_failure;           // empty when the solve succeeded
    std::vector<std::vector<PointRecord>> records; // [repetition][grid point]

    std::vector<double> column(std::size_t g, const std::function<double(const PointRecord&)>& get) const {
        std::vector<double> out;
        for (const auto& rep : records) out.push_back(get(rep[g]));
        return out;
    }
};

/// Worker count: COXFIELD_THREADS if set (>= 1), else the hardware concurrency.
inline unsigned worker_count(unsigned jobs) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("COXFIELD_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<unsigned>(v);
    }
    return std::max(1u, std::min(n, jobs));
}

inline void parallel_for(unsigned jobs, const std::function<void(unsigned)>& body) {
    const unsigned workers = worker_count(jobs);
    if (workers <= 1) {
        for (unsigned k = 0; k < jobs; ++k) body(k);
        return;
    }
    std::atomic<unsigned> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (unsigned k = next++; k < jobs; k = next++) body(k);
        });
    }
    for (auto& t : pool) t.join();
}

namespace detail {

inline std::array<double, 6> estimate_array(const OrderParameterEstimate& e) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {e.w_valid && e.w_hat_valid ? e.w : nan,
            e.v_valid && e.w_hat_valid ? e.v : nan,
            e.tau,
            e.w_hat_valid ? e.w_hat : nan,
            e.v_hat,
            e.tau_hat};
}

inline std::vector<PointRecord> run_repetition(const ExperimentConfig& cfg, int rep) {
    const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(rep);
    SignalSpec sig;
    sig.p = cfg.p;
    sig.nu = cfg.nu;
    sig.theta0 = cfg.theta0;
    const SyntheticSample train = generate_dataset(sig, cfg.gen, seed);
    // a disjoint seed family for the held-out set
    const SurvivalDataset test = generate_test_set(train.beta0, train.data.n(), cfg.gen, ~seed);

    std::vector<ElasticNetPenalty> pens;
    for (const auto& g : cfg.pen_grid) pens.push_back(g.penalty());

    const bool want_amp = cfg.solver == Solver::amp || cfg.compare_solvers;
    const bool want_cd = cfg.solver == Solver::cd || cfg.compare_solvers;
    std::vector<FitResult> amp, cd;
    if (want_amp) amp = reg_path(train.data, pens, Solver::amp, cfg.amp_cfg);
    if (want_cd) cd = reg_path(train.data, pens, Solver::cd, cfg.cd_cfg);

    std::vector<PointRecord> out(pens.size());
    for (std::size_t g = 0; g < pens.size(); ++g) {
        PointRecord& rec = out[g];
        std::ostringstream fail;
        double primary_tau = std::numeric_limits<double>::quiet_NaN();
        if (want_amp && amp[g].converged) {
            rec.amp_converged = true;
            try {
                const auto e = estimate_from_amp(train.data, amp[g], cfg.zeta);
                rec.amp_est = estimate_array(e);
            } catch (const std::exception& ex) {
                fail << "amp estimate: " << ex.what() << "; ";
            }
            if (cfg.solver == Solver::amp) primary_tau = amp[g].tau;
        } else if (want_amp) {
            fail << "amp: " << amp[g].diagnostic << "; ";
        }
        if (want_cd && cd[g].converged) {
            rec.cd_converged = true;
            try {
                const auto e = estimate_from_cd(train.data, cd[g], pens[g], cfg.zeta);
                rec.cd_est = estimate_array(e);
                if (cfg.solver == Solver::cd) primary_tau = e.tau;
            } catch (const std::exception& ex) {
                fail << "cd estimate: " << ex.what() << "; ";
            }
        } else if (want_cd) {
            fail << "cd: " << cd[g].diagnostic << "; ";
        }
        if (rec.amp_converged && rec.cd_converged) {
            const double denom = cd[g].beta_hat.norm();
            rec.amp_cd_rel = denom > 0.0 ? (amp[g].beta_hat - cd[g].beta_hat).norm() / denom
                                         : amp[g].beta_hat.norm();
        }
        const FitResult& primary = cfg.solver == Solver::amp ? amp[g] : cd[g];
        if (primary.converged) {
            const auto [w, v] = true_overlaps(primary.beta_hat, train.beta0);
            rec.true_w = w;
            rec.true_v = v;
            rec.nonzeros = static_cast<double>((primary.beta_hat.array() != 0.0).count());
            try {
                rec.test_c = harrell_c(test.times(), test.events(), test.design() * primary.beta_hat);
                if (std::isfinite(primary_tau)) {
                    rec.rscv_c = rscv_c_index(train.data, primary.beta_hat, primary.hazard, primary_tau);
                }
            } catch (const std::exception& ex) {
                fail << "c-index: " << ex.what() << "; ";
            }
        }
        rec.failure = fail.str();
    }
    return out;
}

}  // namespace detail

/// Solves the RS equations along the grid on one common population, warm-starting each point.
inline void solve_rs_path(ExperimentReport& report) {
    const ExperimentConfig& cfg = report.cfg;
    const RsPopulation pop = sample_population(cfg.gen, cfg.theta0, cfg.pop_size, cfg.base_seed);
    std::optional<OrderParameters> start;
    for (const auto& g : cfg.pen_grid) {
        RsProblem prob{g.penalty(), cfg.nu, cfg.theta0, cfg.zeta, cfg.gen};
        try {
            RsSolution sol = solve_rs(prob, pop, cfg.rs, start);
            if (sol.converged) start = sol.op;
            report.rs.push_back(std::move(sol));
            report.rs_failure.emplace_back(report.rs.back().converged ? "" : "no convergence");
        } catch (const std::exception& ex) {
            report.rs.emplace_back();
            report.rs_failure.emplace_back(ex.what());
        }
    }
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentReport report;
    report.cfg = cfg;
    report.records.resize(static_cast<std::size_t>(cfg.repetitions));
    parallel_for(static_cast<unsigned>(cfg.repetitions), [&](unsigned r) {
        report.records[r] = detail::run_repetition(cfg, static_cast<int>(r));
    });
    solve_rs_path(report);
    return report;
}

namespace detail {

using Getter = std::function<double(const PointRecord&)>;

inline std::vector<std::pair<std::string, Getter>> summary_columns() {
    static const char* names[6] = {"w", "v", "tau", "w_hat", "v_hat", "tau_hat"};
    std::vector<std::pair<std::string, Getter>> cols;
    cols.emplace_back("true_w", [](const PointRecord& r) { return r.true_w; });
    cols.emplace_back("true_v", [](const PointRecord& r) { return r.true_v; });
    for (std::size_t k = 0; k < 6; ++k) {
        cols.emplace_back(std::string("amp_") + names[k], [k](const PointRecord& r) { return r.amp_est[k]; });
    }
    for (std::size_t k = 0; k < 6; ++k) {
        cols.emplace_back(std::string("cd_") + names[k], [k](const PointRecord& r) { return r.cd_est[k]; });
    }
    cols.emplace_back("rscv_c", [](const PointRecord& r) { return r.rscv_c; });
    cols.emplace_back("test_c", [](const PointRecord& r) { return r.test_c; });
    cols.emplace_back("nonzeros", [](const PointRecord& r) { return r.nonzeros; });
    cols.emplace_back("amp_cd_rel", [](const PointRecord& r) { return r.amp_cd_rel; });
    return cols;
}

inline std::string csv_number(double x) { return std::isfinite(x) ? io::format_double(x) : std::string("nan"); }

}  // namespace detail

/**
 * Aggregated table, one row per grid point. Columns: alpha, l1_ratio, the RS
 * solution (rs_converged, rs_w ... rs_tau_hat), the converged-fit counts
 * (amp_converged, cd_converged) and mean/sd/n for every measured quantity.
 */
inline std::string summary_csv(const ExperimentReport& report) {
    std::ostringstream os;
    const auto cols = detail::summary_columns();
    os << "alpha,l1_ratio,rs_converged,rs_w,rs_v,rs_tau,rs_w_hat,rs_v_hat,rs_tau_hat,amp_converged,cd_converged";
    for (const auto& [name, get] : cols) os << ',' << name << "_mean," << name << "_sd," << name << "_n";
    os << '\n';
    for (std::size_t g = 0; g < report.cfg.pen_grid.size(); ++g) {
        os << detail::csv_number(report.cfg.pen_grid[g].alpha) << ',' << detail::csv_number(report.cfg.pen_grid[g].l1_ratio);
        const bool ok = report.rs_failure[g].empty();
        os << ',' << (ok ? 1 : 0);
        for (double x : report.rs[g].op.as_array()) os << ',' << (ok ? detail::csv_number(x) : "nan");
        int amp_conv = 0, cd_conv = 0;
        for (const auto& rep : report.records) {
            amp_conv += rep[g].amp_converged;
            cd_conv += rep[g].cd_converged;
        }
        os << ',' << amp_conv << ',' << cd_conv;
        for (const auto& [name, get] : cols) {
            const Summary s = summarize(report.column(g, get));
            os << ',' << detail::csv_number(s.mean) << ',' << detail::csv_number(s.sd) << ',' << s.count;
        }
        os << '\n';
    }
    return os.str();
}

/// Long table, one row per (repetition, grid point), same quantities as summary_csv.
inline std::string repetitions_csv(const ExperimentReport& report) {
    std::ostringstream os;
    const auto cols = detail::summary_columns();
    os << "repetition,seed,alpha,l1_ratio,amp_converged,cd_converged";
    for (const auto& [name, get] : cols) os << ',' << name;
    os << '\n';
    for (std::size_t r = 0; r < report.records.size(); ++r) {
        for (std::size_t g = 0; g < report.cfg.pen_grid.size(); ++g) {
            const PointRecord& rec = report.records[r][g];
            os << r << ',' << report.cfg.base_seed + r << ',' << detail::csv_number(report.cfg.pen_grid[g].alpha) << ','
               << detail::csv_number(report.cfg.pen_grid[g].l1_ratio) << ',' << rec.amp_converged << ','
               << rec.cd_converged;
            for (const auto& [name, get] : cols) os << ',' << detail::csv_number(get(rec));
            os << '\n';
        }
    }
    return os.str();
}

/// RS path table `alpha,w,v,tau,w_hat,v_hat,tau_hat,converged`.
inline std::string rs_path_csv(const std::vector<GridPoint>& grid, const std::vector<RsSolution>& sols) {
    std::ostringstream os;
    os << "alpha,w,v,tau,w_hat,v_hat,tau_hat,converged\n";
    for (std::size_t g = 0; g < grid.size(); ++g) {
        os << detail::csv_number(grid[g].alpha);
        for (double x : sols[g].op.as_array()) os << ',' << detail::csv_number(x);
        os << ',' << (sols[g].converged ? 1 : 0) << '\n';
    }
    return os.str();
}

/// Writes summary.csv, repetitions.csv and rs_path.csv into cfg.output_dir (created if needed).
inline std::vector<std::string> write_experiment_outputs(const ExperimentReport& report) {
    namespace fs = std::filesystem;
    const fs::path dir = report.cfg.output_dir.empty() ? fs::path(".") : fs::path(report.cfg.output_dir);
    fs::create_directories(dir);
    const std::vector<std::pair<std::string, std::string>> files = {
        {"summary.csv", summary_csv(report)},
        {"repetitions.csv", repetitions_csv(report)},
        {"rs_path.csv", rs_path_csv(report.cfg.pen_grid, report.rs)}};
    std::vector<std::string> written;
    for (const auto& [name, text] : files) {
        io::write_text((dir / name).string(), text);
        written.push_back((dir / name).string());
    }
    return written;
}

}  // namespace coxfield
