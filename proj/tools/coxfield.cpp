// coxfield command-line interface: generate | fit | path | rs-solve | estimate | experiment
//
// Every subcommand prints a JSON summary on stdout. Exit codes: 0 success,
// 1 usage or input error, 2 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include <coxfield/experiment.hpp>
#include <coxfield/io.hpp>
#include <coxfield/observables.hpp>
#include <coxfield/rs_theory.hpp>
#include <coxfield/solvers.hpp>
#include <coxfield/synthgen.hpp>

namespace fs = std::filesystem;
using namespace coxfield;
using io::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

struct GeneratorFlags {
    GeneratorSpec gen;
    void add(CLI::App* app) {
        app->add_option("--phi0", gen.phi0, "log-logistic baseline scale parameter");
        app->add_option("--rho0", gen.rho0, "log-logistic baseline shape parameter");
        app->add_option("--tau1", gen.tau1, "lower end of the uniform censoring window");
        app->add_option("--tau2", gen.tau2, "upper end of the uniform censoring window");
    }
};

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

std::vector<ElasticNetPenalty> penalties(const std::vector<double>& alphas, double l1_ratio) {
    std::vector<ElasticNetPenalty> out;
    for (double a : alphas) out.push_back(GridPoint{a, l1_ratio}.penalty());
    return out;
}

json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DomainError("cannot open " + path);
    return json::parse(is);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coxfield: high-dimensional penalized Cox regression with AMP, CD and replica-symmetric theory"};
    app.require_subcommand(1);

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "simulate a dataset (CSV) and its ground-truth sidecar (JSON)");
    SignalSpec g_signal;
    GeneratorFlags g_gen;
    std::uint64_t g_seed = 1;
    std::string g_out = "data.csv";
    gen_cmd->add_option("--p", g_signal.p, "number of covariates")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--zeta", g_gen.gen.zeta, "ratio p / n")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--nu", g_signal.nu, "active fraction of the signal");
    gen_cmd->add_option("--theta0", g_signal.theta0, "signal strength |beta0| / sqrt(p)");
    gen_cmd->add_option("--seed", g_seed, "random seed");
    gen_cmd->add_option("--output", g_out, "CSV path; the sidecar is written next to it with suffix .json");
    g_gen.add(gen_cmd);

    // fit and path share their flags
    std::string f_input, f_output = "fit.json";
    std::string f_solver = "amp";
    double f_alpha = 1.0, f_l1 = 0.75;
    std::vector<double> f_grid;
    SolverConfig f_cfg;
    int f_max_epochs = -1;
    auto add_fit_flags = [&](CLI::App* cmd, bool path) {
        cmd->add_option("--input", f_input, "dataset CSV")->required();
        cmd->add_option("--output", f_output, "output JSON");
        cmd->add_option("--solver", f_solver, "amp or cd")->check(CLI::IsMember({"amp", "cd"}));
        if (path) {
            cmd->add_option("--alpha-grid", f_grid, "decreasing list of L1 weights")->required()->delimiter(',');
        } else {
            cmd->add_option("--alpha", f_alpha, "L1 weight alpha")->check(CLI::PositiveNumber);
        }
        cmd->add_option("--l1-ratio", f_l1, "l1 ratio lambda in (0, 1]");
        cmd->add_option("--tol", f_cfg.tol, "convergence tolerance");
        cmd->add_option("--max-epochs", f_max_epochs, "epoch cap (default 1000 for amp, 100 for cd)");
        cmd->add_option("--damping", f_cfg.damping, "AMP update weight in (0, 1]");
    };
    auto* fit_cmd = app.add_subcommand("fit", "fit one penalized Cox model");
    add_fit_flags(fit_cmd, false);
    auto* path_cmd = app.add_subcommand("path", "fit along a regularization path with warm starts");
    add_fit_flags(path_cmd, true);

    // rs-solve
    auto* rs_cmd = app.add_subcommand("rs-solve", "solve the replica-symmetric equations along an alpha grid");
    double r_zeta = 2.0, r_nu = 0.005, r_theta0 = 1.0, r_l1 = 0.75;
    std::vector<double> r_grid;
    Eigen::Index r_pop = 5000;
    std::uint64_t r_seed = 1;
    std::string r_out = "rs_path.csv";
    GeneratorFlags r_gen;
    rs_cmd->add_option("--zeta", r_zeta, "ratio p / n")->check(CLI::PositiveNumber);
    rs_cmd->add_option("--nu", r_nu, "active fraction of the signal");
    rs_cmd->add_option("--theta0", r_theta0, "signal strength");
    rs_cmd->add_option("--alpha-grid", r_grid, "decreasing list of L1 weights")->required()->delimiter(',');
    rs_cmd->add_option("--l1-ratio", r_l1, "l1 ratio lambda in (0, 1]");
    rs_cmd->add_option("--pop-size", r_pop, "population size")->check(CLI::Range(100, 100000000));
    rs_cmd->add_option("--seed", r_seed, "population seed");
    rs_cmd->add_option("--output", r_out, "CSV path");
    r_gen.add(rs_cmd);

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "estimate order parameters from a stored fit");
    std::string e_fit, e_data, e_sidecar, e_out;
    est_cmd->add_option("--fit", e_fit, "fit JSON written by fit")->required();
    est_cmd->add_option("--input", e_data, "dataset CSV the fit was computed on")->required();
    est_cmd->add_option("--sidecar", e_sidecar, "ground-truth sidecar (default: <input stem>.json if present)");
    est_cmd->add_option("--output", e_out, "output JSON");

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "seeded repetitions along a path, compared with RS theory");
    std::string x_config, x_out;
    bool x_paper = false;
    exp_cmd->add_option("--config", x_config, "experiment JSON (omitted keys take desk-scale defaults)");
    exp_cmd->add_flag("--paper-scale", x_paper, "p = 2000 and 20 repetitions");
    exp_cmd->add_option("--output", x_out, "output directory (overrides the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) {
            g_gen.gen.validate();
            g_signal.seed = g_seed;
            const auto sample = generate_dataset(g_signal, g_gen.gen, g_seed);
            std::ostringstream csv;
            io::write_dataset_csv(csv, sample.data);
            io::write_text(g_out, csv.str());
            const std::string sidecar = fs::path(g_out).replace_extension(".json").string();
            io::write_text(sidecar,
                           io::sidecar_json(g_signal, g_gen.gen, g_seed, sample.data.n(), sample.beta0).dump(2) + "\n");
            print({{"command", "generate"},
                   {"n", sample.data.n()},
                   {"p", sample.data.p()},
                   {"events", sample.data.event_count()},
                   {"output", g_out},
                   {"sidecar", sidecar}});
            return 0;
        }

        if (fit_cmd->parsed() || path_cmd->parsed()) {
            const Solver solver = solver_from_string(f_solver);
            SolverConfig cfg = SolverConfig::defaults(solver);
            cfg.tol = f_cfg.tol;
            cfg.damping = f_cfg.damping;
            if (f_max_epochs > 0) cfg.max_epochs = f_max_epochs;
            cfg.validate();
            const SurvivalDataset data = io::read_dataset_csv(f_input);
            const auto pens = fit_cmd->parsed() ? penalties({f_alpha}, f_l1) : penalties(f_grid, f_l1);
            const auto fits = fit_cmd->parsed() ? std::vector<FitResult>{fit(data, pens[0], solver, nullptr, cfg)}
                                                : reg_path(data, pens, solver, cfg);
            json points = json::array();
            json summary = json::array();
            bool all_converged = true;
            for (std::size_t k = 0; k < fits.size(); ++k) {
                points.push_back(io::to_json(fits[k], pens[k]));
                summary.push_back({{"alpha", pens[k].alpha},
                                   {"converged", fits[k].converged},
                                   {"epochs", fits[k].epochs},
                                   {"nonzeros", (fits[k].beta_hat.array() != 0.0).count()},
                                   {"diagnostic", fits[k].diagnostic}});
                all_converged = all_converged && fits[k].converged;
            }
            io::write_text(f_output, (fit_cmd->parsed() ? points[0] : json{{"path", points}}).dump(2) + "\n");
            print({{"command", fit_cmd->parsed() ? "fit" : "path"},
                   {"solver", f_solver},
                   {"n", data.n()},
                   {"p", data.p()},
                   {"all_converged", all_converged},
                   {"points", summary},
                   {"output", f_output}});
            return 0;
        }

        if (rs_cmd->parsed()) {
            r_gen.gen.zeta = r_zeta;
            r_gen.gen.validate();
            std::vector<GridPoint> grid;
            for (double a : r_grid) grid.push_back({a, r_l1});
            ExperimentReport report;
            report.cfg.gen = r_gen.gen;
            report.cfg.zeta = r_zeta;
            report.cfg.nu = r_nu;
            report.cfg.theta0 = r_theta0;
            report.cfg.pen_grid = grid;
            report.cfg.pop_size = r_pop;
            report.cfg.base_seed = r_seed;
            solve_rs_path(report);
            const std::string csv = rs_path_csv(grid, report.rs);
            io::write_text(r_out, csv);
            json rows = json::array();
            bool ok = true;
            for (std::size_t g = 0; g < grid.size(); ++g) {
                json row = io::to_json(report.rs[g].op);
                row["alpha"] = grid[g].alpha;
                row["converged"] = report.rs[g].converged;
                row["iterations"] = report.rs[g].iterations;
                if (!report.rs_failure[g].empty()) row["error"] = report.rs_failure[g];
                ok = ok && report.rs_failure[g].empty();
                rows.push_back(row);
            }
            print({{"command", "rs-solve"}, {"points", rows}, {"output", r_out}});
            return ok ? 0 : kExitNumerical;
        }

        if (est_cmd->parsed()) {
            const SurvivalDataset data = io::read_dataset_csv(e_data);
            const auto stored = io::fit_from_json(load_json(e_fit));
            const double zeta = data.zeta();
            json out{{"command", "estimate"}, {"solver", to_string(stored.fit.solver)}, {"zeta", zeta}};
            int code = 0;
            const auto attempt = [&](const char* key, const std::function<OrderParameterEstimate()>& f) {
                try {
                    out[key] = io::to_json(f());
                } catch (const std::exception& ex) {
                    out[key] = {{"error", ex.what()}};
                    code = kExitNumerical;
                }
            };
            if (stored.fit.solver == Solver::amp) {
                attempt("amp", [&] { return estimate_from_amp(data, stored.fit, zeta); });
            }
            attempt("cd", [&] { return estimate_from_cd(data, stored.fit, stored.pen, zeta); });
            std::string sidecar = e_sidecar;
            if (sidecar.empty()) {
                const auto guess = fs::path(e_data).replace_extension(".json");
                if (fs::exists(guess)) sidecar = guess.string();
            }
            if (!sidecar.empty()) {
                const Vector beta0 = io::vector_from_json(load_json(sidecar).at("beta0"));
                const auto [w, v] = true_overlaps(stored.fit.beta_hat, beta0);
                out["true_overlaps"] = {{"w", w}, {"v", v}};
            }
            if (!e_out.empty()) io::write_text(e_out, out.dump(2) + "\n");
            print(out);
            return code;
        }

        if (exp_cmd->parsed()) {
            json j = x_config.empty() ? json::object() : load_json(x_config);
            if (x_paper) j["paper_scale"] = true;
            ExperimentConfig cfg = experiment_config_from_json(j);
            if (!x_out.empty()) cfg.output_dir = x_out;
            if (cfg.output_dir.empty()) cfg.output_dir = "experiment_out";
            const ExperimentReport report = run_experiment(cfg);
            const auto files = write_experiment_outputs(report);
            json points = json::array();
            for (std::size_t g = 0; g < cfg.pen_grid.size(); ++g) {
                int amp = 0, cd = 0;
                for (const auto& rep : report.records) {
                    amp += rep[g].amp_converged;
                    cd += rep[g].cd_converged;
                }
                points.push_back({{"alpha", cfg.pen_grid[g].alpha},
                                  {"rs_converged", report.rs_failure[g].empty()},
                                  {"amp_converged", amp},
                                  {"cd_converged", cd}});
            }
            print({{"command", "experiment"},
                   {"p", cfg.p},
                   {"n", cfg.n()},
                   {"repetitions", cfg.repetitions},
                   {"points", points},
                   {"outputs", files}});
            return 0;
        }
    } catch (const NumericalError& ex) {
        print({{"error", ex.what()}, {"kind", "numerical"}});
        return kExitNumerical;
    } catch (const std::exception& ex) {
        print({{"error", ex.what()}, {"kind", "usage"}});
        return kExitUsage;
    }
    return kExitUsage;
}
