#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include <coxfield/experiment.hpp>
#include <coxfield/io.hpp>

using namespace coxfield;

namespace {

SyntheticSample small_sample() {
    SignalSpec sig;
    sig.p = 30;
    sig.nu = 0.1;
    return generate_dataset(sig, GeneratorSpec{}, 3);
}

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.p = 100;
    cfg.nu = 0.05;
    cfg.repetitions = 3;
    cfg.pop_size = 800;
    cfg.pen_grid = {{1.0, 0.75}, {0.4, 0.75}};
    return cfg;
}

}  // namespace

TEST(Csv, RoundTripIsExact) {
    const auto s = small_sample();
    std::stringstream ss;
    io::write_dataset_csv(ss, s.data);
    const SurvivalDataset back = io::read_dataset_csv(ss);
    EXPECT_EQ(back.times(), s.data.times());
    EXPECT_EQ(back.events(), s.data.events());
    EXPECT_EQ(back.design(), s.data.design());
}

TEST(Csv, HeaderFormat) {
    const auto s = small_sample();
    std::stringstream ss;
    io::write_dataset_csv(ss, s.data);
    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header.rfind("time,event,x1,x2,", 0), 0u);
    EXPECT_NE(header.find(",x30"), std::string::npos);
}

TEST(Csv, LoaderValidates) {
    const auto parse = [](const std::string& text) {
        std::stringstream ss(text);
        return io::read_dataset_csv(ss);
    };
    EXPECT_THROW(parse(""), DomainError);
    EXPECT_THROW(parse("t,event,x1\n1,1,0\n"), DomainError);
    EXPECT_THROW(parse("time,event,x2\n1,1,0\n"), DomainError);
    EXPECT_THROW(parse("time,event,x1\n1,1\n"), DomainError);
    EXPECT_THROW(parse("time,event,x1\n1,2,0\n"), DomainError);
    EXPECT_THROW(parse("time,event,x1\n1,1,abc\n"), DomainError);
    EXPECT_THROW(parse("time,event,x1\n-1,1,0\n"), DomainError);
    EXPECT_THROW(parse("time,event,x1\n"), DomainError);
    const auto ok = parse("time,event,x1,x2\r\n1.5,1,0.25,-3e-2\r\n2,0,1,2\r\n");
    EXPECT_EQ(ok.n(), 2);
    EXPECT_DOUBLE_EQ(ok.design()(0, 1), -0.03);
}

TEST(FitJson, RoundTrip) {
    const auto s = small_sample();
    const auto pen = ElasticNetPenalty::from_strength(0.5, 0.75);
    const FitResult fit = fit_amp(s.data, pen);
    const auto j = io::to_json(fit, pen);
    const auto back = io::fit_from_json(io::json::parse(j.dump()));
    EXPECT_EQ(back.fit.beta_hat, fit.beta_hat);
    EXPECT_EQ(back.fit.hazard.knots(), fit.hazard.knots());
    EXPECT_EQ(back.fit.hazard.jumps(), fit.hazard.jumps());
    EXPECT_EQ(back.fit.tau, fit.tau);
    EXPECT_EQ(back.fit.converged, fit.converged);
    EXPECT_EQ(back.pen.alpha, pen.alpha);
    EXPECT_EQ(back.pen.eta, pen.eta);
}

TEST(ExperimentConfig, ParsesJsonAndValidates) {
    const auto j = io::json::parse(R"({"p": 200, "zeta": 2, "repetitions": 2, "alpha_grid": [1.0, 0.5],
                                      "l1_ratio": 0.5, "solver": "amp", "base_seed": 9})");
    const ExperimentConfig cfg = experiment_config_from_json(j);
    EXPECT_EQ(cfg.p, 200);
    EXPECT_EQ(cfg.n(), 100);
    EXPECT_EQ(cfg.pen_grid.size(), 2u);
    EXPECT_DOUBLE_EQ(cfg.pen_grid[1].penalty().eta, 0.5);
    EXPECT_EQ(cfg.solver, Solver::amp);
    EXPECT_EQ(cfg.base_seed, 9u);
    EXPECT_THROW(experiment_config_from_json(io::json::parse(R"({"p": 10})")), DomainError);
    EXPECT_THROW(experiment_config_from_json(io::json::parse(R"({"repetitions": 0})")), DomainError);
    const ExperimentConfig full = experiment_config_from_json(io::json::parse(R"({"paper_scale": true})"));
    EXPECT_EQ(full.p, 2000);
    EXPECT_EQ(full.repetitions, 20);
}

TEST(Experiment, OneRowPerGridPointAndDeterministic) {
    ExperimentConfig cfg = tiny_config();
    const ExperimentReport a = run_experiment(cfg);
    ASSERT_EQ(a.records.size(), 3u);
    ASSERT_EQ(a.rs.size(), 2u);
    const std::string summary = summary_csv(a);
    EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 3);
    const std::string reps = repetitions_csv(a);
    EXPECT_EQ(std::count(reps.begin(), reps.end(), '\n'), 1 + 3 * 2);

    setenv("COXFIELD_THREADS", "1", 1);
    const ExperimentReport b = run_experiment(cfg);
    unsetenv("COXFIELD_THREADS");
    EXPECT_EQ(summary_csv(b), summary);
    EXPECT_EQ(repetitions_csv(b), reps);
    EXPECT_EQ(rs_path_csv(cfg.pen_grid, b.rs), rs_path_csv(cfg.pen_grid, a.rs));
}

TEST(Experiment, SingleRepetitionSinglePoint) {
    ExperimentConfig cfg = tiny_config();
    cfg.repetitions = 1;
    cfg.pen_grid = {{0.5, 0.75}};
    const ExperimentReport r = run_experiment(cfg);
    const std::string summary = summary_csv(r);
    EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 2);
    const auto rec = r.records[0][0];
    EXPECT_TRUE(rec.cd_converged);
    EXPECT_TRUE(std::isfinite(rec.true_w));
    EXPECT_TRUE(std::isfinite(rec.test_c));
    EXPECT_TRUE(std::isfinite(rec.rscv_c));
}

TEST(Experiment, WritesOutputFiles) {
    ExperimentConfig cfg = tiny_config();
    cfg.repetitions = 1;
    cfg.output_dir = (std::filesystem::temp_directory_path() / "coxfield_exp_test").string();
    std::filesystem::remove_all(cfg.output_dir);
    const auto files = write_experiment_outputs(run_experiment(cfg));
    ASSERT_EQ(files.size(), 3u);
    for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(f)) << f;
    std::ifstream rs(files[2]);
    std::string header;
    std::getline(rs, header);
    EXPECT_EQ(header, "alpha,w,v,tau,w_hat,v_hat,tau_hat,converged");
}

TEST(Summary, MeanSdSkipNaN) {
    const Summary s = summarize({1.0, 3.0, std::numeric_limits<double>::quiet_NaN()});
    EXPECT_EQ(s.count, 2);
    EXPECT_DOUBLE_EQ(s.mean, 2.0);
    EXPECT_DOUBLE_EQ(s.sd, std::sqrt(2.0));
}
