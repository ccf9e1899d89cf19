// etvbf: run single trials, parameter sweeps and filter comparisons for the
// vehicle-tracking scenario.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "etvbf/etvbf.hpp"

namespace {

using namespace etvbf;

struct CommonOptions {
    std::string profile = "desk";
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> mc;
    std::optional<int> steps;
    std::string out = "etvbf";
    int threads = default_threads();
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--profile", o.profile, "Defaults profile")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--config", o.config_path, "JSON config overlaid on the profile")->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "Base seed");
    app->add_option("--mc", o.mc, "Monte Carlo trials")->check(CLI::PositiveNumber);
    app->add_option("--steps", o.steps, "Steps per trial")->check(CLI::PositiveNumber);
    app->add_option("--out", o.out, "Output path prefix");
    app->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
}

/// profile -> config file -> explicit flags, later sources winning.
ExperimentConfig resolve(const CommonOptions& o, SweepParam param) {
    ExperimentConfig cfg = profile_config(o.profile, param);
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw std::runtime_error("cannot read config '" + o.config_path + "'");
        cfg = config_from_json(nlohmann::json::parse(in), cfg);
    }
    if (o.seed) cfg.base_seed = *o.seed;
    if (o.mc) cfg.n_mc = *o.mc;
    if (o.steps) cfg.n_step = *o.steps;
    return cfg;
}

std::vector<FilterId> parse_filters(const std::vector<std::string>& names) {
    std::vector<FilterId> out;
    for (const auto& n : names) out.push_back(parse_filter_id(n));
    return out;
}

void print_rows(const std::vector<SweepRow>& rows, SweepParam param) {
    std::printf("%12s  %-10s %10s %10s %10s %8s\n", to_string(param), "filter", "rmse", "comm_rate", "mean_iter",
                "failures");
    for (const SweepRow& r : rows) {
        std::printf("%12.6g  %-10s %10.4f %10.4f %10.3f %8d\n", r.sweep_value, to_string(r.filter), r.metrics.rmse,
                    r.metrics.comm_rate, r.metrics.mean_iterations, r.metrics.failures);
    }
}

void print_paths(const std::vector<std::string>& paths) {
    for (const auto& p : paths) std::cout << "wrote " << p << '\n';
}

int run_simulate(const CommonOptions& o, const std::string& filter_name, std::optional<double> y,
                 std::optional<double> r, int trial) {
    ExperimentConfig cfg = resolve(o, SweepParam::y);
    if (y) cfg.y = *y;
    if (r) cfg.r = *r;
    cfg.validate();
    const FilterId filter = parse_filter_id(filter_name);
    const TrialRecord rec = run_trial(cfg, filter, trial);

    std::ostringstream os;
    os.precision(17);
    os << "k,gamma,iterations";
    for (int i = 1; i <= 4; ++i) os << ",x" << i;
    for (int i = 1; i <= 4; ++i) os << ",xhat" << i;
    os << '\n';
    for (std::size_t k = 0; k < rec.estimate.size(); ++k) {
        os << (k + 1) << ',' << rec.gamma[k] << ',' << rec.iterations[k];
        for (Eigen::Index i = 0; i < rec.truth[k].size(); ++i) os << ',' << rec.truth[k][i];
        for (Eigen::Index i = 0; i < rec.estimate[k].size(); ++i) os << ',' << rec.estimate[k][i];
        os << '\n';
    }
    const std::string trial_path = o.out + "_trial.csv";
    detail::write_file(trial_path, os.str());

    SeededRng rng(truth_seed(cfg.base_seed, trial));
    const Trajectory traj = simulate_truth(cfg.model(), cfg.x0, cfg.P0, cfg.n_step, rng);
    std::ostringstream ts;
    write_trajectory_csv(ts, traj);
    const std::string traj_path = o.out + "_trajectory.csv";
    detail::write_file(traj_path, ts.str());

    const Metrics m = compute_metrics({rec});
    if (rec.failed) {
        std::cerr << "trial failed at step " << rec.failure_step << ": " << rec.failure_message << '\n';
    } else {
        std::printf("%s seed %llu: rmse %.4f, comm_rate %.4f, mean_iter %.3f\n", to_string(filter),
                    static_cast<unsigned long long>(rec.seed), m.rmse, m.comm_rate, m.mean_iterations);
    }
    print_paths({trial_path, traj_path});
    return rec.failed ? 2 : 0;
}

int run_sweep_cmd(const CommonOptions& o, const std::string& param_name, const std::vector<double>& grid,
                  const std::vector<std::string>& filters) {
    const SweepParam param = parse_sweep_param(param_name);
    ExperimentConfig cfg = resolve(o, param);
    cfg.sweep_param = param;
    if (!grid.empty()) cfg.sweep_grid = grid;
    if (!filters.empty()) cfg.filters = parse_filters(filters);
    const auto rows = run_sweep(cfg, o.threads);
    print_rows(rows, param);
    print_paths(emit_outputs(rows, o.out, cfg));
    return 0;
}

int run_compare(const CommonOptions& o, std::optional<double> y, std::optional<double> r) {
    ExperimentConfig cfg = resolve(o, SweepParam::y);
    if (y) cfg.y = *y;
    if (r) cfg.r = *r;
    cfg.sweep_param = SweepParam::y;
    cfg.sweep_grid = {cfg.y};
    cfg.filters = {FilterId::etvbf, FilterId::vbf, FilterId::clset_kf, FilterId::oracle_kf};
    cfg.validate();

    std::vector<SweepRow> rows;
    std::ostringstream iters;
    iters << "# mean sweep count per step\n# k etvbf vbf\n";
    std::vector<std::vector<double>> per_step;
    for (FilterId f : cfg.filters) {
        const auto records = run_trials(cfg, f, o.threads);
        rows.push_back(SweepRow{cfg.y, f, compute_metrics(records)});
        if (f == FilterId::etvbf || f == FilterId::vbf) per_step.push_back(per_step_mean_iterations(records));
    }
    for (std::size_t k = 0; k < per_step[0].size(); ++k) {
        iters << (k + 1) << ' ' << format_number(per_step[0][k]) << ' ' << format_number(per_step[1][k]) << '\n';
    }

    std::printf("r = %g\n", cfg.r);
    print_rows(rows, SweepParam::y);
    auto paths = emit_outputs(rows, o.out, cfg);
    const std::string iter_path = o.out + "_iterations_per_step.dat";
    detail::write_file(iter_path, iters.str());
    paths.push_back(iter_path);
    print_paths(paths);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-triggered variational Bayesian filter experiments"};
    app.require_subcommand(1);

    CommonOptions sim_opts, sweep_opts, cmp_opts;

    auto* sim = app.add_subcommand("simulate", "Run one trial and dump its record and trajectory");
    add_common(sim, sim_opts);
    std::string sim_filter = "etvbf";
    std::optional<double> sim_y, sim_r;
    int sim_trial = 0;
    sim->add_option("--filter", sim_filter, "etvbf, vbf, clset_kf or oracle_kf");
    sim->add_option("--y", sim_y, "Trigger scale (Y = y I)");
    sim->add_option("--r", sim_r, "Nominal measurement noise scale (R0 = r I)");
    sim->add_option("--trial", sim_trial, "Trial index")->check(CLI::NonNegativeNumber);

    auto* sweep = app.add_subcommand("sweep", "Sweep y, r or rho over a grid");
    add_common(sweep, sweep_opts);
    std::string sweep_param = "y";
    std::vector<double> sweep_grid;
    std::vector<std::string> sweep_filters;
    sweep->add_option("--param", sweep_param, "Swept parameter")->check(CLI::IsMember({"y", "r", "rho"}));
    sweep->add_option("--grid", sweep_grid, "Grid values (space or comma separated)")->delimiter(',');
    sweep->add_option("--filters", sweep_filters, "Filters to run")->delimiter(',');

    auto* cmp = app.add_subcommand("compare", "All filters at one (y, r) point");
    add_common(cmp, cmp_opts);
    std::optional<double> cmp_y, cmp_r;
    cmp->add_option("--y", cmp_y, "Trigger scale (Y = y I)");
    cmp->add_option("--r", cmp_r, "Nominal measurement noise scale (R0 = r I)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(sim_opts, sim_filter, sim_y, sim_r, sim_trial);
        if (sweep->parsed()) return run_sweep_cmd(sweep_opts, sweep_param, sweep_grid, sweep_filters);
        if (cmp->parsed()) return run_compare(cmp_opts, cmp_y, cmp_r);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
