#pragma once

// Monte Carlo runner for the vehicle-tracking study: per-trial closed-loop
// simulation, RMSE / communication-rate metrics, parameter sweeps and output
// files.
//
// Random streams: truth (initial estimate, process and measurement noise) is
// keyed by base_seed + trial only, so every filter sees the same trajectory;
// trigger draws use a second stream keyed by (base_seed, trial, filter).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "etvbf/baselines.hpp"
#include "etvbf/distributions.hpp"
#include "etvbf/filter.hpp"
#include "etvbf/model.hpp"
#include "etvbf/trigger.hpp"

namespace etvbf {

enum class FilterId { etvbf, vbf, clset_kf, oracle_kf };

inline const char* to_string(FilterId id) {
    switch (id) {
        case FilterId::etvbf: return "etvbf";
        case FilterId::vbf: return "vbf";
        case FilterId::clset_kf: return "clset_kf";
        case FilterId::oracle_kf: return "oracle_kf";
    }
    return "unknown";
}

inline FilterId parse_filter_id(const std::string& s) {
    if (s == "etvbf") return FilterId::etvbf;
    if (s == "vbf") return FilterId::vbf;
    if (s == "clset_kf") return FilterId::clset_kf;
    if (s == "oracle_kf") return FilterId::oracle_kf;
    throw std::invalid_argument("unknown filter id '" + s + "'");
}

enum class SweepParam { y, r, rho };

inline const char* to_string(SweepParam p) {
    switch (p) {
        case SweepParam::y: return "y";
        case SweepParam::r: return "r";
        case SweepParam::rho: return "rho";
    }
    return "unknown";
}

inline SweepParam parse_sweep_param(const std::string& s) {
    if (s == "y") return SweepParam::y;
    if (s == "r") return SweepParam::r;
    if (s == "rho") return SweepParam::rho;
    throw std::invalid_argument("unknown sweep parameter '" + s + "' (expected y, r or rho)");
}

inline std::vector<double> arange_inclusive(double start, double step, double stop) {
    std::vector<double> out;
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (long i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
}

struct ExperimentConfig {
    std::uint64_t base_seed = 1;
    int n_mc = 50;
    int n_step = 150;
    std::vector<FilterId> filters{FilterId::etvbf, FilterId::vbf, FilterId::clset_kf};
    SweepParam sweep_param = SweepParam::y;
    std::vector<double> sweep_grid{0.0005, 0.005, 0.05};

    // scenario
    double T = 1.0;
    int T_f = 500;
    Vector x0 = scenario_defaults().x0;
    Matrix P0 = scenario_defaults().P0;

    // variational filter
    std::vector<Matrix> nominal_q = tracking_filter_config(4, 2, 150.0, 0.015).nominal_q;
    std::vector<double> dof_g = std::vector<double>(5, 10.0);
    double r = 150.0;  ///< R0 = r I
    double s0 = 5.0;
    Vector alpha0 = Vector::Ones(5);
    double rho = 0.997;
    double y = 0.015;  ///< Y = y I
    int max_iterations = 50;
    double delta = 1e-8;

    // known-covariance baseline
    Matrix clset_q = 4.0 * Matrix::Identity(4, 4);

    bool trigger_enabled = true;

    [[nodiscard]] ModelSpec model() const { return build_cv_scenario(T, T_f); }

    [[nodiscard]] FilterConfig filter_config() const {
        const ModelSpec mdl = model();
        FilterConfig cfg;
        cfg.nominal_q = nominal_q;
        cfg.dof_g = dof_g;
        cfg.R0 = r * Matrix::Identity(mdl.m, mdl.m);
        cfg.s0 = s0;
        cfg.alpha0 = alpha0;
        cfg.rho = rho;
        cfg.trigger = TriggerConfig::scaled_identity(y, mdl.m);
        cfg.max_iterations = max_iterations;
        cfg.delta = delta;
        return cfg;
    }

    [[nodiscard]] ExperimentConfig with_sweep_value(double v) const {
        ExperimentConfig c = *this;
        switch (sweep_param) {
            case SweepParam::y: c.y = v; break;
            case SweepParam::r: c.r = v; break;
            case SweepParam::rho: c.rho = v; break;
        }
        return c;
    }

    void validate() const {
        if (n_mc < 1) throw std::invalid_argument("ExperimentConfig: n_mc must be >= 1");
        if (n_step < 1) throw std::invalid_argument("ExperimentConfig: n_step must be >= 1");
        if (filters.empty()) throw std::invalid_argument("ExperimentConfig: no filters selected");
        if (sweep_grid.empty()) throw std::invalid_argument("ExperimentConfig: empty sweep grid");
        for (double v : sweep_grid) {
            if (!(v > 0.0)) throw std::invalid_argument("ExperimentConfig: grid values must be positive");
        }
        const ModelSpec mdl = model();
        for (double v : sweep_grid) with_sweep_value(v).filter_config().validate(mdl.n, mdl.m);
        (void)spd_factor(clset_q);
        (void)spd_factor(P0);
    }
};

/// Desk-scale (quick) or full-scale ("paper") defaults for a given sweep parameter.
inline ExperimentConfig profile_config(const std::string& profile, SweepParam param) {
    ExperimentConfig cfg;
    cfg.sweep_param = param;
    if (profile == "desk") {
        cfg.n_mc = 50;
        switch (param) {
            case SweepParam::y: cfg.sweep_grid = {0.0005, 0.005, 0.05}; break;
            case SweepParam::r: cfg.sweep_grid = {10.0, 150.0, 300.0}; break;
            case SweepParam::rho: cfg.sweep_grid = {0.92, 0.94, 0.96, 0.98, 1.00}; break;
        }
    } else if (profile == "paper") {
        cfg.n_mc = 500;
        switch (param) {
            case SweepParam::y: cfg.sweep_grid = arange_inclusive(0.0005, 0.0005, 0.1); break;
            case SweepParam::r: cfg.sweep_grid = arange_inclusive(10.0, 10.0, 300.0); break;
            case SweepParam::rho: cfg.sweep_grid = {0.92, 0.94, 0.96, 0.98, 1.00}; break;
        }
    } else {
        throw std::invalid_argument("unknown profile '" + profile + "' (expected desk or paper)");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Accepts a nested array, or a number meaning that multiple of I_dim.
inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index dim, const std::string& key) {
    if (j.is_number()) return j.get<double>() * Matrix::Identity(dim, dim);
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim) {
        throw std::invalid_argument("config: '" + key + "' must be a number or a " + std::to_string(dim) +
                                    "x" + std::to_string(dim) + " array");
    }
    Matrix m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dim) {
            throw std::invalid_argument("config: '" + key + "' has a malformed row");
        }
        for (Eigen::Index c = 0; c < dim; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline nlohmann::json vector_to_json(const Vector& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vector_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["base_seed"] = c.base_seed;
    j["n_mc"] = c.n_mc;
    j["n_step"] = c.n_step;
    std::vector<std::string> filters;
    for (FilterId f : c.filters) filters.emplace_back(to_string(f));
    j["filters"] = filters;
    j["sweep_param"] = to_string(c.sweep_param);
    j["sweep_grid"] = c.sweep_grid;
    j["T"] = c.T;
    j["T_f"] = c.T_f;
    j["x0"] = detail::vector_to_json(c.x0);
    j["P0"] = detail::matrix_to_json(c.P0);
    nlohmann::json q = nlohmann::json::array();
    for (const Matrix& m : c.nominal_q) q.push_back(detail::matrix_to_json(m));
    j["nominal_q"] = q;
    j["dof_g"] = c.dof_g;
    j["r"] = c.r;
    j["s0"] = c.s0;
    j["alpha0"] = detail::vector_to_json(c.alpha0);
    j["rho"] = c.rho;
    j["y"] = c.y;
    j["max_iterations"] = c.max_iterations;
    j["delta"] = c.delta;
    j["clset_q"] = detail::matrix_to_json(c.clset_q);
    j["trigger_enabled"] = c.trigger_enabled;
    return j;
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {}) {
    if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
    ExperimentConfig c = std::move(base);
    const Eigen::Index n = 4;
    for (const auto& [key, v] : j.items()) {
        if (key == "base_seed") c.base_seed = v.get<std::uint64_t>();
        else if (key == "n_mc") c.n_mc = v.get<int>();
        else if (key == "n_step") c.n_step = v.get<int>();
        else if (key == "filters") {
            c.filters.clear();
            for (const auto& f : v) c.filters.push_back(parse_filter_id(f.get<std::string>()));
        } else if (key == "sweep_param") c.sweep_param = parse_sweep_param(v.get<std::string>());
        else if (key == "sweep_grid") c.sweep_grid = v.get<std::vector<double>>();
        else if (key == "T") c.T = v.get<double>();
        else if (key == "T_f") c.T_f = v.get<int>();
        else if (key == "x0") c.x0 = detail::vector_from_json(v);
        else if (key == "P0") c.P0 = detail::matrix_from_json(v, n, key);
        else if (key == "nominal_q") {
            c.nominal_q.clear();
            for (const auto& q : v) c.nominal_q.push_back(detail::matrix_from_json(q, n, key));
        } else if (key == "dof_g") c.dof_g = v.get<std::vector<double>>();
        else if (key == "r") c.r = v.get<double>();
        else if (key == "s0") c.s0 = v.get<double>();
        else if (key == "alpha0") c.alpha0 = detail::vector_from_json(v);
        else if (key == "rho") c.rho = v.get<double>();
        else if (key == "y") c.y = v.get<double>();
        else if (key == "max_iterations") c.max_iterations = v.get<int>();
        else if (key == "delta") c.delta = v.get<double>();
        else if (key == "clset_q") c.clset_q = detail::matrix_from_json(v, n, key);
        else if (key == "trigger_enabled") c.trigger_enabled = v.get<bool>();
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

struct TrialRecord {
    std::uint64_t seed = 0;
    FilterId filter = FilterId::etvbf;
    std::vector<Vector> truth;
    std::vector<Vector> estimate;
    std::vector<int> gamma;
    std::vector<int> iterations;
    bool failed = false;
    int failure_step = 0;
    std::string failure_message;

    bool operator==(const TrialRecord&) const = default;
};

inline std::uint64_t truth_seed(std::uint64_t base_seed, int trial) {
    return base_seed + static_cast<std::uint64_t>(trial);
}

inline std::uint64_t trigger_seed(std::uint64_t base_seed, int trial, FilterId filter) {
    return mix_seed(mix_seed(truth_seed(base_seed, trial)) ^ (0x7452494747455200ULL + static_cast<std::uint64_t>(filter)));
}

inline TrialRecord run_trial(const ExperimentConfig& cfg, FilterId filter, int trial_index) {
    const ModelSpec model = cfg.model();
    SeededRng truth_rng(truth_seed(cfg.base_seed, trial_index));
    SeededRng trigger_rng(trigger_seed(cfg.base_seed, trial_index, filter));
    const Trajectory traj = simulate_truth(model, cfg.x0, cfg.P0, cfg.n_step, truth_rng);

    TrialRecord rec;
    rec.seed = truth_rng.seed();
    rec.filter = filter;
    rec.truth = traj.states;
    const auto steps = static_cast<std::size_t>(cfg.n_step);
    rec.estimate.reserve(steps);
    rec.gamma.reserve(steps);
    rec.iterations.reserve(steps);

    const FilterConfig fcfg = cfg.filter_config();
    const TriggerConfig& trig = fcfg.trigger;
    FilterState vb = FilterState::initial(fcfg, traj.initial_estimate, cfg.P0);
    KfState kf{traj.initial_estimate, cfg.P0};

    int k = 0;
    try {
        for (k = 1; k <= cfg.n_step; ++k) {
            const Matrix F = model.F(k);
            const Matrix H = model.H(k);
            const Vector& z = traj.measurements[static_cast<std::size_t>(k - 1)];
            auto decide = [&](const Vector& x_prev) {
                if (!cfg.trigger_enabled) return TriggerOutcome::send(z);
                return sensor_decide(z, H * (F * x_prev), trig, trigger_rng);
            };

            switch (filter) {
                case FilterId::etvbf: {
                    const TriggerOutcome out = decide(vb.x_hat);
                    StepResult res = etvbf_step(vb, F, H, out, fcfg, k);
                    vb = std::move(res.state);
                    rec.gamma.push_back(out.gamma());
                    rec.iterations.push_back(res.diagnostics.iterations);
                    rec.estimate.push_back(vb.x_hat);
                    break;
                }
                case FilterId::vbf: {
                    StepResult res = vbf_step(vb, F, H, z, fcfg, k);
                    vb = std::move(res.state);
                    rec.gamma.push_back(1);
                    rec.iterations.push_back(res.diagnostics.iterations);
                    rec.estimate.push_back(vb.x_hat);
                    break;
                }
                case FilterId::clset_kf: {
                    const TriggerOutcome out = decide(kf.x_hat);
                    kf = clset_kf_step(kf, F, H, cfg.clset_q, fcfg.R0, trig.Y, out);
                    rec.gamma.push_back(out.gamma());
                    rec.iterations.push_back(1);
                    rec.estimate.push_back(kf.x_hat);
                    break;
                }
                case FilterId::oracle_kf: {
                    kf = kf_oracle_step(kf, F, H, model.trueQ(k), model.trueR(k), z);
                    rec.gamma.push_back(1);
                    rec.iterations.push_back(1);
                    rec.estimate.push_back(kf.x_hat);
                    break;
                }
            }
        }
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.failure_step = k;
        rec.failure_message = e.what();
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Metrics {
    double rmse = 0.0;
    double comm_rate = 0.0;
    double comm_rate_paper_sqrt = 0.0;  ///< sqrt of comm_rate
    double mean_iterations = 0.0;
    int failures = 0;
};

/// Averages over every (trial, step, component) of the non-failed trials.
inline Metrics compute_metrics(const std::vector<TrialRecord>& records) {
    if (records.empty()) throw std::invalid_argument("compute_metrics: no trial records");
    Metrics m;
    double sq = 0.0;
    double gamma_sum = 0.0;
    double iter_sum = 0.0;
    std::size_t components = 0;
    std::size_t steps = 0;
    for (const TrialRecord& rec : records) {
        if (rec.failed) {
            ++m.failures;
            continue;
        }
        for (std::size_t k = 0; k < rec.estimate.size(); ++k) {
            sq += (rec.estimate[k] - rec.truth[k]).squaredNorm();
            components += static_cast<std::size_t>(rec.truth[k].size());
            gamma_sum += rec.gamma[k];
            iter_sum += rec.iterations[k];
            ++steps;
        }
    }
    if (steps == 0) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        return Metrics{nan, nan, nan, nan, m.failures};
    }
    m.rmse = std::sqrt(sq / static_cast<double>(components));
    m.comm_rate = gamma_sum / static_cast<double>(steps);
    m.comm_rate_paper_sqrt = std::sqrt(m.comm_rate);
    m.mean_iterations = iter_sum / static_cast<double>(steps);
    return m;
}

/// Mean sweep count at each step across non-failed trials.
inline std::vector<double> per_step_mean_iterations(const std::vector<TrialRecord>& records) {
    std::vector<double> sum;
    std::vector<int> count;
    for (const TrialRecord& rec : records) {
        if (rec.failed) continue;
        if (sum.size() < rec.iterations.size()) {
            sum.resize(rec.iterations.size(), 0.0);
            count.resize(rec.iterations.size(), 0);
        }
        for (std::size_t k = 0; k < rec.iterations.size(); ++k) {
            sum[k] += rec.iterations[k];
            ++count[k];
        }
    }
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] /= count[k];
    return sum;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, count) on `threads` workers. Callers write results
/// into per-index slots, so the outcome is independent of scheduling.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
}

inline int default_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

inline std::vector<TrialRecord> run_trials(const ExperimentConfig& cfg, FilterId filter, int threads) {
    std::vector<TrialRecord> records(static_cast<std::size_t>(cfg.n_mc));
    parallel_for(cfg.n_mc, threads, [&](int t) { records[static_cast<std::size_t>(t)] = run_trial(cfg, filter, t); });
    return records;
}

struct SweepRow {
    double sweep_value = 0.0;
    FilterId filter = FilterId::etvbf;
    Metrics metrics;
};

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, int threads = default_threads()) {
    cfg.validate();
    std::vector<SweepRow> rows;
    for (double v : cfg.sweep_grid) {
        const ExperimentConfig point = cfg.with_sweep_value(v);
        for (FilterId f : cfg.filters) {
            rows.push_back(SweepRow{v, f, compute_metrics(run_trials(point, f, threads))});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "sweep_value,filter,rmse,comm_rate,mean_iterations,failures,comm_rate_paper_sqrt\n";
    for (const SweepRow& r : rows) {
        os << format_number(r.sweep_value) << ',' << to_string(r.filter) << ',' << format_number(r.metrics.rmse)
           << ',' << format_number(r.metrics.comm_rate) << ',' << format_number(r.metrics.mean_iterations) << ','
           << r.metrics.failures << ',' << format_number(r.metrics.comm_rate_paper_sqrt) << '\n';
    }
    return os.str();
}

/// Whitespace-separated columns "sweep_value value", one block per filter
/// (separated by blank lines), each block sorted by sweep_value.
inline std::string plot_data(const std::vector<SweepRow>& rows, const std::string& column,
                             double Metrics::*field) {
    std::map<std::string, std::vector<std::pair<double, double>>> blocks;
    std::vector<std::string> order;
    for (const SweepRow& r : rows) {
        const std::string id = to_string(r.filter);
        if (!blocks.contains(id)) order.push_back(id);
        blocks[id].emplace_back(r.sweep_value, r.metrics.*field);
    }
    std::ostringstream os;
    bool first = true;
    for (const std::string& id : order) {
        auto& pts = blocks[id];
        std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        if (!first) os << "\n\n";
        first = false;
        os << "# filter " << id << "\n# sweep_value " << column << '\n';
        for (const auto& [x, v] : pts) os << format_number(x) << ' ' << format_number(v) << '\n';
    }
    return os.str();
}

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace detail

/// Writes <prefix>.csv, the plot-data files for the swept
/// parameter, and <prefix>_manifest.json. Returns the paths written.
inline std::vector<std::string> emit_outputs(const std::vector<SweepRow>& rows, const std::string& prefix,
                                             const ExperimentConfig& cfg) {
    if (rows.empty()) throw std::invalid_argument("emit_outputs: no rows");
    std::vector<std::string> paths;
    auto put = [&](const std::string& path, const std::string& content) {
        detail::write_file(path, content);
        paths.push_back(path);
    };

    put(prefix + ".csv", sweep_csv(rows));
    switch (cfg.sweep_param) {
        case SweepParam::y:
            put(prefix + "_rmse_vs_y.dat", plot_data(rows, "rmse", &Metrics::rmse));
            put(prefix + "_comm_rate_vs_y.dat", plot_data(rows, "comm_rate", &Metrics::comm_rate));
            put(prefix + "_mean_iterations_vs_y.dat",
                plot_data(rows, "mean_iterations", &Metrics::mean_iterations));
            break;
        case SweepParam::r:
            put(prefix + "_rmse_vs_r.dat", plot_data(rows, "rmse", &Metrics::rmse));
            put(prefix + "_comm_rate_vs_r.dat", plot_data(rows, "comm_rate", &Metrics::comm_rate));
            break;
        case SweepParam::rho:
            put(prefix + "_rmse_vs_rho.dat", plot_data(rows, "rmse", &Metrics::rmse));
            break;
    }
    put(prefix + "_manifest.json", to_json(cfg).dump(2) + "\n");
    return paths;
}

}  // namespace etvbf
