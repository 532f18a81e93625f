#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "tsc/dgp.hpp"
#include "tsc/error.hpp"
#include "tsc/estimators.hpp"
#include "tsc/io.hpp"
#include "tsc/random.hpp"
#include "tsc/svg.hpp"

namespace tsc::bench {

enum class GroundTruthMode { Realized, Noiseless };

constexpr std::string_view to_string(GroundTruthMode m) {
    return m == GroundTruthMode::Realized ? "realized" : "noiseless";
}

inline std::optional<GroundTruthMode> parse_ground_truth(std::string_view s) {
    if (s == "realized") return GroundTruthMode::Realized;
    if (s == "noiseless") return GroundTruthMode::Noiseless;
    return std::nullopt;
}

/// Replaceable estimator entry point; tests inject stubs through it.
using EstimatorFn = std::function<EstimatorResult(const EstimatorConfig&, NuisanceCache&)>;

struct BenchPlan {
    std::vector<dgp::Config> dgp_grid;
    std::vector<EstimatorConfig> estimators;
    std::vector<Index> horizons{1, 5, 10};
    int n_seeds = 5;
    GroundTruthMode ground_truth_mode = GroundTruthMode::Realized;
    int workers = 1;
    EstimatorFn estimator_fn;  // defaults to estimate()
};

/// The four generators with their default sizes, every estimator, horizons 1/5/10.
inline BenchPlan default_plan(OutcomeType outcome, std::uint64_t seed) {
    BenchPlan plan;
    for (dgp::Kind k : dgp::kAllKinds) {
        dgp::Config c;
        c.kind = k;
        c.outcome = outcome;
        c.seed = derive_seed(seed, dgp::to_string(k));
        plan.dgp_grid.push_back(c);
    }
    for (EstimatorKind k : kAllEstimators) {
        EstimatorConfig e;
        e.kind = k;
        e.regressor.seed = seed;
        plan.estimators.push_back(e);
    }
    return plan;
}

inline std::string dgp_label(const dgp::Config& c) {
    std::string s(dgp::to_string(c.kind));
    if (c.outcome == OutcomeType::Binary) s += "_binary";
    return s;
}

inline double rmse(const Eigen::VectorXd& estimates, const Eigen::VectorXd& truths) {
    require(estimates.size() == truths.size(), ErrorCode::LengthMismatch, "rmse needs equal lengths");
    require(estimates.size() > 0, ErrorCode::Empty, "rmse of an empty vector");
    return std::sqrt((estimates - truths).squaredNorm() / static_cast<double>(estimates.size()));
}

struct ViolationRate {
    double upper_pct = 0.0;
    double lower_pct = 0.0;
    long upper = 0;
    long lower = 0;
    long total = 0;
};

inline ViolationRate count_violations(const std::vector<double>& psi, const Bounds& b) {
    ViolationRate v;
    for (double x : psi) {
        ++v.total;
        if (x > b.upper) ++v.upper;
        if (x < b.lower) ++v.lower;
    }
    if (v.total > 0) {
        v.upper_pct = 100.0 * static_cast<double>(v.upper) / static_cast<double>(v.total);
        v.lower_pct = 100.0 * static_cast<double>(v.lower) / static_cast<double>(v.total);
    }
    return v;
}

/// Shares of per-horizon estimates above b and below a, in percent.
inline std::pair<double, double> violation_rate(const std::vector<EstimatorResult>& results, const Bounds& b) {
    std::vector<double> psi;
    for (const auto& r : results)
        for (const auto& h : r.horizons) psi.push_back(h.psi_hat);
    require(!psi.empty(), ErrorCode::Empty, "no estimates to score");
    const auto v = count_violations(psi, b);
    return {v.upper_pct, v.lower_pct};
}

struct RmseCell {
    std::string dgp;
    Index horizon = 0;
    EstimatorKind estimator = EstimatorKind::Tsc;
    std::vector<std::optional<double>> runs;  // one slot per seed
    double mean = std::numeric_limits<double>::quiet_NaN();
    double stderr_ = std::numeric_limits<double>::quiet_NaN();
    int n = 0;
    int n_missing = 0;
    bool single_sample = false;  // stderr reported as 0
};

struct ViolationCell {
    std::string dgp;
    EstimatorKind estimator = EstimatorKind::Tsc;
    ViolationRate rate;
};

struct WeightSnapshot {
    std::string run;  // "<dgp>_run<k>"
    Index horizon = 0;
    std::vector<std::string> control_ids;
    Eigen::VectorXd initial;
    Eigen::VectorXd targeted;
    double epsilon_hat = 0.0;
    bool root_found = false;
};

struct Trajectory {
    std::string run;
    Index t0 = 0;
    Eigen::VectorXd treated;   // observed
    Eigen::VectorXd truth;     // selected ground truth
    Eigen::MatrixXd controls;  // rows: controls
    std::vector<std::pair<EstimatorKind, Eigen::VectorXd>> counterfactuals;  // NaN before t0
};

struct Failure {
    std::string dgp;
    int run = 0;
    Index horizon = 0;
    std::optional<EstimatorKind> estimator;  // empty when generation failed
    std::string message;
};

struct BenchReport {
    std::vector<RmseCell> rmse_table;
    std::vector<ViolationCell> violation_table;
    std::vector<WeightSnapshot> weight_snapshots;
    std::vector<Trajectory> trajectories;
    std::vector<Failure> failures;
    std::vector<std::string> warnings;
    /// Every psi_hat, per (dgp, estimator), in (run, horizon setting, step) order.
    std::vector<std::pair<std::string, std::pair<EstimatorKind, std::vector<double>>>> psi_values;
};

inline void check(const BenchPlan& plan) {
    require(plan.n_seeds >= 1, ErrorCode::InvalidConfig, "n_seeds must be at least 1");
    require(!plan.horizons.empty(), ErrorCode::InvalidConfig, "horizons must be nonempty");
    require(!plan.dgp_grid.empty(), ErrorCode::InvalidConfig, "dgp_grid must be nonempty");
    require(!plan.estimators.empty(), ErrorCode::InvalidConfig, "estimators must be nonempty");
    require(plan.workers >= 1, ErrorCode::InvalidConfig, "workers must be at least 1");
    for (Index h : plan.horizons) require(h >= 1, ErrorCode::InvalidConfig, "horizons must be positive");
    for (const auto& c : plan.dgp_grid) {
        dgp::check(c);
        for (Index h : plan.horizons)
            require(h < c.periods(), ErrorCode::InvalidConfig,
                    "horizon " + std::to_string(h) + " leaves no pre-treatment period for T=" +
                        std::to_string(c.periods()));
    }
}

namespace detail {

/// Data seed for run k of a generator.
inline std::uint64_t run_seed(const dgp::Config& c, int run) {
    return derive_seed(c.seed, static_cast<std::uint64_t>(run));
}

struct EstimatorOutcome {
    std::optional<double> rmse;
    std::vector<double> psi;
    std::optional<std::string> error;
};

struct JobResult {
    // [horizon index][estimator index]
    std::vector<std::vector<EstimatorOutcome>> cells;
    std::optional<std::string> generation_error;
    std::optional<WeightSnapshot> snapshot;
    std::optional<Trajectory> trajectory;
    std::vector<std::string> warnings;
};

inline JobResult run_job(const BenchPlan& plan, const dgp::Config& base, int run) {
    JobResult out;
    out.cells.assign(plan.horizons.size(), std::vector<EstimatorOutcome>(plan.estimators.size()));
    const std::string label = dgp_label(base) + "_run" + std::to_string(run + 1);

    dgp::Config cfg = base;
    cfg.seed = run_seed(base, run);
    const Index periods = cfg.periods();
    dgp::Simulation sim;
    try {
        sim = dgp::generate(cfg, periods - plan.horizons.front());
    } catch (const Error& e) {
        out.generation_error = e.what();
        return out;
    }
    const PanelDataset& panel = sim.panel;
    const Eigen::VectorXd truth = plan.ground_truth_mode == GroundTruthMode::Realized
                                      ? panel.ground_truth->realized_untreated
                                      : panel.ground_truth->noiseless_mean;
    const EstimatorFn& fn = plan.estimator_fn ? plan.estimator_fn : EstimatorFn(
        [](const EstimatorConfig& c, NuisanceCache& cache) { return estimate(c, cache); });

    std::size_t longest = 0;
    for (std::size_t hi = 1; hi < plan.horizons.size(); ++hi)
        if (plan.horizons[hi] > plan.horizons[longest]) longest = hi;
    std::size_t shortest = 0;
    for (std::size_t hi = 1; hi < plan.horizons.size(); ++hi)
        if (plan.horizons[hi] < plan.horizons[shortest]) shortest = hi;

    for (std::size_t hi = 0; hi < plan.horizons.size(); ++hi) {
        const Index h = plan.horizons[hi];
        const Index t0 = periods - h;
        std::optional<NuisanceCache> cache;
        try {
            cache.emplace(panel.with_t0(t0));
        } catch (const Error& e) {
            for (auto& cell : out.cells[hi]) cell.error = e.what();
            continue;
        }
        const Eigen::VectorXd target = truth.segment(t0, h);

        if (hi == longest) {
            Trajectory tr;
            tr.run = label;
            tr.t0 = t0;
            tr.treated = panel.outcomes.row(panel.treated_index).transpose();
            tr.truth = truth;
            tr.controls.resize(panel.n_controls(), periods);
            const auto ctrl = panel.control_indices();
            for (std::size_t j = 0; j < ctrl.size(); ++j) tr.controls.row(static_cast<Index>(j)) = panel.outcomes.row(ctrl[j]);
            out.trajectory = std::move(tr);
        }

        for (std::size_t ei = 0; ei < plan.estimators.size(); ++ei) {
            EstimatorConfig ec = plan.estimators[ei];
            ec.regressor.seed = derive_seed(ec.regressor.seed, cfg.seed);
            ec.horizons.clear();
            for (Index s = 1; s <= h; ++s) ec.horizons.push_back(s);
            EstimatorOutcome& cell = out.cells[hi][ei];
            try {
                const EstimatorResult res = fn(ec, *cache);
                require(static_cast<Index>(res.horizons.size()) == h, ErrorCode::LengthMismatch,
                        "estimator returned " + std::to_string(res.horizons.size()) + " horizons, expected " +
                            std::to_string(h));
                Eigen::VectorXd psi(h);
                for (Index s = 0; s < h; ++s) psi(s) = res.horizons[static_cast<std::size_t>(s)].psi_hat;
                require(psi.allFinite(), ErrorCode::NonFiniteInput, "non-finite counterfactual");
                cell.rmse = rmse(psi, target);
                cell.psi.assign(psi.data(), psi.data() + psi.size());
                for (const auto& w : res.warnings)
                    out.warnings.push_back(label + " h=" + std::to_string(h) + " " +
                                           std::string(to_string(ec.kind)) + ": " + w);

                if (hi == shortest && ec.kind == EstimatorKind::Tsc && !out.snapshot && !res.horizons.empty()) {
                    const HorizonEstimate& first = res.horizons.front();
                    if (first.initial_weights && first.weights_used) {
                        WeightSnapshot ws;
                        ws.run = label;
                        ws.horizon = h;
                        for (Index c : panel.control_indices()) ws.control_ids.push_back(panel.unit_ids[static_cast<std::size_t>(c)]);
                        ws.initial = first.initial_weights->vector();
                        ws.targeted = first.weights_used->vector();
                        if (first.targeting) {
                            ws.epsilon_hat = first.targeting->epsilon_hat;
                            ws.root_found = first.targeting->root_found;
                        }
                        out.snapshot = std::move(ws);
                    }
                }
                if (hi == longest && out.trajectory) {
                    Eigen::VectorXd path = Eigen::VectorXd::Constant(periods, std::numeric_limits<double>::quiet_NaN());
                    path.segment(t0, h) = psi;
                    out.trajectory->counterfactuals.emplace_back(ec.kind, std::move(path));
                }
            } catch (const Error& e) {
                cell.error = e.what();
            }
        }
    }
    return out;
}

inline void summarize(RmseCell& cell) {
    std::vector<double> xs;
    for (const auto& r : cell.runs)
        if (r) xs.push_back(*r);
    cell.n = static_cast<int>(xs.size());
    cell.n_missing = static_cast<int>(cell.runs.size()) - cell.n;
    if (xs.empty()) return;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    cell.mean = mean;
    if (xs.size() == 1) {
        cell.stderr_ = 0.0;
        cell.single_sample = true;
        return;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    cell.stderr_ = sd / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace detail

/// Runs every (generator, seed) job, possibly on several threads, and reduces
/// the results in a fixed order so the report does not depend on scheduling.
inline BenchReport run_bench(const BenchPlan& plan) {
    check(plan);
    const std::size_t n_dgp = plan.dgp_grid.size();
    const std::size_t n_jobs = n_dgp * static_cast<std::size_t>(plan.n_seeds);
    std::vector<detail::JobResult> jobs(n_jobs);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < n_jobs;) {
            const std::size_t g = j / static_cast<std::size_t>(plan.n_seeds);
            const int run = static_cast<int>(j % static_cast<std::size_t>(plan.n_seeds));
            jobs[j] = detail::run_job(plan, plan.dgp_grid[g], run);
        }
    };
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(plan.workers), n_jobs);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    BenchReport report;
    for (std::size_t g = 0; g < n_dgp; ++g) {
        const std::string label = dgp_label(plan.dgp_grid[g]);
        for (std::size_t hi = 0; hi < plan.horizons.size(); ++hi) {
            for (std::size_t ei = 0; ei < plan.estimators.size(); ++ei) {
                RmseCell cell;
                cell.dgp = label;
                cell.horizon = plan.horizons[hi];
                cell.estimator = plan.estimators[ei].kind;
                for (int run = 0; run < plan.n_seeds; ++run) {
                    const auto& job = jobs[g * static_cast<std::size_t>(plan.n_seeds) + static_cast<std::size_t>(run)];
                    if (job.generation_error) {
                        cell.runs.push_back(std::nullopt);
                        if (ei == 0)
                            report.failures.push_back({label, run + 1, cell.horizon, std::nullopt, *job.generation_error});
                        continue;
                    }
                    const auto& out = job.cells[hi][ei];
                    cell.runs.push_back(out.rmse);
                    if (out.error) report.failures.push_back({label, run + 1, cell.horizon, cell.estimator, *out.error});
                }
                detail::summarize(cell);
                report.rmse_table.push_back(std::move(cell));
            }
        }

        const Bounds unit{0.0, 1.0};
        for (std::size_t ei = 0; ei < plan.estimators.size(); ++ei) {
            std::vector<double> psi;
            for (int run = 0; run < plan.n_seeds; ++run) {
                const auto& job = jobs[g * static_cast<std::size_t>(plan.n_seeds) + static_cast<std::size_t>(run)];
                if (job.generation_error) continue;
                for (std::size_t hi = 0; hi < plan.horizons.size(); ++hi) {
                    const auto& v = job.cells[hi][ei].psi;
                    psi.insert(psi.end(), v.begin(), v.end());
                }
            }
            // Binary panels are scored against the probability range; continuous
            // panels have no fixed range, so only binary cells enter the table.
            if (plan.dgp_grid[g].outcome == OutcomeType::Binary)
                report.violation_table.push_back({label, plan.estimators[ei].kind, count_violations(psi, unit)});
            report.psi_values.push_back({label, {plan.estimators[ei].kind, std::move(psi)}});
        }

        for (int run = 0; run < plan.n_seeds; ++run) {
            auto& job = jobs[g * static_cast<std::size_t>(plan.n_seeds) + static_cast<std::size_t>(run)];
            if (job.snapshot) report.weight_snapshots.push_back(std::move(*job.snapshot));
            if (job.trajectory) report.trajectories.push_back(std::move(*job.trajectory));
            for (auto& w : job.warnings) report.warnings.push_back(std::move(w));
        }
    }
    return report;
}

struct ExportOptions {
    bool svg = true;
};

inline std::string rmse_table_csv(const BenchReport& r) {
    std::string s = "dgp,horizon,estimator,mean_rmse,stderr,n,n_missing,single_sample\n";
    for (const auto& c : r.rmse_table) {
        s += io::csv_escape(c.dgp) + "," + std::to_string(c.horizon) + "," + std::string(to_string(c.estimator)) + ",";
        s += (c.n > 0 ? io::format_double(c.mean) : std::string("NA")) + ",";
        s += (c.n > 0 ? io::format_double(c.stderr_) : std::string("NA")) + ",";
        s += std::to_string(c.n) + "," + std::to_string(c.n_missing) + "," + (c.single_sample ? "1" : "0") + "\n";
    }
    return s;
}

inline std::string rmse_runs_csv(const BenchReport& r) {
    std::string s = "dgp,horizon,estimator,run,rmse\n";
    for (const auto& c : r.rmse_table)
        for (std::size_t k = 0; k < c.runs.size(); ++k)
            s += io::csv_escape(c.dgp) + "," + std::to_string(c.horizon) + "," + std::string(to_string(c.estimator)) +
                 "," + std::to_string(k + 1) + "," + (c.runs[k] ? io::format_double(*c.runs[k]) : std::string("NA")) +
                 "\n";
    return s;
}

inline std::string violations_csv(const BenchReport& r) {
    std::string s = "dgp,estimator,side,percent,count,total\n";
    for (const auto& v : r.violation_table) {
        const std::string head = io::csv_escape(v.dgp) + "," + std::string(to_string(v.estimator)) + ",";
        s += head + "upper," + io::format_double(v.rate.upper_pct) + "," + std::to_string(v.rate.upper) + "," +
             std::to_string(v.rate.total) + "\n";
        s += head + "lower," + io::format_double(v.rate.lower_pct) + "," + std::to_string(v.rate.lower) + "," +
             std::to_string(v.rate.total) + "\n";
    }
    return s;
}

inline std::string weights_csv(const WeightSnapshot& w) {
    std::string s = "control_id,initial_weight,targeted_weight\n";
    for (std::size_t j = 0; j < w.control_ids.size(); ++j)
        s += io::csv_escape(w.control_ids[j]) + "," + io::format_double(w.initial(static_cast<Index>(j))) + "," +
             io::format_double(w.targeted(static_cast<Index>(j))) + "\n";
    return s;
}

inline std::string failures_csv(const BenchReport& r) {
    std::string s = "dgp,run,horizon,estimator,error\n";
    for (const auto& f : r.failures)
        s += io::csv_escape(f.dgp) + "," + std::to_string(f.run) + "," + std::to_string(f.horizon) + "," +
             (f.estimator ? std::string(to_string(*f.estimator)) : std::string("generation")) + "," +
             io::csv_escape(f.message) + "\n";
    return s;
}

inline std::string weights_svg(const WeightSnapshot& w) {
    std::vector<svg::Series> series(2);
    series[0] = {"initial", {w.initial.data(), w.initial.data() + w.initial.size()}, svg::palette()[0]};
    series[1] = {"targeted", {w.targeted.data(), w.targeted.data() + w.targeted.size()}, svg::palette()[1]};
    return svg::bar_chart("Weights " + w.run, w.control_ids, series);
}

inline std::string trajectory_svg(const Trajectory& t, const std::vector<std::string>& control_ids = {}) {
    std::vector<svg::Series> series;
    for (Index j = 0; j < t.controls.rows(); ++j) {
        const Eigen::VectorXd row = t.controls.row(j).transpose();
        std::string name = static_cast<std::size_t>(j) < control_ids.size() ? control_ids[static_cast<std::size_t>(j)]
                                                                            : "control " + std::to_string(j + 1);
        series.push_back({name, {row.data(), row.data() + row.size()}, "#bbbbbb", false, 1.0});
    }
    series.push_back({"treated (observed)", {t.treated.data(), t.treated.data() + t.treated.size()}, "#000000", false, 2.0});
    for (std::size_t k = 0; k < t.counterfactuals.size(); ++k) {
        const auto& [kind, path] = t.counterfactuals[k];
        series.push_back({std::string(to_string(kind)), {path.data(), path.data() + path.size()},
                          svg::palette()[k % svg::palette().size()], true, 2.0});
    }
    return svg::line_chart("Trajectories " + t.run, series, static_cast<int>(t.t0));
}

/// Writes the CSV tables and, unless disabled, the SVG charts. Returns the
/// file names written, in order.
inline std::vector<std::string> export_report(const BenchReport& r, const std::filesystem::path& dir,
                                              const ExportOptions& opt = {}) {
    io::ensure_directory(dir);
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const std::string& text) {
        io::write_text(dir / name, text);
        written.push_back(name);
    };
    put("rmse_table.csv", rmse_table_csv(r));
    put("rmse_runs.csv", rmse_runs_csv(r));
    put("violations.csv", violations_csv(r));
    put("failures.csv", failures_csv(r));
    for (const auto& w : r.weight_snapshots) put("weights_" + w.run + ".csv", weights_csv(w));
    if (opt.svg) {
        for (const auto& w : r.weight_snapshots) put("weights_" + w.run + ".svg", weights_svg(w));
        for (const auto& t : r.trajectories) put("trajectory_" + t.run + ".svg", trajectory_svg(t));
    }
    return written;
}

}  // namespace tsc::bench
