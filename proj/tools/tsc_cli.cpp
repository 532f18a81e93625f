// tsc: simulate panels, fit estimators, run benchmarks, inspect weights.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tsc/config.hpp"
#include "tsc/tsc.hpp"

namespace fs = std::filesystem;
using namespace tsc;

namespace {

struct Common {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<int> workers;
    std::optional<bool> svg;
    std::optional<std::string> ground_truth;
};

struct DataFlags {
    std::optional<std::string> panel;
    std::optional<std::string> schema;
    std::optional<std::string> treated;
    std::optional<std::string> t0;
    bool binary = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON configuration file");
    app->add_option("--seed", c.seed, "Base seed for all randomness");
    app->add_option("--out", c.out, "Output directory");
    app->add_option("--workers", c.workers, "Worker threads (benchmark only)")->check(CLI::PositiveNumber);
    app->add_flag("--svg,!--no-svg", c.svg, "Write SVG charts");
    app->add_option("--ground-truth", c.ground_truth, "realized|noiseless");
}

void add_data(CLI::App* app, DataFlags& d) {
    app->add_option("--panel", d.panel, "Panel CSV");
    app->add_option("--schema", d.schema, "wide|long");
    app->add_option("--treated", d.treated, "Treated unit id (default: first unit)");
    app->add_option("--t0", d.t0, "First post-treatment period label, or number of pre-treatment periods");
    app->add_flag("--binary", d.binary, "Outcomes are binary");
}

config::RunConfig load_config(const Common& c) {
    config::RunConfig rc = c.config ? config::load(*c.config) : config::RunConfig{};
    if (c.seed) rc.seed = *c.seed;
    if (c.workers) rc.bench.workers = *c.workers;
    if (c.svg) rc.svg = *c.svg;
    if (c.ground_truth) {
        auto m = bench::parse_ground_truth(*c.ground_truth);
        if (!m) fail(ErrorCode::ConfigError, "--ground-truth: expected realized or noiseless, got '" + *c.ground_truth + "'");
        rc.bench.ground_truth_mode = *m;
    }
    return rc;
}

PanelDataset load_panel(config::RunConfig& rc, const DataFlags& f) {
    if (f.panel) rc.data.panel = *f.panel;
    if (f.treated) rc.data.treated = *f.treated;
    if (f.t0) rc.data.t0 = *f.t0;
    if (f.binary) rc.data.kind = OutcomeKind::binary();
    if (f.schema) {
        if (*f.schema == "wide") rc.data.schema = CsvSchema::Wide;
        else if (*f.schema == "long") rc.data.schema = CsvSchema::Long;
        else fail(ErrorCode::ConfigError, "--schema: expected wide or long, got '" + *f.schema + "'");
    }
    if (!rc.data.panel) fail(ErrorCode::ConfigError, "no panel given (--panel or data.panel)");
    CsvLoadOptions opt;
    opt.treated = rc.data.treated;
    opt.t0 = rc.data.t0;
    opt.kind = rc.data.kind;
    return load_panel_csv(*rc.data.panel, rc.data.schema, opt);
}

std::string opt_num(const std::optional<double>& v) { return v ? io::format_double(*v) : "NA"; }

std::string result_csv(const EstimatorResult& r, const PanelDataset& d) {
    std::string s = "horizon,period,observed,psi_hat,tau_hat,lower_bound,upper_bound,bounds_violation,plugin_term,"
                    "residual_correction,epsilon_hat,score_at_solution,root_found,clamped\n";
    for (const auto& h : r.horizons) {
        s += std::to_string(h.horizon) + "," + io::csv_escape(d.time_labels[static_cast<std::size_t>(h.period)]) + "," +
             io::format_double(h.observed) + "," + io::format_double(h.psi_hat) + "," + io::format_double(h.tau_hat) +
             "," + io::format_double(h.bounds.lower) + "," + io::format_double(h.bounds.upper) + "," +
             (h.bounds_violation ? "1" : "0") + "," + opt_num(h.plugin_term) + "," + opt_num(h.residual_correction) + ",";
        if (h.targeting)
            s += io::format_double(h.targeting->epsilon_hat) + "," + io::format_double(h.targeting->score_at_solution) +
                 "," + (h.targeting->root_found ? "1" : "0") + "," + (h.targeting->clamped ? "1" : "0");
        else
            s += "NA,NA,NA,NA";
        s += "\n";
    }
    return s;
}

std::vector<std::string> control_ids(const PanelDataset& d) {
    std::vector<std::string> ids;
    for (Index c : d.control_indices()) ids.push_back(d.unit_ids[static_cast<std::size_t>(c)]);
    return ids;
}

/// Per-horizon weights; TSC also carries the shared initial weights.
std::string weights_csv(const EstimatorResult& r, const PanelDataset& d) {
    const auto ids = control_ids(d);
    const bool tsc = r.kind == EstimatorKind::Tsc;
    std::string s = tsc ? "horizon,control_id,initial_weight,targeted_weight\n" : "horizon,control_id,weight\n";
    for (const auto& h : r.horizons) {
        if (!h.weights_used) continue;
        for (std::size_t j = 0; j < ids.size(); ++j) {
            s += std::to_string(h.horizon) + "," + io::csv_escape(ids[j]) + ",";
            if (tsc) s += io::format_double((*h.initial_weights)[static_cast<Index>(j)]) + ",";
            s += io::format_double((*h.weights_used)[static_cast<Index>(j)]) + "\n";
        }
    }
    return s;
}

std::string fmt(double v) { return io::format_short(v); }

void print_result(std::ostream& os, const EstimatorResult& r, const PanelDataset& d) {
    os << to_string(r.kind);
    if (r.pretreatment_fit) os << "  pre-treatment fit " << fmt(*r.pretreatment_fit);
    os << "\n";
    for (const auto& h : r.horizons) {
        os << "  h=" << h.horizon << " period " << d.time_labels[static_cast<std::size_t>(h.period)] << "  psi "
           << fmt(h.psi_hat) << "  tau " << fmt(h.tau_hat) << "  observed " << fmt(h.observed);
        if (h.bounds_violation) os << "  OUT OF [" << fmt(h.bounds.lower) << ", " << fmt(h.bounds.upper) << "]";
        if (h.targeting)
            os << "  eps " << fmt(h.targeting->epsilon_hat) << "  f " << fmt(h.targeting->score_at_solution)
               << (h.targeting->root_found ? "  root_found" : "  no root") << (h.targeting->clamped ? "  clamped" : "");
        os << "\n";
    }
    for (const auto& w : r.warnings) os << "  warning: " << w << "\n";
}

int cmd_simulate(const Common& c, const std::optional<std::string>& dgp_name, const std::optional<int>& periods,
                 const std::optional<Index>& t0_flag, bool binary) {
    config::RunConfig rc = load_config(c);
    dgp::Config cfg = rc.dgp;
    if (dgp_name) {
        auto k = dgp::parse_kind(*dgp_name);
        if (!k) fail(ErrorCode::ConfigError, "dgp.kind: unknown dgp kind '" + *dgp_name + "'");
        cfg.kind = *k;
    }
    if (periods) cfg.horizon_T = *periods;
    if (binary) cfg.outcome = OutcomeType::Binary;
    cfg.seed = derive_seed(rc.seed, dgp::to_string(cfg.kind));
    const Index t0 = t0_flag ? *t0_flag : rc.t0.value_or(cfg.periods() - 1);
    const dgp::Simulation sim = dgp::generate(cfg, t0);
    const PanelDataset& d = sim.panel;

    const fs::path out = c.out;
    io::ensure_directory(out);
    write_panel_csv(d, out / "panel.csv", CsvSchema::Wide);

    std::string truth = "time,realized_untreated,noiseless_mean";
    if (sim.probabilities) truth += ",probability";
    truth += "\n";
    for (Index s = 0; s < d.n_periods(); ++s) {
        truth += d.time_labels[static_cast<std::size_t>(s)] + "," + io::format_double(d.ground_truth->realized_untreated(s)) +
                 "," + io::format_double(d.ground_truth->noiseless_mean(s));
        if (sim.probabilities) truth += "," + io::format_double((*sim.probabilities)(d.treated_index, s));
        truth += "\n";
    }
    io::write_text(out / "truth.csv", truth);

    config::Json meta;
    meta["tool"] = "tsc";
    meta["version"] = kVersion;
    meta["seed"] = rc.seed;
    meta["dgp"] = config::to_json(cfg);
    meta["treated"] = d.unit_ids[static_cast<std::size_t>(d.treated_index)];
    meta["t0"] = t0;
    meta["first_post_period"] = d.time_labels[static_cast<std::size_t>(t0)];
    meta["schema"] = "wide";
    io::write_text(out / "meta.json", meta.dump(2) + "\n");

    std::cout << "simulated " << dgp::to_string(cfg.kind) << (binary || cfg.outcome == OutcomeType::Binary ? " (binary)" : "")
              << ": " << d.n_units() << " units x " << d.n_periods() << " periods, t0 = " << t0 << " -> "
              << out.string() << "\n";
    return 0;
}

std::vector<EstimatorKind> selected_estimators(const config::RunConfig& rc, const std::optional<std::string>& name) {
    if (name) {
        if (*name == "all") return {std::begin(kAllEstimators), std::end(kAllEstimators)};
        auto k = parse_estimator(*name);
        if (!k) fail(ErrorCode::ConfigError, "--estimator: unknown estimator '" + *name + "'");
        return {*k};
    }
    if (!rc.estimators.empty()) return rc.estimators;
    return {std::begin(kAllEstimators), std::end(kAllEstimators)};
}

int cmd_fit(const Common& c, const DataFlags& df, const std::optional<std::string>& estimator) {
    config::RunConfig rc = load_config(c);
    const PanelDataset panel = load_panel(rc, df);
    NuisanceCache cache(panel);
    const PanelDataset& d = cache.dataset();
    const fs::path out = c.out;
    io::ensure_directory(out);

    std::vector<EstimatorResult> results;
    std::string summary;
    for (EstimatorKind k : selected_estimators(rc, estimator)) {
        EstimatorConfig ec = rc.estimator;
        ec.kind = k;
        ec.regressor.seed = rc.seed;
        EstimatorResult r = estimate(ec, cache);
        const std::string name(to_string(k));
        io::write_text(out / ("result_" + name + ".csv"), result_csv(r, d));
        if (k != EstimatorKind::PlugIn) io::write_text(out / ("weights_" + name + ".csv"), weights_csv(r, d));
        std::ostringstream os;
        print_result(os, r, d);
        summary += os.str();
        results.push_back(std::move(r));
    }

    // Counterfactual trajectory: observed treated path plus each estimate after t0.
    std::string traj = "period,observed";
    for (const auto& r : results) traj += "," + std::string(to_string(r.kind));
    traj += "\n";
    for (Index s = 0; s < d.n_periods(); ++s) {
        traj += io::csv_escape(d.time_labels[static_cast<std::size_t>(s)]) + "," +
                io::format_double(d.outcomes(d.treated_index, s));
        for (const auto& r : results) {
            std::string cell = "NA";
            for (const auto& h : r.horizons)
                if (h.period == s) cell = io::format_double(h.psi_hat);
            traj += "," + cell;
        }
        traj += "\n";
    }
    io::write_text(out / "trajectory.csv", traj);

    std::string header = "panel " + *rc.data.panel + ": " + std::to_string(d.n_units()) + " units, " +
                         std::to_string(d.n_periods()) + " periods, treated " +
                         d.unit_ids[static_cast<std::size_t>(d.treated_index)] + ", first post period " +
                         d.time_labels[static_cast<std::size_t>(d.t0)] + "\n";
    io::write_text(out / "summary.txt", header + summary);
    std::cout << header << summary;

    if (rc.svg) {
        bench::Trajectory t;
        t.run = d.unit_ids[static_cast<std::size_t>(d.treated_index)];
        t.t0 = d.t0;
        t.treated = d.outcomes.row(d.treated_index).transpose();
        t.controls.resize(d.n_controls(), d.n_periods());
        const auto ctrl = d.control_indices();
        for (std::size_t j = 0; j < ctrl.size(); ++j) t.controls.row(static_cast<Index>(j)) = d.outcomes.row(ctrl[j]);
        for (const auto& r : results) {
            Eigen::VectorXd path = Eigen::VectorXd::Constant(d.n_periods(), std::nan(""));
            for (const auto& h : r.horizons) path(h.period) = h.psi_hat;
            t.counterfactuals.emplace_back(r.kind, std::move(path));
        }
        io::write_text(out / "trajectory.svg", bench::trajectory_svg(t, control_ids(d)));
    }
    return 0;
}

int cmd_weights(const Common& c, const DataFlags& df, Index horizon) {
    config::RunConfig rc = load_config(c);
    const PanelDataset panel = load_panel(rc, df);
    EstimatorConfig ec = rc.estimator;
    ec.kind = EstimatorKind::Tsc;
    ec.regressor.seed = rc.seed;
    ec.horizons = {horizon};
    NuisanceCache cache(panel);
    const PanelDataset& d = cache.dataset();
    const EstimatorResult r = estimate(ec, cache);
    const HorizonEstimate& h = r.horizons.front();

    bench::WeightSnapshot ws;
    ws.run = d.unit_ids[static_cast<std::size_t>(d.treated_index)] + "_h" + std::to_string(horizon);
    ws.horizon = horizon;
    ws.control_ids = control_ids(d);
    ws.initial = h.initial_weights->vector();
    ws.targeted = h.weights_used->vector();
    ws.epsilon_hat = h.targeting->epsilon_hat;
    ws.root_found = h.targeting->root_found;

    const fs::path out = c.out;
    io::ensure_directory(out);
    io::write_text(out / "weights.csv", bench::weights_csv(ws));
    const auto& t = *h.targeting;
    io::write_text(out / "diagnostics.csv",
                   "horizon,epsilon_hat,score_at_solution,root_found,clamped,eps_max,iterations\n" +
                       std::to_string(horizon) + "," + io::format_double(t.epsilon_hat) + "," +
                       io::format_double(t.score_at_solution) + "," + (t.root_found ? "1" : "0") + "," +
                       (t.clamped ? "1" : "0") + "," + io::format_double(t.eps_max) + "," +
                       std::to_string(t.iterations) + "\n");
    if (rc.svg) io::write_text(out / "weights.svg", bench::weights_svg(ws));

    std::cout << "control            initial    targeted\n";
    for (std::size_t j = 0; j < ws.control_ids.size(); ++j) {
        std::string id = ws.control_ids[j];
        id.resize(std::max<std::size_t>(id.size(), 16), ' ');
        std::cout << id << "  " << fmt(ws.initial(static_cast<Index>(j))) << "  " << fmt(ws.targeted(static_cast<Index>(j)))
                  << "\n";
    }
    std::cout << "epsilon_hat " << fmt(t.epsilon_hat) << "  f " << fmt(t.score_at_solution)
              << "  root_found=" << (t.root_found ? "true" : "false") << "  clamped=" << (t.clamped ? "true" : "false")
              << "\n";
    return 0;
}

int cmd_benchmark(const Common& c, const std::optional<int>& seeds, bool binary) {
    config::RunConfig rc = load_config(c);
    if (seeds) rc.bench.n_seeds = *seeds;
    if (binary) {
        rc.bench_outcome = OutcomeType::Binary;
        for (auto& g : rc.bench_dgp_overrides) g.outcome = OutcomeType::Binary;
    }
    const bench::BenchPlan plan = config::make_plan(rc);
    const bench::BenchReport report = bench::run_bench(plan);

    const fs::path out = c.out;
    bench::export_report(report, out, {rc.svg});
    io::write_text(out / "manifest.json", config::manifest(plan, rc.seed, kVersion).dump(2) + "\n");

    std::cout << "dgp                  h  estimator       mean RMSE   stderr   n\n";
    for (const auto& cell : report.rmse_table) {
        std::string dgp = cell.dgp, est(to_string(cell.estimator));
        dgp.resize(std::max<std::size_t>(dgp.size(), 19), ' ');
        est.resize(std::max<std::size_t>(est.size(), 14), ' ');
        std::string h = std::to_string(cell.horizon);
        h.insert(0, h.size() < 2 ? 2 - h.size() : 0, ' ');
        std::cout << dgp << " " << h << "  " << est << "  " << (cell.n ? fmt(cell.mean) : "NA") << "  "
                  << (cell.n ? fmt(cell.stderr_) : "NA") << "  " << cell.n
                  << (cell.n_missing ? "  (" + std::to_string(cell.n_missing) + " missing)" : "") << "\n";
    }
    if (!report.violation_table.empty()) {
        std::cout << "\nout-of-[0,1] counterfactuals (upper / lower, percent)\n";
        for (const auto& v : report.violation_table)
            std::cout << v.dgp << "  " << to_string(v.estimator) << "  " << fmt(v.rate.upper_pct) << " / "
                      << fmt(v.rate.lower_pct) << "  of " << v.rate.total << "\n";
    }
    if (!report.failures.empty()) std::cout << "\n" << report.failures.size() << " failed cells, see failures.csv\n";
    std::cout << "reports written to " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Targeted synthetic control estimators and benchmarks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common c_sim, c_fit, c_bench, c_w;
    DataFlags d_fit, d_w;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic panel with ground truth");
    add_common(sim, c_sim);
    std::optional<std::string> dgp_name;
    std::optional<int> periods;
    std::optional<Index> sim_t0;
    bool sim_binary = false;
    sim->add_option("--dgp", dgp_name, "linear|hinge|quadratic|time_varying");
    sim->add_option("--T", periods, "Number of periods");
    sim->add_option("--t0", sim_t0, "Number of pre-treatment periods (default T-1)");
    sim->add_flag("--binary", sim_binary, "Binarize outcomes");

    auto* fit = app.add_subcommand("fit", "Fit estimators on a panel CSV");
    add_common(fit, c_fit);
    add_data(fit, d_fit);
    std::optional<std::string> estimator;
    fit->add_option("--estimator", estimator, "classical_sc|plugin|augmented_sc|tsc|all (default all)");

    auto* bench_cmd = app.add_subcommand("benchmark", "Run the simulation benchmark");
    add_common(bench_cmd, c_bench);
    std::optional<int> seeds;
    bool bench_binary = false;
    bench_cmd->add_option("--seeds", seeds, "Runs per generator")->check(CLI::PositiveNumber);
    bench_cmd->add_flag("--binary", bench_binary, "Binary outcomes");

    auto* w = app.add_subcommand("weights", "Compare initial and targeted weights");
    add_common(w, c_w);
    add_data(w, d_w);
    Index horizon = 1;
    w->add_option("--horizon", horizon, "Post-treatment step")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ErrorFamily::Config);
    }

    try {
        if (*sim) return cmd_simulate(c_sim, dgp_name, periods, sim_t0, sim_binary);
        if (*fit) return cmd_fit(c_fit, d_fit, estimator);
        if (*bench_cmd) return cmd_benchmark(c_bench, seeds, bench_binary);
        if (*w) return cmd_weights(c_w, d_w, horizon);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.family());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorFamily::Io);
    }
    return 0;
}
