#pragma once

// JSON run configuration. Requires nlohmann/json (json.hpp) on the include path.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "tsc/bench.hpp"
#include "tsc/dgp.hpp"
#include "tsc/error.hpp"
#include "tsc/estimators.hpp"
#include "tsc/io.hpp"
#include "tsc/panel_csv.hpp"

namespace tsc::config {

using Json = nlohmann::json;

struct DataSection {
    std::optional<std::string> panel;
    CsvSchema schema = CsvSchema::Wide;
    std::optional<std::string> treated;
    std::optional<std::string> t0;
    OutcomeKind kind;
};

struct RunConfig {
    std::uint64_t seed = 0;
    dgp::Config dgp;
    std::optional<Index> t0;  // simulate: pre-treatment periods; T-1 when absent
    EstimatorConfig estimator;
    std::vector<EstimatorKind> estimators;  // fit: empty means all four
    bench::BenchPlan bench;
    std::vector<dgp::Kind> bench_dgps{std::begin(dgp::kAllKinds), std::end(dgp::kAllKinds)};
    std::vector<dgp::Config> bench_dgp_overrides;  // explicit generator objects, when given
    std::vector<EstimatorKind> bench_estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
    OutcomeType bench_outcome = OutcomeType::Continuous;
    DataSection data;
    bool svg = true;
};

namespace detail {

[[noreturn]] inline void bad(const std::string& key, const std::string& why) {
    fail(ErrorCode::ConfigError, "config key '" + key + "': " + why);
}

inline void allow_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) bad(where, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) bad(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
    }
}

inline std::string path(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

inline double number(const Json& v, const std::string& key) {
    if (!v.is_number()) bad(key, "expected a number");
    return v.get<double>();
}

inline std::int64_t integer(const Json& v, const std::string& key) {
    if (!v.is_number_integer()) bad(key, "expected an integer");
    return v.get<std::int64_t>();
}

inline std::uint64_t unsigned_integer(const Json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    const auto x = integer(v, key);
    if (x < 0) bad(key, "expected a nonnegative integer");
    return static_cast<std::uint64_t>(x);
}

inline bool boolean(const Json& v, const std::string& key) {
    if (!v.is_boolean()) bad(key, "expected true or false");
    return v.get<bool>();
}

inline std::string text(const Json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    bad(key, "expected a string");
}

inline Bounds bounds(const Json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 2) bad(key, "expected [lower, upper]");
    Bounds b{number(v[0], key), number(v[1], key)};
    if (!(b.lower < b.upper)) bad(key, "lower must be below upper");
    return b;
}

inline OutcomeType outcome(const Json& v, const std::string& key) {
    const auto s = text(v, key);
    if (s == "continuous") return OutcomeType::Continuous;
    if (s == "binary") return OutcomeType::Binary;
    bad(key, "unknown outcome type '" + s + "'");
}

inline dgp::Kind dgp_kind(const Json& v, const std::string& key) {
    const auto s = text(v, key);
    auto k = dgp::parse_kind(s);
    if (!k) bad(key, "unknown dgp kind '" + s + "'");
    return *k;
}

inline EstimatorKind estimator_kind(const Json& v, const std::string& key) {
    const auto s = text(v, key);
    auto k = parse_estimator(s);
    if (!k) bad(key, "unknown estimator '" + s + "'");
    return *k;
}

inline void read_dgp(const Json& j, const std::string& where, dgp::Config& c) {
    allow_keys(j, where, {"kind", "n_units", "T", "p", "covariate_range", "outcome", "noise_sd", "seed"});
    if (j.contains("kind")) c.kind = dgp_kind(j["kind"], path(where, "kind"));
    if (j.contains("n_units")) c.n_units = static_cast<int>(integer(j["n_units"], path(where, "n_units")));
    if (j.contains("T")) c.horizon_T = static_cast<int>(integer(j["T"], path(where, "T")));
    if (j.contains("p")) c.p = static_cast<int>(integer(j["p"], path(where, "p")));
    if (j.contains("covariate_range")) c.covariate_range = bounds(j["covariate_range"], path(where, "covariate_range"));
    if (j.contains("outcome")) c.outcome = outcome(j["outcome"], path(where, "outcome"));
    if (j.contains("noise_sd")) c.noise_sd = number(j["noise_sd"], path(where, "noise_sd"));
    if (j.contains("seed")) c.seed = unsigned_integer(j["seed"], path(where, "seed"));
}

inline void read_match(const Json& j, const std::string& where, MatchConfig& m) {
    allow_keys(j, where, {"importance", "ridge_lambda", "max_iters", "tol", "step_rule", "step"});
    if (j.contains("importance")) {
        const auto& v = j["importance"];
        if (!v.is_array()) bad(path(where, "importance"), "expected an array of numbers");
        Eigen::VectorXd d(static_cast<Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) d(static_cast<Index>(i)) = number(v[i], path(where, "importance"));
        m.importance = d;
    }
    if (j.contains("ridge_lambda")) m.ridge_lambda = number(j["ridge_lambda"], path(where, "ridge_lambda"));
    if (j.contains("max_iters")) m.max_iters = static_cast<int>(integer(j["max_iters"], path(where, "max_iters")));
    if (j.contains("tol")) m.tol = number(j["tol"], path(where, "tol"));
    if (j.contains("step_rule")) {
        const auto s = text(j["step_rule"], path(where, "step_rule"));
        if (s == "inverse_lipschitz") m.step_rule = StepRule::InverseLipschitz;
        else if (s == "fixed") m.step_rule = StepRule::Fixed;
        else if (s == "line_search") m.step_rule = StepRule::LineSearch;
        else bad(path(where, "step_rule"), "unknown step rule '" + s + "'");
    }
    if (j.contains("step")) m.step = number(j["step"], path(where, "step"));
}

inline void read_regressor(const Json& j, const std::string& where, RegressorSpec& r) {
    allow_keys(j, where, {"type", "ridge", "hidden_units", "learning_rate", "steps", "standardize_inputs"});
    std::string type = r.is_mlp() ? "mlp" : "linear";
    if (j.contains("type")) type = text(j["type"], path(where, "type"));
    if (type == "mlp") {
        MlpSpec m = r.is_mlp() ? std::get<MlpSpec>(r.kind) : MlpSpec{};
        if (!r.is_mlp()) r.standardize_inputs = true;
        if (j.contains("ridge")) bad(path(where, "ridge"), "only valid for type linear");
        if (j.contains("hidden_units")) m.hidden_units = static_cast<int>(integer(j["hidden_units"], path(where, "hidden_units")));
        if (j.contains("learning_rate")) m.learning_rate = number(j["learning_rate"], path(where, "learning_rate"));
        if (j.contains("steps")) m.steps = static_cast<int>(integer(j["steps"], path(where, "steps")));
        r.kind = m;
    } else if (type == "linear") {
        LinearSpec l = r.is_mlp() ? LinearSpec{} : std::get<LinearSpec>(r.kind);
        if (r.is_mlp()) r.standardize_inputs = false;
        for (const char* k : {"hidden_units", "learning_rate", "steps"})
            if (j.contains(k)) bad(path(where, k), "only valid for type mlp");
        if (j.contains("ridge")) l.ridge = number(j["ridge"], path(where, "ridge"));
        r.kind = l;
    } else {
        bad(path(where, "type"), "unknown regressor type '" + type + "'");
    }
    if (j.contains("standardize_inputs"))
        r.standardize_inputs = boolean(j["standardize_inputs"], path(where, "standardize_inputs"));
}

inline void read_targeting(const Json& j, const std::string& where, TargetingConfig& t) {
    allow_keys(j, where, {"mode", "method", "eta", "max_iters", "tol", "eps_max"});
    if (j.contains("mode")) {
        const auto s = text(j["mode"], path(where, "mode"));
        if (s == "residual_score") t.mode = TiltMode::ResidualScore;
        else if (s == "centered_prediction") t.mode = TiltMode::CenteredPrediction;
        else bad(path(where, "mode"), "unknown tilt mode '" + s + "'");
    }
    if (j.contains("method")) {
        const auto s = text(j["method"], path(where, "method"));
        if (s == "newton") t.method = EpsilonMethod::Newton;
        else if (s == "bisection") t.method = EpsilonMethod::Bisection;
        else if (s == "gradient_descent") t.method = EpsilonMethod::GradientDescent;
        else bad(path(where, "method"), "unknown method '" + s + "'");
    }
    if (j.contains("eta")) t.eta = number(j["eta"], path(where, "eta"));
    if (j.contains("max_iters")) t.max_iters = static_cast<int>(integer(j["max_iters"], path(where, "max_iters")));
    if (j.contains("tol")) t.tol = number(j["tol"], path(where, "tol"));
    if (j.contains("eps_max")) t.eps_max = number(j["eps_max"], path(where, "eps_max"));
}

inline std::vector<Index> horizons(const Json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) bad(key, "expected a nonempty array of integers");
    std::vector<Index> out;
    for (const auto& x : v) {
        const auto h = integer(x, key);
        if (h < 1) bad(key, "horizons must be positive");
        out.push_back(static_cast<Index>(h));
    }
    return out;
}

inline void read_estimator(const Json& j, const std::string& where, RunConfig& rc) {
    allow_keys(j, where, {"kind", "kinds", "match", "regressor", "targeting", "cross_fit", "horizons"});
    EstimatorConfig& e = rc.estimator;
    if (j.contains("kind")) e.kind = estimator_kind(j["kind"], path(where, "kind"));
    if (j.contains("kinds")) {
        const auto& v = j["kinds"];
        if (!v.is_array()) bad(path(where, "kinds"), "expected an array of estimator names");
        rc.estimators.clear();
        for (const auto& x : v) rc.estimators.push_back(estimator_kind(x, path(where, "kinds")));
    }
    if (j.contains("match")) read_match(j["match"], path(where, "match"), e.match);
    if (j.contains("regressor")) read_regressor(j["regressor"], path(where, "regressor"), e.regressor);
    if (j.contains("targeting")) read_targeting(j["targeting"], path(where, "targeting"), e.targeting);
    if (j.contains("cross_fit")) {
        const auto& c = j["cross_fit"];
        const std::string w = path(where, "cross_fit");
        allow_keys(c, w, {"enabled", "k_folds"});
        if (c.contains("enabled")) e.cross_fit.enabled = boolean(c["enabled"], path(w, "enabled"));
        if (c.contains("k_folds")) e.cross_fit.k_folds = static_cast<int>(integer(c["k_folds"], path(w, "k_folds")));
    }
    if (j.contains("horizons")) e.horizons = horizons(j["horizons"], path(where, "horizons"));
}

inline void read_bench(const Json& j, const std::string& where, RunConfig& rc) {
    allow_keys(j, where, {"dgps", "outcome", "estimators", "horizons", "n_seeds", "ground_truth", "workers"});
    if (j.contains("dgps")) {
        const auto& v = j["dgps"];
        const std::string key = path(where, "dgps");
        if (!v.is_array() || v.empty()) bad(key, "expected a nonempty array");
        rc.bench_dgps.clear();
        rc.bench_dgp_overrides.clear();
        for (const auto& x : v) {
            if (x.is_object()) {
                dgp::Config c;
                read_dgp(x, key, c);
                rc.bench_dgp_overrides.push_back(c);
            } else {
                rc.bench_dgps.push_back(dgp_kind(x, key));
            }
        }
    }
    if (j.contains("outcome")) rc.bench_outcome = outcome(j["outcome"], path(where, "outcome"));
    if (j.contains("estimators")) {
        const auto& v = j["estimators"];
        if (!v.is_array() || v.empty()) bad(path(where, "estimators"), "expected a nonempty array");
        rc.bench_estimators.clear();
        for (const auto& x : v) rc.bench_estimators.push_back(estimator_kind(x, path(where, "estimators")));
    }
    if (j.contains("horizons")) rc.bench.horizons = horizons(j["horizons"], path(where, "horizons"));
    if (j.contains("n_seeds")) rc.bench.n_seeds = static_cast<int>(integer(j["n_seeds"], path(where, "n_seeds")));
    if (j.contains("ground_truth")) {
        const auto s = text(j["ground_truth"], path(where, "ground_truth"));
        auto m = bench::parse_ground_truth(s);
        if (!m) bad(path(where, "ground_truth"), "expected realized or noiseless");
        rc.bench.ground_truth_mode = *m;
    }
    if (j.contains("workers")) rc.bench.workers = static_cast<int>(integer(j["workers"], path(where, "workers")));
}

inline void read_data(const Json& j, const std::string& where, DataSection& d) {
    allow_keys(j, where, {"panel", "schema", "treated", "t0", "outcome", "bounds"});
    if (j.contains("panel")) d.panel = text(j["panel"], path(where, "panel"));
    if (j.contains("schema")) {
        const auto s = text(j["schema"], path(where, "schema"));
        if (s == "wide") d.schema = CsvSchema::Wide;
        else if (s == "long") d.schema = CsvSchema::Long;
        else bad(path(where, "schema"), "expected wide or long");
    }
    if (j.contains("treated")) d.treated = text(j["treated"], path(where, "treated"));
    if (j.contains("t0")) d.t0 = text(j["t0"], path(where, "t0"));
    if (j.contains("outcome")) d.kind.type = outcome(j["outcome"], path(where, "outcome"));
    if (j.contains("bounds")) d.kind.bounds = bounds(j["bounds"], path(where, "bounds"));
    if (d.kind.is_binary() && d.kind.bounds) bad(path(where, "bounds"), "binary outcomes are bounded by [0, 1]");
}

}  // namespace detail

/// Parses a configuration document. Every key is optional; unknown keys are
/// rejected with ConfigError naming the key.
inline RunConfig parse(const Json& j) {
    RunConfig rc;
    detail::allow_keys(j, "", {"seed", "dgp", "t0", "estimator", "bench", "data", "svg"});
    if (j.contains("seed")) rc.seed = detail::unsigned_integer(j["seed"], "seed");
    if (j.contains("dgp")) detail::read_dgp(j["dgp"], "dgp", rc.dgp);
    if (j.contains("t0")) rc.t0 = static_cast<Index>(detail::integer(j["t0"], "t0"));
    if (j.contains("estimator")) detail::read_estimator(j["estimator"], "estimator", rc);
    if (j.contains("bench")) detail::read_bench(j["bench"], "bench", rc);
    if (j.contains("data")) detail::read_data(j["data"], "data", rc.data);
    if (j.contains("svg")) rc.svg = detail::boolean(j["svg"], "svg");
    return rc;
}

inline RunConfig parse_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    return parse(j);
}

inline RunConfig load(const std::filesystem::path& file) { return parse_text(io::read_text(file)); }

/// Benchmark plan from the config: generator seeds and the per-run regressor
/// seed all derive from the single top-level seed.
inline bench::BenchPlan make_plan(const RunConfig& rc) {
    bench::BenchPlan plan = rc.bench;
    plan.dgp_grid.clear();
    plan.estimators.clear();
    if (!rc.bench_dgp_overrides.empty()) {
        for (std::size_t i = 0; i < rc.bench_dgp_overrides.size(); ++i) {
            dgp::Config c = rc.bench_dgp_overrides[i];
            c.seed = derive_seed(derive_seed(rc.seed, dgp::to_string(c.kind)), c.seed);
            plan.dgp_grid.push_back(c);
        }
    } else {
        for (dgp::Kind k : rc.bench_dgps) {
            dgp::Config c;
            c.kind = k;
            c.outcome = rc.bench_outcome;
            c.seed = derive_seed(rc.seed, dgp::to_string(k));
            plan.dgp_grid.push_back(c);
        }
    }
    for (EstimatorKind k : rc.bench_estimators) {
        EstimatorConfig e = rc.estimator;
        e.kind = k;
        e.horizons.clear();
        e.regressor.seed = rc.seed;
        plan.estimators.push_back(e);
    }
    return plan;
}

inline Json to_json(const dgp::Config& c) {
    return Json{{"kind", std::string(dgp::to_string(c.kind))},
                {"n_units", c.n_units},
                {"T", c.periods()},
                {"p", c.p},
                {"covariate_range", {c.covariate_range.lower, c.covariate_range.upper}},
                {"outcome", c.outcome == OutcomeType::Binary ? "binary" : "continuous"},
                {"noise_sd", c.noise()},
                {"seed", c.seed}};
}

inline Json to_json(const EstimatorConfig& e) {
    Json r;
    if (const auto* m = std::get_if<MlpSpec>(&e.regressor.kind))
        r = {{"type", "mlp"}, {"hidden_units", m->hidden_units}, {"learning_rate", m->learning_rate}, {"steps", m->steps}};
    else
        r = {{"type", "linear"}, {"ridge", std::get<LinearSpec>(e.regressor.kind).ridge}};
    r["standardize_inputs"] = e.regressor.standardize_inputs;
    r["seed"] = e.regressor.seed;
    static const char* modes[] = {"residual_score", "centered_prediction"};
    static const char* methods[] = {"newton", "bisection", "gradient_descent"};
    static const char* rules[] = {"inverse_lipschitz", "fixed", "line_search"};
    return Json{{"kind", std::string(to_string(e.kind))},
                {"match",
                 {{"ridge_lambda", e.match.ridge_lambda},
                  {"max_iters", e.match.max_iters},
                  {"tol", e.match.tol},
                  {"step_rule", rules[static_cast<int>(e.match.step_rule)]},
                  {"step", e.match.step},
                  {"importance", e.match.importance ? "custom" : "identity"}}},
                {"regressor", r},
                {"targeting",
                 {{"mode", modes[static_cast<int>(e.targeting.mode)]},
                  {"method", methods[static_cast<int>(e.targeting.method)]},
                  {"eta", e.targeting.eta},
                  {"max_iters", e.targeting.max_iters},
                  {"tol", e.targeting.tol},
                  {"eps_max", e.targeting.eps_max ? Json(*e.targeting.eps_max) : Json("auto")}}},
                {"cross_fit", {{"enabled", e.cross_fit.enabled}, {"k_folds", e.cross_fit.k_folds}}}};
}

/// Run manifest for a benchmark: plan and seeds, no timestamps.
inline Json manifest(const bench::BenchPlan& plan, std::uint64_t seed, const std::string& version) {
    Json j;
    j["tool"] = "tsc";
    j["version"] = version;
    j["seed"] = seed;
    j["n_seeds"] = plan.n_seeds;
    j["horizons"] = plan.horizons;
    j["ground_truth"] = std::string(bench::to_string(plan.ground_truth_mode));
    Json grid = Json::array();
    for (const auto& c : plan.dgp_grid) {
        Json g = to_json(c);
        Json runs = Json::array();
        for (int r = 0; r < plan.n_seeds; ++r) runs.push_back(bench::detail::run_seed(c, r));
        g["run_seeds"] = runs;
        grid.push_back(g);
    }
    j["dgp_grid"] = grid;
    Json est = Json::array();
    for (const auto& e : plan.estimators) est.push_back(to_json(e));
    j["estimators"] = est;
    return j;
}

}  // namespace tsc::config
