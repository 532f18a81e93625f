#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsc/error.hpp"
#include "tsc/io.hpp"
#include "tsc/panel.hpp"
#include "tsc/random.hpp"
#include "tsc/regressor.hpp"
#include "tsc/simplex.hpp"
#include "tsc/targeting.hpp"
#include "tsc/weights_solver.hpp"

namespace tsc {

enum class EstimatorKind { ClassicalSc, PlugIn, AugmentedSc, Tsc };

inline constexpr EstimatorKind kAllEstimators[] = {EstimatorKind::ClassicalSc, EstimatorKind::PlugIn,
                                                   EstimatorKind::AugmentedSc, EstimatorKind::Tsc};

constexpr std::string_view to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::ClassicalSc: return "classical_sc";
        case EstimatorKind::PlugIn: return "plugin";
        case EstimatorKind::AugmentedSc: return "augmented_sc";
        case EstimatorKind::Tsc: return "tsc";
    }
    return "unknown";
}

inline std::optional<EstimatorKind> parse_estimator(std::string_view name) {
    if (name == "classical_sc" || name == "scm" || name == "sc") return EstimatorKind::ClassicalSc;
    if (name == "plugin" || name == "plug_in") return EstimatorKind::PlugIn;
    if (name == "augmented_sc" || name == "asc" || name == "ascm") return EstimatorKind::AugmentedSc;
    if (name == "tsc") return EstimatorKind::Tsc;
    return std::nullopt;
}

struct CrossFitConfig {
    bool enabled = false;
    int k_folds = 0;  // 0: leave-one-out
    bool operator==(const CrossFitConfig&) const = default;
};

struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::Tsc;
    MatchConfig match;
    RegressorSpec regressor = RegressorSpec::mlp();
    TargetingConfig targeting;
    /// Post-treatment offsets (1 = first post period); empty means all.
    std::vector<Index> horizons;
    CrossFitConfig cross_fit;
};

struct HorizonEstimate {
    Index horizon = 0;
    Index period = 0;
    double observed = 0.0;  // Y_{treated, period}
    double psi_hat = 0.0;
    double tau_hat = 0.0;
    std::optional<SimplexWeights> weights_used;
    std::optional<SimplexWeights> initial_weights;  // Tsc
    std::optional<TargetingResult> targeting;       // Tsc
    std::optional<double> plugin_term;              // PlugIn, AugmentedSc
    std::optional<double> residual_correction;      // AugmentedSc
    Bounds bounds;
    bool bounds_violation = false;
};

struct EstimatorResult {
    EstimatorKind kind = EstimatorKind::Tsc;
    std::vector<HorizonEstimate> horizons;
    std::optional<double> pretreatment_fit;
    std::vector<std::string> warnings;
};

/// Outcome model for one horizon with its predictions.
struct HorizonFit {
    OutcomeModel model;
    Eigen::VectorXd control_predictions;  // out-of-fold when cross-fitting
    double treated_prediction = 0.0;
    Eigen::VectorXd control_outcomes;
};

/// Memoizes weight solves and per-horizon outcome models for one dataset so
/// several estimators can share identical nuisance fits. Not thread-safe;
/// use one cache per job.
class NuisanceCache {
public:
    explicit NuisanceCache(PanelDataset dataset)
        : data_(validate(std::move(dataset))),
          features_(build_features(data_)),
          control_features_(control_rows(data_, features_)) {}

    const PanelDataset& dataset() const { return data_; }
    const Eigen::MatrixXd& features() const { return features_; }
    const Eigen::MatrixXd& control_features() const { return control_features_; }
    Eigen::VectorXd treated_features() const { return features_.row(data_.treated_index).transpose(); }

    const MatchResult& weights(const MatchConfig& cfg) {
        auto key = match_key(cfg);
        auto it = weights_.find(key);
        if (it == weights_.end())
            it = weights_.emplace(std::move(key), solve_sc_weights(treated_features(), control_features_, cfg)).first;
        return it->second;
    }

    const HorizonFit& horizon_fit(const RegressorSpec& spec, const CrossFitConfig& cf, Index horizon) {
        auto key = regressor_key(spec, cf) + "|h=" + std::to_string(horizon);
        auto it = fits_.find(key);
        if (it != fits_.end()) return *it->second;

        const Index period = data_.period_of_horizon(horizon);
        RegressorSpec hspec = spec;
        hspec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(horizon));
        auto fit = std::make_unique<HorizonFit>();
        fit->control_outcomes = data_.control_outcomes(period);
        fit->model = fit_outcome_model(control_features_, fit->control_outcomes, hspec, horizon);
        fit->treated_prediction = predict(fit->model, treated_features());
        if (cf.enabled) {
            const int k = cf.k_folds > 0 ? cf.k_folds : static_cast<int>(control_features_.rows());
            fit->control_predictions =
                cross_fit_control_predictions(control_features_, fit->control_outcomes, hspec, k).predictions;
        } else {
            fit->control_predictions = predict_rows(fit->model, control_features_);
        }
        return *fits_.emplace(std::move(key), std::move(fit)).first->second;
    }

private:
    static std::string match_key(const MatchConfig& c) {
        std::string k = "l=" + io::format_double(c.ridge_lambda) + ";i=" + std::to_string(c.max_iters) +
                        ";t=" + io::format_double(c.tol) + ";s=" + std::to_string(static_cast<int>(c.step_rule)) +
                        ":" + io::format_double(c.step) + ";v=";
        if (c.importance)
            for (Eigen::Index j = 0; j < c.importance->size(); ++j) k += io::format_double((*c.importance)(j)) + ",";
        return k;
    }

    static std::string regressor_key(const RegressorSpec& s, const CrossFitConfig& cf) {
        std::string k = "seed=" + std::to_string(s.seed) + ";std=" + std::to_string(s.standardize_inputs) +
                        ";cf=" + std::to_string(cf.enabled) + ":" + std::to_string(cf.k_folds);
        if (const auto* lin = std::get_if<LinearSpec>(&s.kind)) {
            k += ";linear=" + io::format_double(lin->ridge);
        } else {
            const auto& m = std::get<MlpSpec>(s.kind);
            k += ";mlp=" + std::to_string(m.hidden_units) + "," + io::format_double(m.learning_rate) + "," +
                 std::to_string(m.steps);
        }
        return k;
    }

    PanelDataset data_;
    Eigen::MatrixXd features_;
    Eigen::MatrixXd control_features_;
    std::map<std::string, MatchResult> weights_;
    std::map<std::string, std::unique_ptr<HorizonFit>> fits_;
};

struct Decomposition {
    double weighted_model_avg = 0.0;  // sum_j w_j m(X_j)
    double weighted_residual = 0.0;   // sum_j w_j (Y_j - m(X_j))
    double sum = 0.0;
    double weighted_outcome = 0.0;    // sum_j w_j Y_j, computed directly
};

/// Splits a weighted control average into model and residual parts.
inline Decomposition decomposition_check(const SimplexWeights& w, const Eigen::VectorXd& control_outcomes,
                                         const Eigen::VectorXd& control_predictions) {
    require(control_outcomes.size() == w.size() && control_predictions.size() == w.size(), ErrorCode::LengthMismatch,
            "decomposition needs one outcome and prediction per control");
    Decomposition d;
    d.weighted_model_avg = weighted_average(w, control_predictions);
    d.weighted_residual = weighted_average(w, control_outcomes - control_predictions);
    d.sum = d.weighted_model_avg + d.weighted_residual;
    d.weighted_outcome = weighted_average(w, control_outcomes);
    return d;
}

inline Decomposition decomposition_check(const PanelDataset& dataset, const SimplexWeights& w,
                                         const OutcomeModel& model, Index horizon) {
    const Index period = dataset.period_of_horizon(horizon);
    const Eigen::MatrixXd controls = control_rows(dataset, build_features(dataset));
    return decomposition_check(w, dataset.control_outcomes(period), predict_rows(model, controls));
}

/// Plug-in prediction plus the weighted control residual: (correction, psi).
inline std::pair<double, double> augmented_estimate(double plugin, const SimplexWeights& w,
                                                    const Eigen::VectorXd& control_outcomes,
                                                    const Eigen::VectorXd& control_predictions) {
    const double correction = weighted_average(w, control_outcomes - control_predictions);
    return {correction, plugin + correction};
}

namespace detail {

inline std::vector<Index> resolve_horizons(const PanelDataset& d, const std::vector<Index>& requested) {
    std::vector<Index> hs = requested;
    if (hs.empty())
        for (Index h = 1; h <= d.n_post(); ++h) hs.push_back(h);
    for (Index h : hs)
        require(h >= 1 && d.t0 + h <= d.n_periods(), ErrorCode::InvalidConfig,
                "horizon " + std::to_string(h) + " exceeds the " + std::to_string(d.n_post()) + " post-treatment periods");
    return hs;
}

}  // namespace detail

/// Runs the configured estimator, reusing fits already present in `cache`.
inline EstimatorResult estimate(const EstimatorConfig& cfg, NuisanceCache& cache) {
    const PanelDataset& d = cache.dataset();
    EstimatorResult result;
    result.kind = cfg.kind;

    const MatchResult* match = nullptr;
    if (cfg.kind != EstimatorKind::PlugIn) {
        MatchConfig mc = cfg.match;
        // TSC starts from the unregularized matching weights.
        if (cfg.kind == EstimatorKind::Tsc) mc.ridge_lambda = 0.0;
        match = &cache.weights(mc);
        result.pretreatment_fit = match->objective;
        if (!match->converged)
            result.warnings.push_back("matching stopped at max_iters=" + std::to_string(mc.max_iters));
    }

    for (Index h : detail::resolve_horizons(d, cfg.horizons)) {
        HorizonEstimate est;
        est.horizon = h;
        est.period = d.period_of_horizon(h);
        est.observed = d.outcomes(d.treated_index, est.period);
        const Eigen::VectorXd y = d.control_outcomes(est.period);

        switch (cfg.kind) {
            case EstimatorKind::ClassicalSc:
                est.weights_used = match->weights;
                est.psi_hat = weighted_average(match->weights, y);
                break;
            case EstimatorKind::PlugIn: {
                const HorizonFit& fit = cache.horizon_fit(cfg.regressor, cfg.cross_fit, h);
                est.plugin_term = fit.treated_prediction;
                est.psi_hat = fit.treated_prediction;
                break;
            }
            case EstimatorKind::AugmentedSc: {
                const HorizonFit& fit = cache.horizon_fit(cfg.regressor, cfg.cross_fit, h);
                est.weights_used = match->weights;
                est.plugin_term = fit.treated_prediction;
                const auto [correction, psi] =
                    augmented_estimate(fit.treated_prediction, match->weights, y, fit.control_predictions);
                est.residual_correction = correction;
                est.psi_hat = psi;
                break;
            }
            case EstimatorKind::Tsc: {
                const HorizonFit& fit = cache.horizon_fit(cfg.regressor, cfg.cross_fit, h);
                const Eigen::VectorXd residuals = y - fit.control_predictions;
                const TiltScores scores =
                    compute_scores(fit.control_predictions, match->weights, cfg.targeting.mode, y);
                TargetingResult tr = targeted_weights(match->weights, residuals, scores, cfg.targeting);
                est.initial_weights = match->weights;
                est.weights_used = tr.targeted_weights;
                est.psi_hat = weighted_average(tr.targeted_weights, y);
                est.targeting = std::move(tr);
                break;
            }
        }
        est.tau_hat = est.observed - est.psi_hat;
        est.bounds = reporting_bounds(d, est.period);
        est.bounds_violation = outside(est.psi_hat, est.bounds);
        result.horizons.push_back(std::move(est));
    }

    if (cfg.kind != EstimatorKind::ClassicalSc) {
        for (Index h : detail::resolve_horizons(d, cfg.horizons)) {
            const auto& w = cache.horizon_fit(cfg.regressor, cfg.cross_fit, h).model.warnings;
            for (const auto& msg : w) result.warnings.push_back("horizon " + std::to_string(h) + ": " + msg);
        }
    }
    return result;
}

inline EstimatorResult estimate(const PanelDataset& dataset, const EstimatorConfig& cfg) {
    NuisanceCache cache(dataset);
    return estimate(cfg, cache);
}

inline EstimatorResult estimate_classical_sc(const PanelDataset& d, EstimatorConfig cfg) {
    cfg.kind = EstimatorKind::ClassicalSc;
    return estimate(d, cfg);
}
inline EstimatorResult estimate_plugin(const PanelDataset& d, EstimatorConfig cfg) {
    cfg.kind = EstimatorKind::PlugIn;
    return estimate(d, cfg);
}
inline EstimatorResult estimate_augmented_sc(const PanelDataset& d, EstimatorConfig cfg) {
    cfg.kind = EstimatorKind::AugmentedSc;
    return estimate(d, cfg);
}
inline EstimatorResult estimate_tsc(const PanelDataset& d, EstimatorConfig cfg) {
    cfg.kind = EstimatorKind::Tsc;
    return estimate(d, cfg);
}

}  // namespace tsc
