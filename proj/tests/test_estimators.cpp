#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tsc/dgp.hpp"
#include "tsc/estimators.hpp"

using namespace tsc;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

// Treated unit 0, three controls, no covariates.
PanelDataset panel(const Eigen::MatrixXd& y, Index t0) {
    PanelDataset d;
    d.outcomes = y;
    d.covariates.resize(y.rows(), 0);
    d.t0 = t0;
    return validate(d);
}

EstimatorConfig config(EstimatorKind k, RegressorSpec spec = RegressorSpec::linear(0.0)) {
    EstimatorConfig c;
    c.kind = k;
    c.regressor = spec;
    return c;
}

}  // namespace

TEST(ClassicalSc, PerfectSingleDonor) {
    Eigen::MatrixXd y(4, 6);
    y << 1, 4, 2, 5, 7, 3,  //
        9, 1, 8, 2, 2, 2,   //
        1, 4, 2, 5, 7, 3,   //
        0, 0, 5, 9, 1, 4;
    const EstimatorResult r = estimate(panel(y, 4), config(EstimatorKind::ClassicalSc));
    ASSERT_EQ(r.horizons.size(), 2u);
    for (const auto& h : r.horizons) {
        EXPECT_NEAR((*h.weights_used)[1], 1.0, 1e-6);
        EXPECT_NEAR(h.psi_hat, y(2, h.period), 1e-5);
        EXPECT_NEAR(h.tau_hat, 0.0, 1e-5);
        EXPECT_EQ(h.tau_hat, h.observed - h.psi_hat);
    }
}

TEST(ClassicalSc, MidpointOfTwoControls) {
    Eigen::MatrixXd y(3, 5);
    y.row(1) << 1, 3, 2, 10, 4;
    y.row(2) << 5, 1, 6, 0, 8;
    y.row(0) = 0.5 * (y.row(1) + y.row(2));
    y(0, 3) = 100;
    y(0, 4) = -3;
    const EstimatorResult r = estimate(panel(y, 3), config(EstimatorKind::ClassicalSc));
    EXPECT_NEAR(r.horizons[0].psi_hat, 5.0, 1e-6);
    EXPECT_NEAR(r.horizons[1].psi_hat, 6.0, 1e-6);
    EXPECT_LE(*r.pretreatment_fit, 1e-10);
}

TEST(PlugIn, NoiselessLinearOutcomesAreRecovered) {
    // Outcomes linear in the pre-period history with many controls.
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd y(12, 4);
    for (Index i = 0; i < 12; ++i) {
        y(i, 0) = n(rng);
        y(i, 1) = n(rng);
        y(i, 2) = 2.0 * y(i, 0) - y(i, 1) + 0.5;
        y(i, 3) = -y(i, 0) + 3.0 * y(i, 1);
    }
    const EstimatorResult r = estimate(panel(y, 2), config(EstimatorKind::PlugIn));
    EXPECT_NEAR(r.horizons[0].psi_hat, y(0, 2), 1e-6);
    EXPECT_NEAR(r.horizons[1].psi_hat, y(0, 3), 1e-6);
}

TEST(PlugIn, ConstantControlsGiveTheConstant) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Constant(5, 6, 2.5);
    y.row(0) << 1, 2, 3, 4, 5, 6;
    y(1, 0) = 1.0;  // keep the history non-degenerate
    for (const RegressorSpec& spec : {RegressorSpec::linear(0.0), RegressorSpec::mlp({}, 3)}) {
        const EstimatorResult r = estimate(panel(y, 3), config(EstimatorKind::PlugIn, spec));
        for (const auto& h : r.horizons) EXPECT_NEAR(h.psi_hat, 2.5, 1e-6);
    }
}

TEST(PlugIn, MlpIsDeterministic) {
    dgp::Config c;
    c.seed = 2;
    const PanelDataset d = dgp::gen_panel(c, 45);
    EstimatorConfig cfg = config(EstimatorKind::PlugIn, RegressorSpec::mlp({}, 9));
    cfg.horizons = {1, 3};
    const EstimatorResult a = estimate(d, cfg), b = estimate(d, cfg);
    for (std::size_t k = 0; k < a.horizons.size(); ++k) EXPECT_EQ(a.horizons[k].psi_hat, b.horizons[k].psi_hat);
}

TEST(Augmented, ExceedsProbabilityRangeWhenResidualsPushPastOne) {
    const auto [correction, psi] =
        augmented_estimate(0.9, SimplexWeights::uniform(2), vec({1.0, 0.0}), vec({0.4, 0.0}));
    EXPECT_NEAR(correction, 0.3, 1e-15);
    EXPECT_NEAR(psi, 1.2, 1e-15);
    EXPECT_TRUE(outside(psi, Bounds{0.0, 1.0}));
}

TEST(Augmented, NullModelReducesToClassical) {
    const SimplexWeights w(vec({0.2, 0.5, 0.3}));
    const Eigen::VectorXd y = vec({3, -1, 7});
    EXPECT_NEAR(augmented_estimate(0.0, w, y, Eigen::VectorXd::Zero(3)).second, weighted_average(w, y), 1e-15);
    // A perfect regressor leaves only the plug-in term.
    EXPECT_EQ(augmented_estimate(4.2, w, y, y).first, 0.0);
}

TEST(Augmented, EqualsPlugInPlusWeightedResiduals) {
    dgp::Config c;
    c.kind = dgp::Kind::Quadratic;
    c.seed = 6;
    NuisanceCache cache(dgp::gen_panel(c, 45));
    EstimatorConfig cfg = config(EstimatorKind::AugmentedSc, RegressorSpec::mlp({}, 1));
    cfg.cross_fit.enabled = true;
    const EstimatorResult asc = estimate(cfg, cache);
    cfg.kind = EstimatorKind::PlugIn;
    const EstimatorResult plug = estimate(cfg, cache);
    for (std::size_t k = 0; k < asc.horizons.size(); ++k) {
        const auto& h = asc.horizons[k];
        const HorizonFit& fit = cache.horizon_fit(cfg.regressor, cfg.cross_fit, h.horizon);
        const double resid = weighted_average(*h.weights_used, fit.control_outcomes - fit.control_predictions);
        EXPECT_NEAR(h.psi_hat, plug.horizons[k].psi_hat + resid, 1e-12);
    }
}

TEST(Tsc, TwoControlClosedForm) {
    // The treated history sits midway between the controls, so w0 = (0.5, 0.5);
    // predictions (3, 3) against outcomes (5, 2) give residuals (2, -1).
    Eigen::MatrixXd y(3, 3);
    y << 0, 0, 9,  //
        1, 1, 5,   //
        -1, -1, 2;
    NuisanceCache cache(panel(y, 2));
    const MatchResult& m = cache.weights(MatchConfig{});
    ASSERT_NEAR(m.weights[0], 0.5, 1e-9);
    const Eigen::VectorXd yc = vec({5, 2});
    const Eigen::VectorXd preds = vec({3, 3});  // residuals (2, -1)
    const TargetingResult tr =
        targeted_weights(m.weights, yc - preds, compute_scores(preds, m.weights, TiltMode::ResidualScore, yc));
    EXPECT_NEAR(tr.targeted_weights[0], 1.0 / 3.0, 1e-8);
    EXPECT_NEAR(weighted_average(tr.targeted_weights, yc), 5.0 / 3.0 + 2.0 * 2.0 / 3.0, 1e-8);
}

TEST(Tsc, ZeroResidualsReproduceClassicalSc) {
    dgp::Config c;
    c.seed = 12;
    NuisanceCache cache(dgp::gen_panel(c, 40));
    const EstimatorResult tsc = estimate(config(EstimatorKind::Tsc, RegressorSpec::mlp({}, 5)), cache);
    const EstimatorResult sc = estimate(config(EstimatorKind::ClassicalSc), cache);
    for (std::size_t k = 0; k < tsc.horizons.size(); ++k) {
        const auto& t = *tsc.horizons[k].targeting;
        if (t.epsilon_hat == 0.0) {
            EXPECT_EQ(tsc.horizons[k].weights_used->vector(), tsc.horizons[k].initial_weights->vector());
            EXPECT_EQ(tsc.horizons[k].psi_hat, sc.horizons[k].psi_hat);
        }
    }
}

TEST(Tsc, StaysInsideControlRangeOnEveryGenerator) {
    for (dgp::Kind kind : dgp::kAllKinds)
        for (OutcomeType out : {OutcomeType::Continuous, OutcomeType::Binary}) {
            dgp::Config c;
            c.kind = kind;
            c.outcome = out;
            c.seed = 100 + static_cast<int>(kind);
            const PanelDataset d = dgp::gen_panel(c, c.periods() - 10);
            NuisanceCache cache(d);
            for (EstimatorKind k : {EstimatorKind::ClassicalSc, EstimatorKind::Tsc}) {
                EstimatorConfig cfg = config(k, RegressorSpec::mlp({}, 1));
                cfg.cross_fit.enabled = true;  // informative residuals
                cfg.horizons = {1, 5, 10};
                for (const auto& h : estimate(cfg, cache).horizons) {
                    const Bounds r = control_range(d, h.period);
                    EXPECT_GE(h.psi_hat, r.lower);
                    EXPECT_LE(h.psi_hat, r.upper);
                    EXPECT_FALSE(h.bounds_violation);
                    if (out == OutcomeType::Binary) {
                        EXPECT_GE(h.psi_hat, 0.0);
                        EXPECT_LE(h.psi_hat, 1.0);
                    }
                }
            }
        }
}

TEST(Tsc, RootFoundImpliesResidualBalance) {
    dgp::Config c;
    c.kind = dgp::Kind::Hinge;
    c.seed = 31;
    NuisanceCache cache(dgp::gen_panel(c, 40));
    EstimatorConfig cfg = config(EstimatorKind::Tsc, RegressorSpec::mlp({}, 2));
    cfg.cross_fit.enabled = true;
    const EstimatorResult r = estimate(cfg, cache);
    int roots = 0;
    for (const auto& h : r.horizons) {
        const HorizonFit& fit = cache.horizon_fit(cfg.regressor, cfg.cross_fit, h.horizon);
        const Decomposition dec = decomposition_check(*h.weights_used, fit.control_outcomes, fit.control_predictions);
        EXPECT_LE(std::abs(dec.sum - dec.weighted_outcome), 1e-12);
        if (h.targeting->root_found) {
            ++roots;
            EXPECT_LE(std::abs(dec.weighted_residual), 1e-8);
        } else {
            EXPECT_TRUE(h.targeting->clamped);
        }
    }
    EXPECT_GT(roots, 0);
}

TEST(AllEstimators, AgreeOnNoiselessInHullFixture) {
    Eigen::MatrixXd y(4, 5);
    y.row(1) << 1, 2, 3, 4, 5;
    y.row(2) << 2, 2, 2, 2, 2;
    y.row(3) << 5, 1, 0, 3, 3;
    y.row(0) = y.row(1);
    EstimatorConfig base = config(EstimatorKind::ClassicalSc, RegressorSpec::linear(0.0));
    NuisanceCache cache(panel(y, 3));
    std::vector<double> psi;
    for (EstimatorKind k : kAllEstimators) {
        base.kind = k;
        psi.push_back(estimate(base, cache).horizons[0].psi_hat);
    }
    for (double p : psi) EXPECT_NEAR(p, 4.0, 1e-8);
}

TEST(Decomposition, IdentityAndNullModel) {
    const SimplexWeights w(vec({0.1, 0.6, 0.3}));
    const Eigen::VectorXd y = vec({10.5, -3.25, 7.0});
    const Decomposition d = decomposition_check(w, y, vec({1.0, 2.0, 3.0}));
    EXPECT_LE(std::abs(d.sum - d.weighted_outcome), 1e-12);
    const Decomposition z = decomposition_check(w, y, Eigen::VectorXd::Zero(3));
    EXPECT_EQ(z.weighted_model_avg, 0.0);
    EXPECT_NEAR(z.weighted_residual, weighted_average(w, y), 1e-15);
}

TEST(Estimate, HorizonsBeyondPanelAreRejected) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Random(3, 5);
    EstimatorConfig cfg = config(EstimatorKind::ClassicalSc);
    cfg.horizons = {3};
    EXPECT_THROW(estimate(panel(y, 3), cfg), Error);
}

TEST(Estimate, NamesRoundTrip) {
    for (EstimatorKind k : kAllEstimators) EXPECT_EQ(parse_estimator(to_string(k)), k);
    EXPECT_EQ(parse_estimator("asc"), EstimatorKind::AugmentedSc);
    EXPECT_FALSE(parse_estimator("lasso").has_value());
}
