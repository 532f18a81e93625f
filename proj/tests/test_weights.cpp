#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tsc/simplex.hpp"
#include "tsc/weights_solver.hpp"

using namespace tsc;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

}  // namespace

TEST(ProjectSimplex, Examples) {
    EXPECT_LE((project_simplex(vec({0.6, 0.6})).vector() - vec({0.5, 0.5})).norm(), 1e-15);
    EXPECT_LE((project_simplex(vec({1.2, -0.2})).vector() - vec({1.0, 0.0})).norm(), 1e-15);
    EXPECT_LE((project_simplex(vec({0.3, 0.7})).vector() - vec({0.3, 0.7})).norm(), 1e-15);
}

TEST(ProjectSimplex, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(project_simplex(Eigen::VectorXd()), Error);
    EXPECT_THROW(project_simplex(vec({1.0, std::nan("")})), Error);
}

TEST(ProjectSimplex, NoGridPointIsCloser) {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, 1.5);
    for (int trial = 0; trial < 60; ++trial) {
        const int dim = 2 + trial % 2;
        Eigen::VectorXd v(dim);
        for (int j = 0; j < dim; ++j) v(j) = n(rng);
        const Eigen::VectorXd p = project_simplex(v).vector();
        const double dp = (p - v).norm();
        double best = std::numeric_limits<double>::infinity();
        oracle::simplex_grid(dim, 400, [&](const Eigen::VectorXd& w) { best = std::min(best, (w - v).norm()); });
        EXPECT_LE(dp, best + 1e-12);
    }
}

TEST(SimplexWeights, RejectsInvalid) {
    EXPECT_THROW(SimplexWeights(vec({0.5, 0.6})), Error);
    EXPECT_THROW(SimplexWeights(vec({1.5, -0.5})), Error);
    EXPECT_NO_THROW(SimplexWeights(vec({0.25, 0.75})));
}

TEST(WeightedAverage, Examples) {
    EXPECT_DOUBLE_EQ(weighted_average(SimplexWeights(vec({1, 0})), vec({3, 9})), 3.0);
    EXPECT_DOUBLE_EQ(weighted_average(SimplexWeights(vec({0.5, 0.5})), vec({2, 4})), 3.0);
    EXPECT_DOUBLE_EQ(weighted_average(SimplexWeights(vec({0.75, 0.25})), vec({0, 4})), 1.0);
    EXPECT_THROW(weighted_average(SimplexWeights(vec({1, 0})), vec({1, 2, 3})), Error);
}

TEST(WeightedAverage, ConstantValuesReturnTheConstant) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd raw(5);
        for (int j = 0; j < 5; ++j) raw(j) = u(rng);
        const SimplexWeights w(raw / raw.sum());
        const double c = 20.0 * u(rng) - 10.0;
        EXPECT_NEAR(weighted_average(w, Eigen::VectorXd::Constant(5, c)), c, 1e-14);
        EXPECT_LE(weighted_average(w, Eigen::VectorXd::Ones(5)), 1.0);
    }
}

TEST(SolveScWeights, ExactSingleDonor) {
    Eigen::MatrixXd xc(3, 4);
    xc << 1, 2, 3, 4, 5, 1, 0, 2, 9, 9, 1, 1;
    const Eigen::VectorXd x1 = xc.row(1).transpose();
    const MatchResult r = solve_sc_weights(x1, xc);
    EXPECT_NEAR(r.weights[1], 1.0, 1e-6);
    EXPECT_LE(r.objective, 1e-10);
}

TEST(SolveScWeights, MidpointOfTwoControls) {
    Eigen::MatrixXd xc(2, 3);
    xc << 1, 4, 2, 3, 0, 6;
    const Eigen::VectorXd x1 = 0.5 * (xc.row(0) + xc.row(1)).transpose();
    const MatchResult r = solve_sc_weights(x1, xc);
    EXPECT_NEAR(r.weights[0], 0.5, 1e-6);
    EXPECT_LE(r.objective, 1e-10);
    // Uniqueness: every other grid point is strictly worse.
    oracle::simplex_grid(2, 1000, [&](const Eigen::VectorXd& w) {
        if (std::abs(w(0) - 0.5) > 1e-9) EXPECT_GT(oracle::sc_objective(x1, xc, w), r.objective);
    });
}

TEST(SolveScWeights, OutsideHullMatchesQpOracle) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int controls = 2 + trial % 2;
        Eigen::MatrixXd xc(controls, 6);
        for (int i = 0; i < controls; ++i)
            for (int k = 0; k < 6; ++k) xc(i, k) = n(rng);
        Eigen::VectorXd x1(6);
        for (int k = 0; k < 6; ++k) x1(k) = 3.0 * n(rng);
        const MatchResult r = solve_sc_weights(x1, xc);
        const double exact = oracle::simplex_qp_min(x1, xc);
        EXPECT_NEAR(r.objective, exact, 1e-6);
        double grid = std::numeric_limits<double>::infinity();
        oracle::simplex_grid(controls, 300, [&](const Eigen::VectorXd& w) {
            grid = std::min(grid, oracle::sc_objective(x1, xc, w));
        });
        EXPECT_LE(r.objective, grid + 1e-6);
        EXPECT_GT(r.objective, 0.0);
    }
}

TEST(SolveScWeights, InHullResidualIsTiny) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::MatrixXd xc(4, 61);
        for (int i = 0; i < 4; ++i)
            for (int k = 0; k < 61; ++k) xc(i, k) = u(rng);
        Eigen::VectorXd a(4);
        for (int j = 0; j < 4; ++j) a(j) = u(rng) + 0.1;
        a /= a.sum();
        const Eigen::VectorXd x1 = xc.transpose() * a;
        const MatchResult r = solve_sc_weights(x1, xc);
        EXPECT_LE(r.objective, 1e-6);
    }
}

TEST(SolveScWeights, TraceIsNonIncreasingForEveryStepRule) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd xc(4, 10);
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 10; ++k) xc(i, k) = n(rng);
    Eigen::VectorXd x1(10);
    for (int k = 0; k < 10; ++k) x1(k) = 2.0 * n(rng);
    const double exact = oracle::simplex_qp_min(x1, xc);
    for (StepRule rule : {StepRule::InverseLipschitz, StepRule::Fixed, StepRule::LineSearch}) {
        MatchConfig cfg;
        cfg.step_rule = rule;
        cfg.step = 1e-3;
        cfg.record_trace = true;
        const MatchResult r = solve_sc_weights(x1, xc, cfg);
        for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
        EXPECT_NEAR(r.objective, exact, 1e-6);
        EXPECT_NEAR(r.weights.vector().sum(), 1.0, 1e-10);
        EXPECT_GE(r.weights.vector().minCoeff(), 0.0);
    }
}

TEST(SolveScWeights, RidgeShrinksTowardUniform) {
    Eigen::MatrixXd xc(3, 2);
    xc << 0, 0, 1, 0, 0, 1;
    const Eigen::VectorXd x1 = vec({1.0, 0.0});
    MatchConfig cfg;
    const double plain = solve_sc_weights(x1, xc, cfg).weights[1];
    cfg.ridge_lambda = 10.0;
    const MatchResult r = solve_sc_weights(x1, xc, cfg);
    EXPECT_LT(r.weights[1], plain);
    EXPECT_GT(r.penalized_objective, r.objective);
}

TEST(SolveScWeights, ImportanceDiagonalChangesTheMatch) {
    Eigen::MatrixXd xc(2, 2);
    xc << 0, 0, 1, 1;
    const Eigen::VectorXd x1 = vec({1.0, 0.0});
    MatchConfig cfg;
    cfg.importance = vec({1.0, 0.0});
    EXPECT_NEAR(solve_sc_weights(x1, xc, cfg).weights[1], 1.0, 1e-6);
    cfg.importance = vec({0.0, 1.0});
    EXPECT_NEAR(solve_sc_weights(x1, xc, cfg).weights[0], 1.0, 1e-6);
    cfg.importance = vec({1.0});
    EXPECT_THROW(solve_sc_weights(x1, xc, cfg), Error);
}

TEST(SolveScWeights, SingleControlAndBadInput) {
    Eigen::MatrixXd xc(1, 3);
    xc << 1, 2, 3;
    const MatchResult r = solve_sc_weights(vec({0, 0, 0}), xc);
    EXPECT_DOUBLE_EQ(r.weights[0], 1.0);
    EXPECT_TRUE(r.converged);
    EXPECT_THROW(solve_sc_weights(vec({0, 0}), xc), Error);
    EXPECT_THROW(solve_sc_weights(vec({0, 0, 0}), Eigen::MatrixXd(0, 3)), Error);
}
