#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tsc/error.hpp"
#include "tsc/simplex.hpp"

namespace tsc {

enum class StepRule {
    InverseLipschitz,  // 1/L with L from power iteration on the Hessian
    Fixed,             // MatchConfig::step
    LineSearch,        // backtracking on the projected path
};

struct MatchConfig {
    /// Diagonal of the importance matrix V over feature dimensions; identity when absent.
    std::optional<Eigen::VectorXd> importance;
    double ridge_lambda = 0.0;
    int max_iters = 10000;
    double tol = 1e-10;  // stop once no weight moves by more than this in one step
    StepRule step_rule = StepRule::InverseLipschitz;
    double step = 0.0;
    bool record_trace = false;
};

struct MatchResult {
    SimplexWeights weights;
    /// V-weighted squared pre-treatment residual, without the ridge term.
    double objective = 0.0;
    double penalized_objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double lipschitz = 0.0;
    std::vector<double> trace;  // penalized objective per iteration, when requested
};

namespace detail {

/// Largest eigenvalue of a symmetric PSD matrix by power iteration. The
/// Rayleigh quotient approaches it from below.
inline double power_iteration(const Eigen::MatrixXd& h, int max_iters = 1000, double rel_tol = 1e-12) {
    const Eigen::Index n = h.rows();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
    double lambda = v.dot(h * v);
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd hv = h * v;
        const double norm = hv.norm();
        if (norm == 0.0) return 0.0;
        v = hv / norm;
        const double next = v.dot(h * v);
        if (std::abs(next - lambda) <= rel_tol * std::abs(next)) return next;
        lambda = next;
    }
    return lambda;
}

}  // namespace detail

/// Simplex-constrained matching of the treated feature vector by a convex
/// combination of control feature vectors (one control per row), solved by
/// projected gradient descent:
///   min_w ||x_treated - X_c^T w||_V^2 + ridge * ||w||^2  over the simplex.
inline MatchResult solve_sc_weights(const Eigen::VectorXd& x_treated, const Eigen::MatrixXd& x_controls,
                                    const MatchConfig& cfg = {}) {
    const Eigen::Index n = x_controls.rows();
    const Eigen::Index dim = x_controls.cols();
    require(n >= 1, ErrorCode::NoControls, "matching needs at least one control");
    require(x_treated.size() == dim, ErrorCode::LengthMismatch,
            "treated features have length " + std::to_string(x_treated.size()) + ", controls " + std::to_string(dim));
    require(x_treated.allFinite() && x_controls.allFinite(), ErrorCode::NonFiniteInput, "features must be finite");
    require(cfg.ridge_lambda >= 0.0, ErrorCode::InvalidConfig, "ridge_lambda must be nonnegative");
    require(cfg.max_iters >= 1 && cfg.tol > 0.0, ErrorCode::InvalidConfig, "max_iters and tol must be positive");

    Eigen::VectorXd v_diag = Eigen::VectorXd::Ones(dim);
    if (cfg.importance) {
        require(cfg.importance->size() == dim, ErrorCode::LengthMismatch, "importance diagonal length != feature length");
        require(cfg.importance->minCoeff() >= 0.0, ErrorCode::InvalidConfig, "importance weights must be nonnegative");
        v_diag = *cfg.importance;
    }

    const Eigen::MatrixXd weighted = x_controls * v_diag.asDiagonal();
    const Eigen::MatrixXd gram = weighted * x_controls.transpose();
    const Eigen::VectorXd cross = weighted * x_treated;
    const double lambda = cfg.ridge_lambda;

    auto residual_objective = [&](const Eigen::VectorXd& w) {
        const Eigen::VectorXd r = x_treated - x_controls.transpose() * w;
        return r.cwiseProduct(v_diag).dot(r);
    };
    auto penalized = [&](const Eigen::VectorXd& w) { return residual_objective(w) + lambda * w.squaredNorm(); };
    auto gradient = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
        return 2.0 * (gram * w - cross) + 2.0 * lambda * w;
    };

    MatchResult out;
    const Eigen::MatrixXd hessian = 2.0 * (gram + lambda * Eigen::MatrixXd::Identity(n, n));
    out.lipschitz = detail::power_iteration(hessian);

    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    double f = penalized(w);
    if (cfg.record_trace) out.trace.push_back(f);

    if (n == 1 || out.lipschitz <= 0.0) {
        // A single control or a flat objective: every feasible point is optimal.
        out.converged = true;
    } else {
        // Any step below 2/lambda_max descends, so the estimate from below is safe.
        double step = cfg.step_rule == StepRule::Fixed ? cfg.step : 1.0 / out.lipschitz;
        require(step > 0.0 && std::isfinite(step), ErrorCode::InvalidConfig, "projected-gradient step must be positive");
        for (int it = 1; it <= cfg.max_iters; ++it) {
            const Eigen::VectorXd g = gradient(w);
            Eigen::VectorXd next;
            double f_next = 0.0;
            if (cfg.step_rule == StepRule::LineSearch) {
                step *= 2.0;
                for (int bt = 0; bt < 60; ++bt) {
                    next = project_simplex(w - step * g).vector();
                    f_next = penalized(next);
                    const Eigen::VectorXd d = next - w;
                    if (f_next <= f + g.dot(d) + d.squaredNorm() / (2.0 * step)) break;
                    step *= 0.5;
                }
            } else {
                next = project_simplex(w - step * g).vector();
                f_next = penalized(next);
            }
            out.iterations = it;
            if (f_next > f) {
                // No descent: the step is at rounding level, or a fixed step is too long.
                if (cfg.record_trace) out.trace.push_back(f);
                out.converged = cfg.step_rule != StepRule::Fixed;
                break;
            }
            const double moved = (next - w).lpNorm<Eigen::Infinity>();
            w = std::move(next);
            f = f_next;
            if (cfg.record_trace) out.trace.push_back(f);
            if (moved <= cfg.tol) {
                out.converged = true;
                break;
            }
        }
    }

    out.weights = SimplexWeights(w);
    out.objective = residual_objective(w);
    out.penalized_objective = f;
    return out;
}

}  // namespace tsc
