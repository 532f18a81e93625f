#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "tsc/error.hpp"
#include "tsc/simplex.hpp"

namespace tsc {

/// Direction of the exponential tilt.
///
/// ResidualScore tilts by the control residuals Y_j - m(X_j); the tilt
/// objective log sum_j w0_j exp(eps r_j) is then convex with derivative equal
/// to the weighted residual, so the solve is a monotone root-find.
/// CenteredPrediction tilts by m(X_j) minus its w0-weighted mean and runs the
/// fixed-step iteration eps <- eps - eta f(eps) on the weighted residual.
enum class TiltMode { ResidualScore, CenteredPrediction };

enum class EpsilonMethod { Newton, Bisection, GradientDescent };

struct TiltScores {
    Eigen::VectorXd s;
    TiltMode mode = TiltMode::ResidualScore;
};

struct TargetingConfig {
    TiltMode mode = TiltMode::ResidualScore;
    EpsilonMethod method = EpsilonMethod::Newton;
    double eta = 0.1;      // gradient step
    int max_iters = 500;   // R for GradientDescent; iteration cap otherwise
    double tol = 1e-10;    // on |f(eps)|
    /// Half-width of the search interval; 50 / max|score| when absent.
    std::optional<double> eps_max;
};

struct TargetingResult {
    double epsilon_hat = 0.0;
    SimplexWeights targeted_weights;
    double score_at_solution = 0.0;
    bool root_found = false;
    int iterations = 0;
    bool clamped = false;
    double eps_max = 0.0;
};

inline TiltScores compute_scores(const Eigen::VectorXd& model_preds, const SimplexWeights& w0, TiltMode mode,
                                 const Eigen::VectorXd& outcomes = {}) {
    require(model_preds.size() == w0.size(), ErrorCode::LengthMismatch, "one prediction per control required");
    if (mode == TiltMode::CenteredPrediction) {
        const double center = w0.vector().dot(model_preds);
        return {(model_preds.array() - center).matrix(), mode};
    }
    require(outcomes.size() == model_preds.size(), ErrorCode::LengthMismatch,
            "residual scores need one outcome per control");
    return {outcomes - model_preds, mode};
}

/// w_j(eps) = w0_j exp(eps s_j) / sum_k w0_k exp(eps s_k), evaluated with a
/// max shift over the support of w0. Zero initial weights stay zero.
inline SimplexWeights tilt_weights(const SimplexWeights& w0, const Eigen::VectorXd& scores, double epsilon) {
    require(scores.size() == w0.size(), ErrorCode::LengthMismatch, "one score per control required");
    require(std::isfinite(epsilon) && scores.allFinite(), ErrorCode::NonFiniteInput, "tilt inputs must be finite");
    if (epsilon == 0.0) return w0;  // exact, without a renormalization rounding
    const Eigen::VectorXd& base = w0.vector();
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < base.size(); ++j)
        if (base(j) > 0.0) shift = std::max(shift, epsilon * scores(j));
    Eigen::VectorXd w(base.size());
    for (Eigen::Index j = 0; j < base.size(); ++j)
        w(j) = base(j) > 0.0 ? base(j) * std::exp(epsilon * scores(j) - shift) : 0.0;
    w /= w.sum();
    return SimplexWeights(std::move(w));
}

inline SimplexWeights tilt_weights(const SimplexWeights& w0, const TiltScores& s, double epsilon) {
    return tilt_weights(w0, s.s, epsilon);
}

/// Weighted control residual f = sum_j w_j r_j.
inline double score_equation(const SimplexWeights& w, const Eigen::VectorXd& residuals) {
    require(w.size() == residuals.size(), ErrorCode::LengthMismatch, "one residual per control required");
    return w.vector().dot(residuals);
}

/// log sum_j w0_j exp(eps r_j), the convex targeting objective whose
/// derivative is the weighted residual under residual tilting.
inline double tilt_objective(const SimplexWeights& w0, const Eigen::VectorXd& residuals, double epsilon) {
    require(w0.size() == residuals.size(), ErrorCode::LengthMismatch, "one residual per control required");
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < residuals.size(); ++j)
        if (w0[j] > 0.0) shift = std::max(shift, epsilon * residuals(j));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < residuals.size(); ++j)
        if (w0[j] > 0.0) acc += w0[j] * std::exp(epsilon * residuals(j) - shift);
    return shift + std::log(acc);
}

inline double default_eps_max(const Eigen::VectorXd& scores) {
    const double m = scores.size() > 0 ? scores.cwiseAbs().maxCoeff() : 0.0;
    return m > 0.0 ? 50.0 / m : 1.0;
}

namespace detail {

struct Evaluation {
    double f;
    double slope;  // d f / d eps = Cov_w(s, r)
};

inline Evaluation evaluate_score(const SimplexWeights& w0, const Eigen::VectorXd& residuals,
                                 const Eigen::VectorXd& scores, double eps) {
    const Eigen::VectorXd w = tilt_weights(w0, scores, eps).vector();
    const double f = w.dot(residuals);
    const double mean_s = w.dot(scores);
    const double slope = (w.array() * (scores.array() - mean_s) * (residuals.array() - f)).sum();
    return {f, slope};
}

inline TargetingResult finish(const SimplexWeights& w0, const Eigen::VectorXd& scores, double eps, double f,
                              int iterations, bool root, bool clamped, double eps_max) {
    TargetingResult r;
    r.epsilon_hat = eps;
    r.targeted_weights = tilt_weights(w0, scores, eps);
    r.score_at_solution = f;
    r.root_found = root;
    r.iterations = iterations;
    r.clamped = clamped;
    r.eps_max = eps_max;
    return r;
}

}  // namespace detail

/// Solves for the tilt parameter that zeroes the weighted control residual.
///
/// Under ResidualScore tilting f is nondecreasing, so a root exists within
/// [-eps_max, eps_max] iff f changes sign there; otherwise the endpoint with
/// the smaller |f| is returned with clamped = true and root_found = false.
/// CenteredPrediction always runs the fixed-step iteration for max_iters steps.
inline TargetingResult solve_epsilon(const SimplexWeights& w0, const Eigen::VectorXd& residuals,
                                     const TiltScores& scores, const TargetingConfig& cfg = {}) {
    require(residuals.size() == w0.size() && scores.s.size() == w0.size(), ErrorCode::LengthMismatch,
            "residuals and scores need one entry per control");
    require(residuals.allFinite() && scores.s.allFinite(), ErrorCode::NonFiniteInput, "targeting inputs must be finite");
    const double eps_max = cfg.eps_max.value_or(default_eps_max(scores.s));
    require(eps_max > 0.0 && std::isfinite(eps_max), ErrorCode::InvalidBracket, "eps_max must be positive");
    require(cfg.tol > 0.0 && cfg.max_iters >= 1, ErrorCode::InvalidConfig, "tol and max_iters must be positive");

    const Eigen::VectorXd& s = scores.s;
    auto f_at = [&](double eps) { return score_equation(tilt_weights(w0, s, eps), residuals); };

    const bool fixed_step = scores.mode == TiltMode::CenteredPrediction || cfg.method == EpsilonMethod::GradientDescent;
    if (fixed_step) {
        require(cfg.eta > 0.0, ErrorCode::InvalidConfig, "eta must be positive");
        double eps = 0.0;
        bool clamped = false;
        for (int r = 0; r < cfg.max_iters; ++r) {
            eps -= cfg.eta * f_at(eps);
            if (std::abs(eps) >= eps_max) {
                eps = std::copysign(eps_max, eps);
                clamped = true;
            } else {
                clamped = false;
            }
        }
        const double f = f_at(eps);
        return detail::finish(w0, s, eps, f, cfg.max_iters, std::abs(f) <= cfg.tol, clamped, eps_max);
    }

    const double f0 = f_at(0.0);
    if (std::abs(f0) <= cfg.tol) return detail::finish(w0, s, 0.0, f0, 0, true, false, eps_max);

    double lo = -eps_max, hi = eps_max;
    const double f_lo = f_at(lo), f_hi = f_at(hi);
    if (f_lo > 0.0 || f_hi < 0.0) {
        // No sign change on the interval: f is monotone, so the nearer endpoint minimizes |f|.
        const bool take_lo = std::abs(f_lo) <= std::abs(f_hi);
        const double eps = take_lo ? lo : hi;
        const double f = take_lo ? f_lo : f_hi;
        return detail::finish(w0, s, eps, f, 0, std::abs(f) <= cfg.tol, true, eps_max);
    }
    if (std::abs(f_lo) <= cfg.tol) return detail::finish(w0, s, lo, f_lo, 0, true, false, eps_max);
    if (std::abs(f_hi) <= cfg.tol) return detail::finish(w0, s, hi, f_hi, 0, true, false, eps_max);

    // Invariant: f(lo) < 0 < f(hi).
    if (f0 < 0.0) lo = 0.0; else hi = 0.0;
    double eps = 0.0;
    double f = f0;
    int it = 0;
    const int cap = std::max(cfg.max_iters, 200);
    for (; it < cap; ++it) {
        double next;
        if (cfg.method == EpsilonMethod::Newton) {
            // Safeguarded Newton: fall back to bisection when the step leaves the bracket.
            const auto ev = detail::evaluate_score(w0, residuals, s, eps);
            next = ev.slope > 0.0 ? eps - ev.f / ev.slope : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        } else {
            next = 0.5 * (lo + hi);
        }
        if (next == eps) break;
        eps = next;
        f = f_at(eps);
        if (std::abs(f) <= cfg.tol) {
            ++it;
            break;
        }
        (f < 0.0 ? lo : hi) = eps;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(eps))) {
            ++it;
            break;
        }
    }
    return detail::finish(w0, s, eps, f, it, std::abs(f) <= cfg.tol, false, eps_max);
}

/// solve_epsilon followed by the tilt; the result carries w* = w(eps_hat).
inline TargetingResult targeted_weights(const SimplexWeights& w0, const Eigen::VectorXd& residuals,
                                        const TiltScores& scores, const TargetingConfig& cfg = {}) {
    return solve_epsilon(w0, residuals, scores, cfg);
}

}  // namespace tsc
