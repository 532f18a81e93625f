#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "tsc/error.hpp"
#include "tsc/random.hpp"

namespace tsc {

struct LinearSpec {
    double ridge = 0.0;
    bool operator==(const LinearSpec&) const = default;
};

/// One hidden ReLU layer, scalar output, squared-error loss, full-batch
/// gradient descent at a fixed learning rate.
struct MlpSpec {
    int hidden_units = 100;
    double learning_rate = 1e-2;
    int steps = 2000;
    bool operator==(const MlpSpec&) const = default;
};

struct RegressorSpec {
    std::variant<LinearSpec, MlpSpec> kind = MlpSpec{};
    std::uint64_t seed = 0;
    bool standardize_inputs = true;

    static RegressorSpec linear(double ridge = 0.0, std::uint64_t seed = 0) {
        return {LinearSpec{ridge}, seed, false};
    }
    static RegressorSpec mlp(MlpSpec m = {}, std::uint64_t seed = 0) { return {m, seed, true}; }

    bool is_mlp() const { return std::holds_alternative<MlpSpec>(kind); }
    bool operator==(const RegressorSpec&) const = default;
};

/// Per-feature affine map fitted on the training inputs. Constant features
/// keep scale 1.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer identity(Eigen::Index dim) {
        return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
    }

    static Standardizer fit(const Eigen::MatrixXd& x) {
        Standardizer s;
        s.mean = x.colwise().mean().transpose();
        s.scale.resize(x.cols());
        const double n = static_cast<double>(x.rows());
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            const double var = (x.col(k).array() - s.mean(k)).square().sum() / n;
            const double sd = std::sqrt(var);
            s.scale(k) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(k))) ? sd : 1.0;
        }
        return s;
    }

    Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& x) const {
        return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        return ((x - mean).array() / scale.array()).matrix();
    }
};

struct LinearState {
    Eigen::VectorXd coef;
    double intercept = 0.0;
};

struct MlpParams {
    Eigen::MatrixXd w1;  // hidden x input
    Eigen::VectorXd b1;  // hidden
    Eigen::VectorXd w2;  // hidden
    double b2 = 0.0;

    static MlpParams zeros(Eigen::Index input, Eigen::Index hidden) {
        return {Eigen::MatrixXd::Zero(hidden, input), Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden), 0.0};
    }
};

/// A fitted regression of Y_{j,t} on the control features for one horizon.
struct OutcomeModel {
    Eigen::Index horizon = 0;
    RegressorSpec spec;
    Standardizer input;
    std::variant<LinearState, MlpParams> state;
    /// MLP targets are fitted as (y - target_mean) / target_scale.
    double target_mean = 0.0;
    double target_scale = 1.0;
    std::vector<std::string> warnings;
    std::vector<double> loss_trace;  // MLP training loss before each step, then the final loss

    Eigen::Index input_dim() const { return input.mean.size(); }
};

// ---------------------------------------------------------------------------
// MLP forward / backward

inline Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd hidden = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).cwiseMax(0.0);
    return (hidden * p.w2).array() + p.b2;
}

inline double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    return (mlp_forward(p, x) - y).squaredNorm() / static_cast<double>(x.rows());
}

/// Mean squared error and its gradient with respect to every parameter.
inline double mlp_loss_and_gradient(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    MlpParams& grad) {
    const double n = static_cast<double>(x.rows());
    const Eigen::MatrixXd pre = (x * p.w1.transpose()).rowwise() + p.b1.transpose();  // n x H
    const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
    const Eigen::VectorXd err = ((hidden * p.w2).array() + p.b2).matrix() - y;

    const Eigen::VectorXd d_out = (2.0 / n) * err;
    grad.b2 = d_out.sum();
    grad.w2 = hidden.transpose() * d_out;
    const Eigen::MatrixXd d_pre =
        ((d_out * p.w2.transpose()).array() * (pre.array() > 0.0).cast<double>()).matrix();  // n x H
    grad.b1 = d_pre.colwise().sum().transpose();
    grad.w1 = d_pre.transpose() * x;
    return err.squaredNorm() / n;
}

inline MlpParams init_mlp(Eigen::Index input, int hidden, std::uint64_t seed) {
    Rng rng(seed);
    MlpParams p = MlpParams::zeros(input, hidden);
    const double b_in = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(input, 1)));
    const double b_out = 1.0 / std::sqrt(static_cast<double>(hidden));
    std::uniform_real_distribution<double> u_in(-b_in, b_in), u_out(-b_out, b_out);
    for (Eigen::Index h = 0; h < p.w1.rows(); ++h)
        for (Eigen::Index k = 0; k < p.w1.cols(); ++k) p.w1(h, k) = u_in(rng);
    for (Eigen::Index h = 0; h < p.b1.size(); ++h) p.b1(h) = u_in(rng);
    for (Eigen::Index h = 0; h < p.w2.size(); ++h) p.w2(h) = u_out(rng);
    p.b2 = u_out(rng);
    return p;
}

// ---------------------------------------------------------------------------

inline LinearState fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                              std::vector<std::string>& warnings) {
    require(ridge >= 0.0, ErrorCode::InvalidConfig, "linear ridge must be nonnegative");
    const Eigen::VectorXd x_mean = x.colwise().mean().transpose();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean.transpose();
    const Eigen::VectorXd yc = y.array() - y_mean;

    LinearState s;
    if (ridge > 0.0) {
        const Eigen::MatrixXd a = xc.transpose() * xc + ridge * Eigen::MatrixXd::Identity(x.cols(), x.cols());
        s.coef = a.ldlt().solve(xc.transpose() * yc);
    } else {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xc);
        s.coef = cod.solve(yc);
        if (cod.rank() < x.cols())
            warnings.push_back("SingularDesign: rank " + std::to_string(cod.rank()) + " < " +
                               std::to_string(x.cols()) + " features; using the minimum-norm solution");
    }
    s.intercept = y_mean - x_mean.dot(s.coef);
    return s;
}

inline MlpParams fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MlpSpec& m, std::uint64_t seed,
                         std::vector<double>& loss_trace) {
    require(m.hidden_units >= 1 && m.learning_rate > 0.0 && m.steps >= 1, ErrorCode::InvalidConfig,
            "MLP needs hidden_units >= 1, learning_rate > 0, steps >= 1");
    MlpParams p = init_mlp(x.cols(), m.hidden_units, seed);
    MlpParams g = MlpParams::zeros(x.cols(), m.hidden_units);
    loss_trace.clear();
    loss_trace.reserve(static_cast<std::size_t>(m.steps) + 1);
    for (int step = 0; step < m.steps; ++step) {
        loss_trace.push_back(mlp_loss_and_gradient(p, x, y, g));
        p.w1 -= m.learning_rate * g.w1;
        p.b1 -= m.learning_rate * g.b1;
        p.w2 -= m.learning_rate * g.w2;
        p.b2 -= m.learning_rate * g.b2;
    }
    loss_trace.push_back(mlp_loss(p, x, y));
    require(std::isfinite(loss_trace.back()), ErrorCode::NonFiniteInput, "MLP training diverged");
    return p;
}

/// Fits m_t on control features (one row per control) and their outcomes at
/// the horizon period.
inline OutcomeModel fit_outcome_model(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                      const RegressorSpec& spec, Eigen::Index horizon = 0) {
    require(features.rows() >= 1, ErrorCode::NoControls, "outcome model needs at least one control");
    require(features.rows() == targets.size(), ErrorCode::LengthMismatch, "one target per control row required");
    require(features.allFinite() && targets.allFinite(), ErrorCode::NonFiniteInput, "training data must be finite");

    OutcomeModel model;
    model.horizon = horizon;
    model.spec = spec;
    model.input = spec.standardize_inputs ? Standardizer::fit(features) : Standardizer::identity(features.cols());
    const Eigen::MatrixXd x = model.input.apply_rows(features);

    if (const auto* lin = std::get_if<LinearSpec>(&spec.kind)) {
        model.state = fit_linear(x, targets, lin->ridge, model.warnings);
    } else {
        // Outcome levels reach the tens; at lr 1e-2 the raw-scale loss diverges.
        const double n = static_cast<double>(targets.size());
        model.target_mean = targets.mean();
        const double sd = std::sqrt((targets.array() - model.target_mean).square().sum() / n);
        // Constant targets get scale 0: the fitted function is that constant everywhere.
        model.target_scale = sd > 1e-12 * std::max(1.0, std::abs(model.target_mean)) ? sd : 0.0;
        const Eigen::VectorXd y = model.target_scale > 0.0
                                      ? Eigen::VectorXd((targets.array() - model.target_mean) / model.target_scale)
                                      : Eigen::VectorXd::Zero(targets.size());
        model.state = fit_mlp(x, y, std::get<MlpSpec>(spec.kind), spec.seed, model.loss_trace);
    }
    return model;
}

inline double predict(const OutcomeModel& model, const Eigen::VectorXd& x) {
    require(x.size() == model.input_dim(), ErrorCode::LengthMismatch,
            "feature length " + std::to_string(x.size()) + " != trained length " + std::to_string(model.input_dim()));
    const Eigen::VectorXd z = model.input.apply(x);
    if (const auto* lin = std::get_if<LinearState>(&model.state)) return lin->coef.dot(z) + lin->intercept;
    const auto& p = std::get<MlpParams>(model.state);
    const Eigen::VectorXd hidden = (p.w1 * z + p.b1).cwiseMax(0.0);
    return model.target_mean + model.target_scale * (hidden.dot(p.w2) + p.b2);
}

inline Eigen::VectorXd predict_rows(const OutcomeModel& model, const Eigen::MatrixXd& rows) {
    Eigen::VectorXd out(rows.rows());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) out(i) = predict(model, rows.row(i).transpose());
    return out;
}

struct CrossFitResult {
    Eigen::VectorXd predictions;   // out-of-fold prediction per control
    std::vector<int> fold_of;      // fold index per control
    int models_fitted = 0;
};

/// Out-of-fold predictions: controls are shuffled with a seed derived from
/// the regressor seed and dealt into k folds; each fold is predicted by a model
/// fitted on the others.
inline CrossFitResult cross_fit_control_predictions(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                                    const RegressorSpec& spec, int k_folds) {
    const auto n = features.rows();
    require(k_folds >= 2, ErrorCode::TooFewControls, "cross-fitting needs at least 2 folds");
    require(n >= k_folds, ErrorCode::TooFewControls,
            std::to_string(n) + " controls cannot fill " + std::to_string(k_folds) + " folds");
    require(targets.size() == n, ErrorCode::LengthMismatch, "one target per control row required");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng shuffle_rng(derive_seed(spec.seed, "cross-fit-shuffle"));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    CrossFitResult out;
    out.predictions.resize(n);
    out.fold_of.assign(static_cast<std::size_t>(n), 0);
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        out.fold_of[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k_folds));

    for (int fold = 0; fold < k_folds; ++fold) {
        std::vector<Eigen::Index> train, held;
        for (Eigen::Index i = 0; i < n; ++i) (out.fold_of[static_cast<std::size_t>(i)] == fold ? held : train).push_back(i);
        Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), features.cols());
        Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
        for (std::size_t r = 0; r < train.size(); ++r) {
            xt.row(static_cast<Eigen::Index>(r)) = features.row(train[r]);
            yt(static_cast<Eigen::Index>(r)) = targets(train[r]);
        }
        RegressorSpec fold_spec = spec;
        fold_spec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(fold) + 1);
        const OutcomeModel m = fit_outcome_model(xt, yt, fold_spec);
        ++out.models_fitted;
        for (Eigen::Index i : held) out.predictions(i) = predict(m, features.row(i).transpose());
    }
    return out;
}

}  // namespace tsc
