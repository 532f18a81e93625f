#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tsc/error.hpp"

namespace tsc {

using Index = Eigen::Index;

struct Bounds {
    double lower = 0.0;
    double upper = 1.0;

    bool operator==(const Bounds&) const = default;
};

enum class OutcomeType { Continuous, Binary };

struct OutcomeKind {
    OutcomeType type = OutcomeType::Continuous;
    std::optional<Bounds> bounds;  // continuous only; binary implies [0, 1]

    static OutcomeKind continuous(std::optional<Bounds> b = std::nullopt) {
        return {OutcomeType::Continuous, b};
    }
    static OutcomeKind binary() { return {OutcomeType::Binary, std::nullopt}; }

    bool is_binary() const { return type == OutcomeType::Binary; }

    std::optional<Bounds> declared_bounds() const {
        if (is_binary()) return Bounds{0.0, 1.0};
        return bounds;
    }

    bool operator==(const OutcomeKind&) const = default;
};

/// Treated-unit untreated trajectory known only for simulated data.
/// Both vectors are indexed by period (length T).
struct GroundTruth {
    Eigen::VectorXd realized_untreated;
    Eigen::VectorXd noiseless_mean;
};

/// N units x T periods of outcomes with time-invariant covariates.
///
/// `t0` is the number of pre-treatment periods: columns [0, t0) form the
/// matching history and columns [t0, T) are post-treatment. Unit and time
/// labels are metadata; every computation is positional.
struct PanelDataset {
    Eigen::MatrixXd outcomes;    // N x T
    Eigen::MatrixXd covariates;  // N x p, p may be 0
    Index treated_index = 0;
    Index t0 = 1;
    OutcomeKind kind;
    std::vector<std::string> unit_ids;
    std::vector<std::string> time_labels;
    std::optional<GroundTruth> ground_truth;

    Index n_units() const { return outcomes.rows(); }
    Index n_periods() const { return outcomes.cols(); }
    Index n_covariates() const { return covariates.cols(); }
    Index n_controls() const { return n_units() - 1; }
    Index n_post() const { return n_periods() - t0; }
    Index feature_length() const { return n_covariates() + t0; }

    std::vector<Index> control_indices() const {
        std::vector<Index> out;
        out.reserve(static_cast<std::size_t>(std::max<Index>(n_units() - 1, 0)));
        for (Index i = 0; i < n_units(); ++i)
            if (i != treated_index) out.push_back(i);
        return out;
    }

    /// Column of the post-treatment period `horizon` steps after t0 (1-based offset).
    Index period_of_horizon(Index horizon) const {
        require(horizon >= 1 && t0 + horizon <= n_periods(), ErrorCode::InvalidConfig,
                "horizon " + std::to_string(horizon) + " outside post-treatment window of length " +
                    std::to_string(n_post()));
        return t0 + horizon - 1;
    }

    Eigen::VectorXd control_outcomes(Index period) const {
        const auto controls = control_indices();
        Eigen::VectorXd v(static_cast<Index>(controls.size()));
        for (std::size_t j = 0; j < controls.size(); ++j) v(static_cast<Index>(j)) = outcomes(controls[j], period);
        return v;
    }

    /// Same data with a different treatment time; data are not re-drawn.
    PanelDataset with_t0(Index new_t0) const {
        PanelDataset d = *this;
        d.t0 = new_t0;
        return d;
    }
};

/// Range of control outcomes at a period.
inline Bounds control_range(const PanelDataset& d, Index period) {
    const Eigen::VectorXd y = d.control_outcomes(period);
    return {y.minCoeff(), y.maxCoeff()};
}

/// Bounds used for violation reporting: declared, else [0,1] for binary,
/// else the control range at the period.
inline Bounds reporting_bounds(const PanelDataset& d, Index period) {
    if (auto b = d.kind.declared_bounds()) return *b;
    return control_range(d, period);
}

/// Floating-point slack for bound checks of convex combinations: a sum of
/// normalized weights can exceed one by a few ulps.
inline double bound_slack(const Bounds& b) {
    return 16.0 * std::numeric_limits<double>::epsilon() *
           std::max({1.0, std::abs(b.lower), std::abs(b.upper)});
}

inline bool outside(double value, const Bounds& b) {
    const double slack = bound_slack(b);
    return value < b.lower - slack || value > b.upper + slack;
}

inline PanelDataset validate(PanelDataset d) {
    const Index n = d.outcomes.rows();
    const Index t = d.outcomes.cols();
    require(n >= 2, ErrorCode::NoControls,
            "panel needs at least one control unit besides the treated unit (N=" + std::to_string(n) + ")");
    require(t >= 2, ErrorCode::DimensionMismatch, "panel needs at least two periods (T=" + std::to_string(t) + ")");
    if (d.covariates.size() == 0) d.covariates.resize(n, d.covariates.cols());
    require(d.covariates.rows() == n, ErrorCode::DimensionMismatch,
            "covariate rows " + std::to_string(d.covariates.rows()) + " != units " + std::to_string(n));
    require(d.t0 >= 1 && d.t0 < t, ErrorCode::InvalidT0,
            "t0=" + std::to_string(d.t0) + " outside [1, " + std::to_string(t - 1) + "]");
    require(d.treated_index >= 0 && d.treated_index < n, ErrorCode::DimensionMismatch,
            "treated index " + std::to_string(d.treated_index) + " is not a unit row");

    if (d.unit_ids.empty())
        for (Index i = 0; i < n; ++i) d.unit_ids.push_back(std::to_string(i + 1));
    if (d.time_labels.empty())
        for (Index s = 0; s < t; ++s) d.time_labels.push_back(std::to_string(s + 1));
    require(static_cast<Index>(d.unit_ids.size()) == n, ErrorCode::DimensionMismatch, "unit id count != N");
    require(static_cast<Index>(d.time_labels.size()) == t, ErrorCode::DimensionMismatch, "time label count != T");

    require(d.outcomes.allFinite(), ErrorCode::NonFiniteInput, "outcomes contain non-finite values");
    require(d.covariates.allFinite(), ErrorCode::NonFiniteInput, "covariates contain non-finite values");

    if (d.kind.is_binary()) {
        for (Index i = 0; i < n; ++i)
            for (Index s = 0; s < t; ++s) {
                const double y = d.outcomes(i, s);
                require(y == 0.0 || y == 1.0, ErrorCode::NonBinaryValue,
                        "unit " + d.unit_ids[static_cast<std::size_t>(i)] + " period " + std::to_string(s + 1) +
                            " has value " + std::to_string(y));
            }
    } else if (d.kind.bounds) {
        const Bounds b = *d.kind.bounds;
        require(b.lower < b.upper, ErrorCode::OutOfBounds, "declared bounds need a < b");
        for (Index i : d.control_indices())
            for (Index s = 0; s < t; ++s) {
                const double y = d.outcomes(i, s);
                require(y >= b.lower && y <= b.upper, ErrorCode::OutOfBounds,
                        "control " + d.unit_ids[static_cast<std::size_t>(i)] + " period " + std::to_string(s + 1) +
                            " value " + std::to_string(y) + " outside declared bounds");
            }
    }

    if (d.ground_truth) {
        require(d.ground_truth->realized_untreated.size() == t && d.ground_truth->noiseless_mean.size() == t,
                ErrorCode::DimensionMismatch, "ground truth must cover all T periods");
    }
    return d;
}

/// Feature matrix with one row per unit: covariates first, then the
/// pre-treatment outcomes in time order.
inline Eigen::MatrixXd build_features(const PanelDataset& d) {
    const Index p = d.n_covariates();
    Eigen::MatrixXd x(d.n_units(), p + d.t0);
    x.leftCols(p) = d.covariates;
    x.rightCols(d.t0) = d.outcomes.leftCols(d.t0);
    return x;
}

/// Rows of `features` belonging to the controls, in control order.
inline Eigen::MatrixXd control_rows(const PanelDataset& d, const Eigen::MatrixXd& features) {
    const auto controls = d.control_indices();
    Eigen::MatrixXd out(static_cast<Index>(controls.size()), features.cols());
    for (std::size_t j = 0; j < controls.size(); ++j) out.row(static_cast<Index>(j)) = features.row(controls[j]);
    return out;
}

}  // namespace tsc
