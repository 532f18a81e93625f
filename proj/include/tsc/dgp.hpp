#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "tsc/error.hpp"
#include "tsc/panel.hpp"
#include "tsc/random.hpp"

namespace tsc::dgp {

enum class Kind { Linear, Hinge, Quadratic, TimeVarying };

inline constexpr Kind kAllKinds[] = {Kind::Linear, Kind::Hinge, Kind::Quadratic, Kind::TimeVarying};

constexpr std::string_view to_string(Kind k) {
    switch (k) {
        case Kind::Linear: return "linear";
        case Kind::Hinge: return "hinge";
        case Kind::Quadratic: return "quadratic";
        case Kind::TimeVarying: return "time_varying";
    }
    return "unknown";
}

inline std::optional<Kind> parse_kind(std::string_view s) {
    if (s == "linear") return Kind::Linear;
    if (s == "hinge") return Kind::Hinge;
    if (s == "quadratic") return Kind::Quadratic;
    if (s == "time_varying" || s == "timevarying" || s == "time-varying") return Kind::TimeVarying;
    return std::nullopt;
}

struct Config {
    Kind kind = Kind::Linear;
    int n_units = 5;
    std::optional<int> horizon_T;  // 50, or 100 for TimeVarying
    int p = 12;
    Bounds covariate_range{0.0, 10.0};
    OutcomeType outcome = OutcomeType::Continuous;
    std::uint64_t seed = 0;
    std::optional<double> noise_sd;  // 1, or 0.8 for TimeVarying

    int periods() const { return horizon_T.value_or(kind == Kind::TimeVarying ? 100 : 50); }
    double noise() const { return noise_sd.value_or(kind == Kind::TimeVarying ? 0.8 : 1.0); }
};

inline void check(const Config& c) {
    require(c.n_units >= 2, ErrorCode::InvalidConfig, "n_units must be at least 2");
    require(c.periods() >= 2, ErrorCode::InvalidConfig, "T must be at least 2");
    require(c.p >= 1, ErrorCode::InvalidConfig, "p must be at least 1");
    require(c.covariate_range.lower < c.covariate_range.upper, ErrorCode::InvalidConfig, "empty covariate range");
    require(c.noise() >= 0.0, ErrorCode::InvalidConfig, "noise_sd must be nonnegative");
}

/// Additive parts of the noiseless mean: trend, unit effect, interaction.
struct Components {
    double delta = 0.0;
    double r = 0.0;
    double lambda = 0.0;
    double total() const { return delta + r + lambda; }
};

inline double positive_part(double u) { return u > 0.0 ? u : 0.0; }

inline Components linear_components(const Eigen::VectorXd& x, double t) {
    const double s = x.sum();
    return {0.05 * t, 0.02 * s, 0.1 * s + 0.05 * t + 0.004 * s * t};
}

inline constexpr double kHingeTime = 10.0;
inline constexpr double kHingeCovariate = 0.0;

inline Components hinge_components(const Eigen::VectorXd& x, double t) {
    const double s = x.sum();
    const double mean = s / static_cast<double>(x.size());
    return {0.03 * t + 0.04 * positive_part(t - kHingeTime),
            0.1 * s + 0.15 * positive_part(s - kHingeCovariate),
            0.1 * mean + 0.04 * t + 0.02 * mean * positive_part(t - kHingeTime)};
}

/// The unit component is written per coordinate around the covariate mean;
/// it is read here as the sum over coordinates, so its linear part vanishes
/// and the quadratic part is 0.03 times the covariate dispersion.
inline Components quadratic_components(const Eigen::VectorXd& x, double t) {
    const double mean = x.mean();
    double r = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double c = x(i) - mean;
        r += 0.1 * c + 0.03 * c * c;
    }
    return {0.04 * t + 0.002 * t * t, r, 0.1 * mean + 0.05 * t + 0.01 * mean * t + 0.005 * mean * mean};
}

inline double eval_linear(const Eigen::VectorXd& x, double t) { return linear_components(x, t).total(); }
inline double eval_hinge(const Eigen::VectorXd& x, double t) { return hinge_components(x, t).total(); }
inline double eval_quadratic(const Eigen::VectorXd& x, double t) { return quadratic_components(x, t).total(); }

// ---------------------------------------------------------------------------
// Time-varying factor model

/// Panel-level state of the factor model: standardized covariates, rescaled
/// loadings and unit intercepts.
struct FactorState {
    Eigen::MatrixXd z;              // N x p standardized covariates
    Eigen::MatrixXd loadings;       // N x 3, after rescaling and the treated-unit shift
    Eigen::MatrixXd raw_loadings;   // N x 3, rescaled, before the shift
    Eigen::VectorXd mu;             // N
    int periods = 0;
};

inline double rescaled_time(double t, int periods) { return (t - 1.0) / (static_cast<double>(periods) - 1.0); }

inline double factor_trend(double tau) { return 2.0 + 18.0 * tau + 14.0 * tau * tau; }

inline Eigen::Vector3d factor_basis(double tau) {
    return {tau - 0.5, (tau - 0.5) * (tau - 0.5) - 1.0 / 12.0, std::sin(2.0 * std::numbers::pi * tau)};
}

/// Sparse covariate-to-factor map; entries beyond the first nine covariates are zero.
inline Eigen::MatrixXd factor_theta(int p) {
    static const double kTheta[3][9] = {{1.0, -0.6, 0.4, 0, 0, 0, 0, 0, 0},
                                        {0, 0, 0, 1.2, -0.5, 0.3, 0, 0, 0},
                                        {0, 0, 0, 0, 0, 0, 0.8, 0.4, -0.7}};
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(3, p);
    for (int f = 0; f < 3; ++f)
        for (int k = 0; k < std::min(p, 9); ++k) theta(f, k) = kTheta[f][k];
    return theta;
}

inline Eigen::VectorXd factor_intercept_weights(int p) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(p);
    const double head[3] = {0.6, -0.4, 0.3};
    for (int k = 0; k < std::min(p, 3); ++k) a(k) = head[k];
    return a;
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_sd(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

inline FactorState make_factor_state(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& xi,
                                     Index treated_index, int periods) {
    const Index n = covariates.rows();
    const int p = static_cast<int>(covariates.cols());
    FactorState st;
    st.periods = periods;
    st.z.resize(n, p);
    for (int k = 0; k < p; ++k) {
        const Eigen::VectorXd col = covariates.col(k);
        st.z.col(k) = ((col.array() - col.mean()) / (sample_sd(col) + 1e-6)).matrix();
    }
    st.mu = st.z * factor_intercept_weights(p) + 0.8 * xi;

    const Eigen::Vector3d scale(2.0, 4.0, 1.0);
    st.raw_loadings = st.z * factor_theta(p).transpose();
    for (int f = 0; f < 3; ++f) {
        const Eigen::VectorXd col = st.raw_loadings.col(f);
        st.raw_loadings.col(f) = scale(f) * col / (sample_sd(col) + 1e-6);
    }
    st.loadings = st.raw_loadings;
    st.loadings(treated_index, 1) += 2.0;
    return st;
}

inline double eval_timevarying(const FactorState& st, Index unit, double t) {
    const double tau = rescaled_time(t, st.periods);
    return st.mu(unit) + factor_trend(tau) + st.loadings.row(unit).dot(factor_basis(tau));
}

// ---------------------------------------------------------------------------

/// A generated panel together with everything needed to audit it.
struct Simulation {
    PanelDataset panel;
    Eigen::MatrixXd latent_mean;   // noiseless continuous mean, N x T
    Eigen::MatrixXd noise;         // N x T draws added to the mean
    Eigen::MatrixXd latent;        // latent_mean + noise
    std::optional<Eigen::MatrixXd> probabilities;  // binary panels
    std::optional<FactorState> factors;            // TimeVarying
};

/// Min-max maps the latent panel into [0, 1] over all units and periods,
/// then draws Bernoulli outcomes. Ground truth keeps the probabilities as
/// the noiseless mean and the draws as the realized outcome.
inline PanelDataset binarize(const PanelDataset& latent, std::uint64_t seed, Eigen::MatrixXd* probabilities = nullptr) {
    require(!latent.kind.is_binary(), ErrorCode::InvalidConfig, "panel is already binary");
    const double lo = latent.outcomes.minCoeff();
    const double hi = latent.outcomes.maxCoeff();
    require(hi > lo, ErrorCode::DegenerateRange, "latent panel is constant; min-max normalization undefined");

    const Eigen::MatrixXd pi = ((latent.outcomes.array() - lo) / (hi - lo)).matrix();
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PanelDataset out = latent;
    out.kind = OutcomeKind::binary();
    for (Index i = 0; i < pi.rows(); ++i)
        for (Index s = 0; s < pi.cols(); ++s) out.outcomes(i, s) = unit(rng) < pi(i, s) ? 1.0 : 0.0;
    out.ground_truth = GroundTruth{out.outcomes.row(out.treated_index).transpose(),
                                   pi.row(out.treated_index).transpose()};
    if (probabilities) *probabilities = pi;
    return out;
}

/// Untreated panel from one of the four generators. Unit 0 is the treated
/// unit; no effect is injected, so its post-treatment outcomes are the
/// ground truth. Draw order: covariates (row-major), unit intercept shocks
/// (TimeVarying only), then noise (row-major). The data do not depend on t0.
inline Simulation generate(const Config& cfg, Index t0) {
    check(cfg);
    const int n = cfg.n_units;
    const int periods = cfg.periods();
    require(t0 >= 1 && t0 < periods, ErrorCode::InvalidT0, "t0 must lie in [1, T-1]");

    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> cov(cfg.covariate_range.lower, cfg.covariate_range.upper);
    std::normal_distribution<double> normal(0.0, 1.0);

    Simulation sim;
    PanelDataset& d = sim.panel;
    d.covariates.resize(n, cfg.p);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < cfg.p; ++k) d.covariates(i, k) = cov(rng);

    if (cfg.kind == Kind::TimeVarying) {
        Eigen::VectorXd xi(n);
        for (int i = 0; i < n; ++i) xi(i) = normal(rng);
        sim.factors = make_factor_state(d.covariates, xi, 0, periods);
    }

    sim.latent_mean.resize(n, periods);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd x = d.covariates.row(i).transpose();
        for (int s = 0; s < periods; ++s) {
            const double t = s + 1;
            switch (cfg.kind) {
                case Kind::Linear: sim.latent_mean(i, s) = eval_linear(x, t); break;
                case Kind::Hinge: sim.latent_mean(i, s) = eval_hinge(x, t); break;
                case Kind::Quadratic: sim.latent_mean(i, s) = eval_quadratic(x, t); break;
                case Kind::TimeVarying: sim.latent_mean(i, s) = eval_timevarying(*sim.factors, i, t); break;
            }
        }
    }
    sim.noise.resize(n, periods);
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < periods; ++s) sim.noise(i, s) = cfg.noise() * normal(rng);
    sim.latent = sim.latent_mean + sim.noise;

    d.outcomes = sim.latent;
    d.treated_index = 0;
    d.t0 = t0;
    d.kind = OutcomeKind::continuous();
    d.unit_ids.push_back("treated");
    for (int i = 1; i < n; ++i) d.unit_ids.push_back("control_" + std::to_string(i));
    for (int s = 0; s < periods; ++s) d.time_labels.push_back(std::to_string(s + 1));
    d.ground_truth = GroundTruth{sim.latent.row(0).transpose(), sim.latent_mean.row(0).transpose()};

    if (cfg.outcome == OutcomeType::Binary) {
        Eigen::MatrixXd pi;
        d = binarize(d, derive_seed(cfg.seed, "binarize"), &pi);
        sim.probabilities = std::move(pi);
    }
    d = validate(std::move(d));
    return sim;
}

inline PanelDataset gen_panel(const Config& cfg, Index t0) { return generate(cfg, t0).panel; }

}  // namespace tsc::dgp
