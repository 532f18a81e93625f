#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tsc/error.hpp"

namespace tsc {

/// Nonnegative weights over the control units that sum to one, in
/// control-set order.
class SimplexWeights {
public:
    static constexpr double kSumTolerance = 1e-10;

    SimplexWeights() = default;

    explicit SimplexWeights(Eigen::VectorXd w) : w_(std::move(w)) {
        require(w_.size() >= 1, ErrorCode::Empty, "simplex weights need at least one entry");
        require(w_.allFinite(), ErrorCode::NonFiniteInput, "simplex weights must be finite");
        require(w_.minCoeff() >= 0.0, ErrorCode::OutOfBounds, "simplex weights must be nonnegative");
        require(std::abs(w_.sum() - 1.0) <= kSumTolerance, ErrorCode::OutOfBounds,
                "simplex weights must sum to one (sum=" + std::to_string(w_.sum()) + ")");
    }

    static SimplexWeights uniform(Eigen::Index n) {
        return SimplexWeights(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
    }

    const Eigen::VectorXd& vector() const { return w_; }
    Eigen::Index size() const { return w_.size(); }
    double operator[](Eigen::Index j) const { return w_(j); }

private:
    Eigen::VectorXd w_;
};

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding: w_j = max(v_j - theta, 0) with theta chosen so the
/// positive part sums to one.
inline SimplexWeights project_simplex(const Eigen::VectorXd& v) {
    require(v.size() >= 1, ErrorCode::Empty, "cannot project an empty vector");
    require(v.allFinite(), ErrorCode::NonFiniteInput, "projection input must be finite");

    std::vector<double> sorted(v.data(), v.data() + v.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double running = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        running += sorted[k];
        const double candidate = (running - 1.0) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) theta = candidate;
    }
    Eigen::VectorXd w = (v.array() - theta).max(0.0).matrix();
    // Thresholding is exact up to rounding of the running sum.
    w /= w.sum();
    return SimplexWeights(std::move(w));
}

inline double weighted_average(const SimplexWeights& w, const Eigen::VectorXd& values) {
    require(w.size() == values.size(), ErrorCode::LengthMismatch,
            "weights have " + std::to_string(w.size()) + " entries, values " + std::to_string(values.size()));
    // Self-normalized, numerator and denominator accumulated in the same order.
    // Rounding is monotone, so values in [0, 1] average to a number in [0, 1]
    // even when the weights sum to 1 + ulp.
    double num = 0.0, den = 0.0;
    for (Eigen::Index j = 0; j < values.size(); ++j) {
        num += w[j] * values(j);
        den += w[j];
    }
    return num / den;
}

}  // namespace tsc
