#pragma once

// Squared-loss oracles: an exact min-norm reference and the approximate
// oracles that reduce regression to convex feasibility.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsrlsvi/errors.hpp"
#include "nsrlsvi/feasibility.hpp"
#include "nsrlsvi/linalg.hpp"

namespace nsrlsvi {

/// Weighted regression data. Row i stands for weights[i] samples at
/// features[i] whose targets average to targets[i]; `offset` carries the
/// within-row spread so that objective() equals the sum over raw samples.
struct RegressionProblem {
    std::vector<Vector> features;
    std::vector<double> targets;
    std::vector<double> weights;  // empty means all ones
    double offset = 0.0;
    double W = 1.0;  // width of O(W) = {theta : |<theta, phi>| <= W for every feature}

    std::size_t size() const { return features.size(); }
    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
    double total_weight() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += weight(i);
        return s;
    }

    double objective(const Vector& theta) const {
        double s = offset;
        for (std::size_t i = 0; i < size(); ++i) {
            const double e = theta.dot(features[i]) - targets[i];
            s += weight(i) * e * e;
        }
        return s;
    }

    double max_residual(const Vector& theta) const {
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i) m = std::max(m, std::abs(theta.dot(features[i]) - targets[i]));
        return m;
    }
};

/// Exhaustive linear optimization over a finite feature set.
class LinOpt {
public:
    struct Hit {
        std::size_t index = 0;
        double value = -std::numeric_limits<double>::infinity();
    };

    explicit LinOpt(std::vector<Vector> features) : features_(std::move(features)) {
        if (features_.empty()) throw ConfigError("LinOpt: empty feature set");
        stacked_ = stack_columns(features_, features_.front().size());
    }

    Hit argmax(const Vector& theta) const {
        require_same_dim(theta.size(), stacked_.rows(), "LinOpt");
        const Vector v = stacked_.transpose() * theta;
        Hit h;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (v[i] > h.value) h = {static_cast<std::size_t>(i), v[i]};
        }
        return h;
    }

    /// max over features of |<theta, phi>|.
    double max_abs(const Vector& theta) const {
        return (stacked_.transpose() * theta).cwiseAbs().maxCoeff();
    }

    const Vector& feature(std::size_t i) const { return features_[i]; }
    const std::vector<Vector>& features() const { return features_; }
    Eigen::Index dim() const { return stacked_.rows(); }

private:
    std::vector<Vector> features_;
    Matrix stacked_;
};

/// Constant with O(W) inside B_inf(W * R_feat): for d independent features
/// F, R_feat = max_i ||row_i(F^{-T})||_1. nullopt when the features do not
/// span R^d.
inline std::optional<double> feature_radius(std::span<const Vector> features) {
    if (features.empty()) return std::nullopt;
    const Eigen::Index d = features.front().size();
    const auto pick = greedy_spanning_subset(features, d);
    if (static_cast<Eigen::Index>(pick.size()) < d) return std::nullopt;
    Matrix F(d, d);
    for (Eigen::Index j = 0; j < d; ++j) F.col(j) = features[pick[static_cast<std::size_t>(j)]];
    const Matrix inv_t = F.transpose().fullPivLu().inverse();
    return inv_t.cwiseAbs().rowwise().sum().maxCoeff();
}

struct LsqResult {
    Vector theta;
    bool in_class = true;  // theta in O(W) up to 1e-9 relative
    bool fallback = false;  // the constrained approximate oracle replaced the min-norm solution
};

/// Min-norm minimizer of sum_i w_i (<theta, phi_i> - y_i)^2 (SVD of the
/// sqrt(w)-scaled rows, relative cutoff tol::rank), followed by two rounds of
/// iterative refinement against the unscaled residuals.
inline Vector min_norm_lsq(const RegressionProblem& p, Eigen::Index d) {
    if (p.size() == 0) return Vector::Zero(d);
    Matrix X(static_cast<Eigen::Index>(p.size()), d);
    Vector y(static_cast<Eigen::Index>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) {
        require_same_dim(p.features[i].size(), d, "min_norm_lsq");
        const double s = std::sqrt(p.weight(i));
        X.row(static_cast<Eigen::Index>(i)) = s * p.features[i].transpose();
        y[static_cast<Eigen::Index>(i)] = s * p.targets[i];
    }
    Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int r = numerical_rank(svd.singularValues());
    if (r == 0) return Vector::Zero(d);
    const auto solve = [&](const Vector& rhs) -> Vector {
        const Vector coef = (svd.matrixU().leftCols(r).transpose() * rhs).cwiseQuotient(svd.singularValues().head(r));
        return svd.matrixV().leftCols(r) * coef;
    };
    Vector theta = solve(y);
    for (int pass = 0; pass < 2; ++pass) {
        Vector res(y.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            res[static_cast<Eigen::Index>(i)] = std::sqrt(p.weight(i)) * (p.targets[i] - theta.dot(p.features[i]));
        }
        if (res.cwiseAbs().maxCoeff() == 0.0) break;
        theta += solve(res);
    }
    return theta;
}

/// |<theta, phi>| <= width for every feature; the violating feature otherwise.
inline std::optional<Halfspace> separation_for_width(const Vector& theta, double width, const LinOpt& linopt) {
    const LinOpt::Hit up = linopt.argmax(theta);
    const LinOpt::Hit down = linopt.argmax(-theta);
    if (up.value >= down.value && up.value > width) return Halfspace{linopt.feature(up.index), width};
    if (down.value > width) return Halfspace{-linopt.feature(down.index), width};
    return std::nullopt;
}

/// Data slabs |<theta, phi_i> - y_i| <= eps, then the O(W + eps) bound via two LinOpt calls.
inline std::optional<Halfspace> separation_for_Kapx(const Vector& theta, const RegressionProblem& p, double eps,
                                                     const LinOpt& linopt) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = theta.dot(p.features[i]) - p.targets[i];
        if (v > eps) return Halfspace{p.features[i], p.targets[i] + eps};
        if (v < -eps) return Halfspace{-p.features[i], eps - p.targets[i]};
    }
    return separation_for_width(theta, p.W + eps, linopt);
}

struct ApxOptions {
    double eps = 1e-3;
    double delta = 0.1;
    WalkConfig walk;
};

/// Feasible point of K_apx: every data slab within eps and theta in O(W + eps).
/// Requires the features of `linopt` to span R^d.
inline Vector apx_value_oracle(const RegressionProblem& p, const ApxOptions& opt, const LinOpt& linopt, Rng& rng) {
    const Eigen::Index d = linopt.dim();
    const auto rfeat = feature_radius(linopt.features());
    if (!rfeat) throw ConfigError("apx_value_oracle: the feature set does not span R^d, so K_apx is unbounded");
    ConvexProblem prob;
    prob.dim = d;
    prob.oracle = [&](const Vector& theta) { return separation_for_Kapx(theta, p, opt.eps, linopt); };
    prob.r = opt.eps / std::sqrt(static_cast<double>(d));
    prob.R = (p.W + opt.eps) * *rfeat;
    prob.delta = opt.delta;
    const FeasibilityResult res = solve_feasibility(prob, opt.walk, rng);
    if (!res.point) {
        throw OracleFailure("apx_value_oracle: no point found after " + std::to_string(res.oracle_calls) +
                            " separation queries; the data admit no zero-residual fit in O(W)");
    }
    return *res.point;
}

struct RewardOracleResult {
    Vector omega;
    double delta_level = 0.0;  // first grid value found feasible
    double objective = 0.0;
    int stalled_levels = 0;  // grid levels abandoned because the walk stalled
};

/// Scans Delta over a grid of step eps/2 and returns a point of
/// {objective <= Delta + eps/2} intersected with O(1 + eps) for the first
/// Delta the solver finds feasible. Grid points whose level lies below the
/// unconstrained minimum are provably empty and skipped. A level on which the
/// walk stalls counts as infeasible and the scan moves on.
inline RewardOracleResult apx_reward_oracle(const RegressionProblem& p, const ApxOptions& opt, const LinOpt& linopt,
                                            Rng& rng) {
    const Eigen::Index d = linopt.dim();
    const auto rfeat = feature_radius(linopt.features());
    if (!rfeat) throw ConfigError("apx_reward_oracle: the feature set does not span R^d, so the search set is unbounded");
    const double step = 0.5 * opt.eps;
    const double lower = p.objective(min_norm_lsq(p, d));
    const double upper = p.objective(Vector::Zero(d));
    const double n = std::max(1.0, p.total_weight());

    long k = std::max(0L, static_cast<long>(std::floor((lower - step) / step)));
    int stalled = 0;
    for (;; ++k) {
        const double delta_level = static_cast<double>(k) * step;
        const double level = delta_level + step;
        ConvexProblem prob;
        prob.dim = d;
        prob.oracle = [&](const Vector& w) -> std::optional<Halfspace> {
            const double f = p.objective(w);
            if (f > level) {
                Vector grad = Vector::Zero(d);
                for (std::size_t i = 0; i < p.size(); ++i) {
                    grad += 2.0 * p.weight(i) * (w.dot(p.features[i]) - p.targets[i]) * p.features[i];
                }
                return Halfspace{grad, grad.dot(w) - (f - level)};
            }
            return separation_for_width(w, 1.0 + opt.eps, linopt);
        };
        // A cube of this radius around a minimizer raises the objective by at most eps/2.
        prob.r = opt.eps / (std::sqrt(static_cast<double>(d)) * (10.0 * n + 1.0));
        prob.R = (1.0 + opt.eps) * *rfeat;
        prob.delta = opt.delta;
        try {
            const FeasibilityResult res = solve_feasibility(prob, opt.walk, rng);
            if (res.point) return {*res.point, delta_level, p.objective(*res.point), stalled};
        } catch (const StallError&) {
            ++stalled;
        }
        if (delta_level > upper + opt.eps) break;
    }
    throw OracleFailure("apx_reward_oracle: every Delta on the grid was infeasible");
}

/// Min-norm least squares, then a membership check for O(W). On violation the
/// constrained approximate oracle takes over when the features span R^d;
/// otherwise the unconstrained solution is kept and flagged.
inline LsqResult exact_lsq(const RegressionProblem& p, const LinOpt& linopt, std::optional<ApxOptions> fallback = {},
                           Rng* rng = nullptr, bool reward = false) {
    LsqResult out;
    out.theta = min_norm_lsq(p, linopt.dim());
    out.in_class = linopt.max_abs(out.theta) <= p.W * (1.0 + 1e-9) + 1e-12;
    if (out.in_class || !fallback || !rng || !feature_radius(linopt.features())) return out;
    if (reward) {
        out.theta = apx_reward_oracle(p, *fallback, linopt, *rng).omega;
    } else {
        out.theta = apx_value_oracle(p, *fallback, linopt, *rng);
    }
    out.fallback = true;
    out.in_class = linopt.max_abs(out.theta) <= p.W + fallback->eps;
    return out;
}

}  // namespace nsrlsvi
