#pragma once

// Convex feasibility from a separation oracle: approximate-centroid cutting
// planes whose centroids come from a ball walk over the current cut polytope.

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nsrlsvi/errors.hpp"
#include "nsrlsvi/linalg.hpp"
#include "nsrlsvi/rng.hpp"

namespace nsrlsvi {

/// The halfspace {z : <a, z> <= b}.
struct Halfspace {
    Vector a;
    double b = 0.0;
};

/// nullopt means the query point is inside.
using SeparationOracle = std::function<std::optional<Halfspace>(const Vector&)>;

struct ConvexProblem {
    Eigen::Index dim = 0;
    SeparationOracle oracle;
    double r = 1.0;  // K contains some c + B_inf(r)
    double R = 1.0;  // K is inside B_inf(R)
    double delta = 0.1;
};

/// Zero fields are filled from the problem by resolve().
struct WalkConfig {
    double eta = 0.0;       // default 0.5 / sqrt(d)
    long inner_steps = 0;   // default min(ceil(c3 * d^3 * N), max_inner_steps)
    int samples = 0;        // N, default ceil(cN * d * ln(1/delta))
    int max_cuts = 0;       // default max(1, floor(2 d ln(R / (delta r))))
    double c3 = 8.0;
    double cN = 4.0;
    long max_inner_steps = 512;
    bool tight_cuts = false;  // cut at the oracle's b instead of through the centroid
    long stall_limit = 10000;

    WalkConfig resolve(Eigen::Index d, double r, double R, double delta) const {
        WalkConfig c = *this;
        const double dd = static_cast<double>(d);
        if (c.eta <= 0.0) c.eta = 0.5 / std::sqrt(dd);
        if (c.samples <= 0) c.samples = std::max(1, static_cast<int>(std::ceil(cN * dd * std::log(1.0 / delta))));
        if (c.inner_steps <= 0) {
            const double full = std::ceil(c3 * dd * dd * dd * static_cast<double>(c.samples));
            c.inner_steps = static_cast<long>(std::min(full, static_cast<double>(std::max(1L, c.max_inner_steps))));
        }
        if (c.max_cuts <= 0) {
            c.max_cuts = std::max(1, static_cast<int>(std::floor(2.0 * dd * std::log(R / (delta * r)))));
        }
        return c;
    }
};

/// Cube [-R, R]^d intersected with the accumulated cuts.
class CutPolytope {
public:
    CutPolytope(Eigen::Index d, double R) : d_(d), R_(R), A_(0, d) {}

    bool contains(const Vector& z) const {
        if (z.lpNorm<Eigen::Infinity>() > R_) return false;
        if (A_.rows() == 0) return true;
        return ((A_ * z).array() <= b_.array()).all();
    }

    void cut(const Vector& a, double b) {
        A_.conservativeResize(A_.rows() + 1, Eigen::NoChange);
        b_.conservativeResize(b_.size() + 1);
        A_.row(A_.rows() - 1) = a.transpose();
        b_[b_.size() - 1] = b;
    }

    Eigen::Index dim() const { return d_; }
    double radius() const { return R_; }
    Eigen::Index num_cuts() const { return A_.rows(); }

private:
    Eigen::Index d_;
    double R_;
    Matrix A_;
    Vector b_;
};

struct SamplerResult {
    std::vector<Vector> points;
    double acceptance = 0.0;
};

/// Ball walk with proposals uniform on z + eta * Lambda^{1/2} * B_d(1), where
/// Lambda is the covariance of the warm-start points that lie in the region.
/// A single chain records its position after every `inner_steps` accepted
/// moves until 2N points are collected.
template <class Region>
SamplerResult ball_walk_sampler(const Region& inside, const std::vector<Vector>& warm_start, int N,
                                const WalkConfig& config, Rng& rng) {
    std::vector<Vector> kept;
    for (const auto& z : warm_start) {
        if (inside(z)) kept.push_back(z);
    }
    if (kept.empty()) throw StallError("ball_walk_sampler: no warm-start point lies in the region");
    const Eigen::Index d = kept.front().size();

    Vector mean = Vector::Zero(d);
    for (const auto& z : kept) mean += z;
    mean /= static_cast<double>(kept.size());
    Matrix cov = Matrix::Zero(d, d);
    for (const auto& z : kept) cov.noalias() += (z - mean) * (z - mean).transpose();
    cov /= static_cast<double>(kept.size());
    if (static_cast<Eigen::Index>(kept.size()) <= d) {
        // Too few points for a full-rank covariance: add an isotropic part.
        const double iso = cov.trace() / static_cast<double>(d);
        cov += (iso > 0.0 ? iso : 1.0) * Matrix::Identity(d, d);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    const Vector root = es.eigenvalues().cwiseMax(1e-12).cwiseSqrt();
    const Matrix shape = config.eta * es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();

    SamplerResult out;
    out.points.reserve(static_cast<std::size_t>(2 * N));
    Vector z = kept.front();
    long proposed = 0, accepted = 0;
    while (static_cast<int>(out.points.size()) < 2 * N) {
        long steps = 0, rejected_run = 0;
        while (steps < config.inner_steps) {
            const Vector cand = z + shape * uniform_in_ball(d, rng);
            ++proposed;
            if (inside(cand)) {
                z = cand;
                ++steps;
                ++accepted;
                rejected_run = 0;
            } else if (++rejected_run >= config.stall_limit) {
                std::ostringstream msg;
                msg << "ball_walk_sampler: " << rejected_run << " consecutive rejections (accepted " << accepted
                    << " of " << proposed << ", eta " << config.eta << ", warm start " << kept.size() << "/"
                    << warm_start.size() << ")";
                throw StallError(msg.str());
            }
        }
        out.points.push_back(z);
    }
    out.acceptance = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 1.0;
    return out;
}

struct FeasibilityResult {
    std::optional<Vector> point;  // empty: K reported empty
    int oracle_calls = 0;
    int cuts = 0;
    std::vector<double> acceptance;  // one entry per sampler call
};

/// Approximate-centroid cutting planes over D_1 = [-R, R]^d.
inline FeasibilityResult solve_feasibility(const ConvexProblem& problem, const WalkConfig& walk, Rng& rng) {
    if (!(problem.r > 0.0) || problem.r > problem.R) throw ConfigError("solve_feasibility: need 0 < r <= R");
    if (!(problem.delta > 0.0 && problem.delta < 1.0)) throw ConfigError("solve_feasibility: delta must be in (0,1)");
    if (problem.dim < 1 || !problem.oracle) throw ConfigError("solve_feasibility: problem is not well formed");
    const Eigen::Index d = problem.dim;
    const WalkConfig cfg = walk.resolve(d, problem.r, problem.R, problem.delta);
    const int N = cfg.samples;

    CutPolytope region(d, problem.R);
    const auto inside = [&region](const Vector& z) { return region.contains(z); };

    std::vector<Vector> pts;
    pts.reserve(static_cast<std::size_t>(2 * N));
    for (int i = 0; i < 2 * N; ++i) {
        Vector z(d);
        for (Eigen::Index k = 0; k < d; ++k) z[k] = (2.0 * uniform01(rng) - 1.0) * problem.R;
        pts.push_back(std::move(z));
    }

    FeasibilityResult res;
    for (int t = 0; t < cfg.max_cuts; ++t) {
        Vector centroid = Vector::Zero(d);
        for (int i = 0; i < N; ++i) centroid += pts[static_cast<std::size_t>(i)];
        centroid /= static_cast<double>(N);

        ++res.oracle_calls;
        const std::optional<Halfspace> sep = problem.oracle(centroid);
        if (!sep) {
            res.point = centroid;
            return res;
        }
        require_same_dim(sep->a.size(), d, "solve_feasibility hyperplane");
        const double at = sep->a.dot(centroid);
        if (!(at > sep->b)) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "separation oracle returned a hyperplane that does not exclude the query point (<a,z> = " << at
                << " <= b = " << sep->b << ")";
            throw ContractViolation(msg.str());
        }
        region.cut(sep->a, cfg.tight_cuts ? sep->b : at);
        ++res.cuts;
        if (t + 1 == cfg.max_cuts) break;

        const std::vector<Vector> warm(pts.begin(), pts.begin() + N);
        SamplerResult s = ball_walk_sampler(inside, warm, N, cfg, rng);
        res.acceptance.push_back(s.acceptance);
        pts = std::move(s.points);
    }
    return res;
}

}  // namespace nsrlsvi
