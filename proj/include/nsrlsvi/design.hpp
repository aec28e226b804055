#pragma once

// Approximate D-optimal designs by Frank-Wolfe with away steps, certified
// through the Kiefer-Wolfowitz bound g(rho) <= d (1 + eps).

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nsrlsvi/errors.hpp"
#include "nsrlsvi/linalg.hpp"

namespace nsrlsvi {

struct DesignMeasure {
    std::vector<Vector> support;
    std::vector<double> weights;
    Eigen::Index dim = 0;

    std::size_t size() const { return support.size(); }

    /// Lambda(rho) = sum_i rho_i phi_i phi_i^T
    Matrix moment() const {
        Matrix m = Matrix::Zero(dim, dim);
        for (std::size_t i = 0; i < support.size(); ++i) {
            m.noalias() += weights[i] * support[i] * support[i].transpose();
        }
        return m;
    }
};

struct DesignTrace {
    int iterations = 0;
    double g = 0.0;
    std::vector<double> log_det;  // one entry per iteration, rank-restricted
};

namespace detail {

/// Removes support points while |support| > k(k+1)/2. Each step moves the
/// weights along a null direction c of w -> sum_i w_i x_i x_i^T with
/// sum(c) <= 0 until one weight vanishes, then renormalizes. The moment
/// matrix only grows by the factor 1/sum(w), so g(rho) never increases.
inline void reduce_support(const std::vector<Vector>& pts, std::vector<double>& w) {
    const Eigen::Index k = pts.front().size();
    const std::size_t cap = static_cast<std::size_t>(k * (k + 1) / 2);
    for (;;) {
        std::vector<std::size_t> live;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] > 0.0) live.push_back(i);
        }
        if (live.size() <= cap) return;
        Matrix A(static_cast<Eigen::Index>(cap), static_cast<Eigen::Index>(live.size()));
        for (std::size_t j = 0; j < live.size(); ++j) {
            const Vector& x = pts[live[j]];
            Eigen::Index r = 0;
            for (Eigen::Index a = 0; a < k; ++a) {
                for (Eigen::Index b = a; b < k; ++b) A(r++, static_cast<Eigen::Index>(j)) = x[a] * x[b];
            }
        }
        Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
        Vector c = svd.matrixV().col(svd.matrixV().cols() - 1);
        if (c.sum() > 0.0) c = -c;
        double t = std::numeric_limits<double>::infinity();
        std::size_t hit = live.size();
        for (std::size_t j = 0; j < live.size(); ++j) {
            const double cj = c[static_cast<Eigen::Index>(j)];
            if (cj < 0.0 && w[live[j]] / -cj < t) {
                t = w[live[j]] / -cj;
                hit = j;
            }
        }
        if (hit == live.size()) return;
        double total = 0.0;
        for (std::size_t j = 0; j < live.size(); ++j) {
            double& wi = w[live[j]];
            wi = j == hit ? 0.0 : std::max(0.0, wi + t * c[static_cast<Eigen::Index>(j)]);
            total += wi;
        }
        for (double& wi : w) wi /= total;
    }
}

/// Core iteration over coordinates that span R^k.
inline std::vector<double> frank_wolfe_weights(const std::vector<Vector>& pts, double eps_fw, int max_iter,
                                               DesignTrace* trace) {
    const Eigen::Index k = pts.front().size();
    const double dk = static_cast<double>(k);
    const std::size_t n = pts.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t i : greedy_spanning_subset(pts, k)) w[i] = 1.0 / dk;

    Matrix x(k, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) x.col(static_cast<Eigen::Index>(i)) = pts[i];

    double best_g = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        Matrix lam = Matrix::Zero(k, k);
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] > 0.0) lam.noalias() += w[i] * pts[i] * pts[i].transpose();
        }
        Eigen::LLT<Matrix> llt(lam);
        if (llt.info() != Eigen::Success) throw DesignError("frank_wolfe_design: design matrix became singular");
        const Matrix solved = llt.solve(x);
        const Eigen::VectorXd g = (x.array() * solved.array()).colwise().sum().transpose();

        if (trace) trace->log_det.push_back(2.0 * llt.matrixLLT().diagonal().array().log().sum());

        Eigen::Index j = 0;
        const double gmax = g.maxCoeff(&j);
        best_g = std::min(best_g, gmax);
        if (gmax <= dk * (1.0 + eps_fw)) {
            // Prune tiny weights; keep iterating if pruning broke the certificate.
            bool pruned = false;
            double total = 0.0;
            for (double& wi : w) {
                if (wi > 0.0 && wi < 1e-6) {
                    wi = 0.0;
                    pruned = true;
                }
                total += wi;
            }
            for (double& wi : w) wi /= total;
            if (!pruned) {
                reduce_support(pts, w);
                if (trace) {
                    trace->iterations = it;
                    trace->g = gmax;
                }
                return w;
            }
            continue;
        }

        // Worst support point for a possible away step.
        std::size_t away = n;
        double gmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] > 0.0 && g[static_cast<Eigen::Index>(i)] < gmin) {
                gmin = g[static_cast<Eigen::Index>(i)];
                away = i;
            }
        }

        if (away < n && dk - gmin > gmax - dk && w[away] < 1.0) {
            const double lo = -w[away] / (1.0 - w[away]);
            double alpha = gmin > 1.0 ? (gmin - dk) / (dk * (gmin - 1.0)) : lo;
            alpha = std::max(alpha, lo);
            for (double& wi : w) wi *= (1.0 - alpha);
            w[away] += alpha;
            if (alpha == lo || w[away] < 0.0) w[away] = 0.0;
        } else {
            const double alpha = (gmax - dk) / (dk * (gmax - 1.0));
            for (double& wi : w) wi *= (1.0 - alpha);
            w[static_cast<std::size_t>(j)] += alpha;
        }
    }
    throw DesignError("frank_wolfe_design: max_iter exhausted, best g(rho) = " + std::to_string(best_g), best_g);
}

inline DesignMeasure collect(std::span<const Vector> features, const std::vector<double>& w, Eigen::Index d) {
    DesignMeasure out;
    out.dim = d;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            out.support.push_back(features[i]);
            out.weights.push_back(w[i]);
        }
    }
    return out;
}

}  // namespace detail

/// max over features of ||phi||^2 in Lambda(rho)^{-1}. Throws if Lambda(rho) is singular.
inline double design_g_value(const DesignMeasure& design, std::span<const Vector> features) {
    const Matrix lam = design.moment();
    Eigen::LLT<Matrix> llt(lam);
    if (llt.info() != Eigen::Success || numerical_rank(Eigen::JacobiSVD<Matrix>(lam).singularValues()) < lam.rows()) {
        throw DesignError("design_g_value: singular design matrix");
    }
    double g = 0.0;
    for (const auto& phi : features) {
        require_same_dim(phi.size(), lam.rows(), "design_g_value");
        g = std::max(g, phi.dot(llt.solve(phi)));
    }
    return g;
}

/// Same quantity with the pseudo-inverse, for designs whose features span a
/// proper subspace; equals the span dimension at the optimum.
inline double design_g_value_on_span(const DesignMeasure& design, std::span<const Vector> features) {
    const Matrix pinv = pseudo_inverse(design.moment());
    double g = 0.0;
    for (const auto& phi : features) g = std::max(g, phi.dot(pinv * phi));
    return g;
}

/// Frank-Wolfe (with away steps and exact line search) for the D-criterion.
/// Requires span(features) = R^d.
inline DesignMeasure frank_wolfe_design(std::span<const Vector> features, double eps_fw, int max_iter,
                                        DesignTrace* trace = nullptr) {
    if (features.empty()) throw DesignError("frank_wolfe_design: empty feature set");
    if (!(eps_fw > 0.0)) throw DesignError("frank_wolfe_design: eps_fw must be positive");
    const Eigen::Index d = features.front().size();
    const Matrix stacked = stack_columns(features, d);
    const int r = static_cast<int>(span_basis(stacked).cols());
    if (r < d) {
        throw DesignError("frank_wolfe_design: features span rank " + std::to_string(r) + " < d = " +
                          std::to_string(d) + " (rank deficiency " + std::to_string(d - r) + ")");
    }
    std::vector<Vector> pts(features.begin(), features.end());
    return detail::collect(features, detail::frank_wolfe_weights(pts, eps_fw, max_iter, trace), d);
}

/// Design over span(features) when it is a proper subspace of R^d: the
/// iteration runs in an orthonormal basis of the span and the support is
/// returned in the original coordinates. Lambda(rho) then has rank r < d.
inline DesignMeasure frank_wolfe_design_on_span(std::span<const Vector> features, double eps_fw, int max_iter,
                                                DesignTrace* trace = nullptr) {
    if (features.empty()) throw DesignError("frank_wolfe_design_on_span: empty feature set");
    const Eigen::Index d = features.front().size();
    const Matrix basis = span_basis(stack_columns(features, d));
    if (basis.cols() == d) return frank_wolfe_design(features, eps_fw, max_iter, trace);
    if (basis.cols() == 0) throw DesignError("frank_wolfe_design_on_span: all features are zero");
    std::vector<Vector> coords;
    coords.reserve(features.size());
    for (const auto& phi : features) coords.push_back(basis.transpose() * phi);
    return detail::collect(features, detail::frank_wolfe_weights(coords, eps_fw, max_iter, trace), d);
}

}  // namespace nsrlsvi
