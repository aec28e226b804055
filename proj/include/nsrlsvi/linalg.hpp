#pragma once

// Dense kernels shared by every module: projections onto data spans,
// pseudo-inverses, quadratic norms and rank detection.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nsrlsvi/errors.hpp"

namespace nsrlsvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace tol {
/// Singular values below rank * sigma_max are treated as zero.
inline constexpr double rank = 1e-8;
/// x is in span(P) iff ||(I-P)x|| <= span * max(||x||, 1).
inline constexpr double span = 1e-8;
inline constexpr double sym = 1e-10;
inline constexpr double psd = 1e-9;
inline constexpr double feature_norm = 1e-9;
}  // namespace tol

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* where) {
    if (a != b) {
        throw DimensionMismatch(std::string(where) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
    }
}

/// Stacks vectors as the columns of a d x n matrix.
inline Matrix stack_columns(std::span<const Vector> data, Eigen::Index d) {
    Matrix m(d, static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        require_same_dim(data[i].size(), d, "stack_columns");
        m.col(static_cast<Eigen::Index>(i)) = data[i];
    }
    return m;
}

/// Number of singular values above tol::rank * sigma_max.
inline int numerical_rank(const Eigen::VectorXd& singular_values) {
    if (singular_values.size() == 0) return 0;
    const double smax = singular_values.maxCoeff();
    if (!(smax > 0.0)) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
        if (singular_values[i] > tol::rank * smax) ++r;
    }
    return r;
}

/// Orthonormal basis (d x r) of the column span of `columns`.
inline Matrix span_basis(const Matrix& columns) {
    if (columns.cols() == 0) return Matrix(columns.rows(), 0);
    Eigen::JacobiSVD<Matrix> svd(columns, Eigen::ComputeThinU);
    const int r = numerical_rank(svd.singularValues());
    return svd.matrixU().leftCols(r);
}

/// Orthogonal projector onto span(data). Empty data gives the zero matrix.
inline Matrix projection_onto_span(std::span<const Vector> data, Eigen::Index d) {
    if (data.empty()) return Matrix::Zero(d, d);
    const Matrix basis = span_basis(stack_columns(data, d));
    return basis * basis.transpose();
}

inline Matrix projection_onto_span(std::span<const Vector> data) {
    if (data.empty()) throw DimensionMismatch("projection_onto_span: empty data needs an explicit dimension");
    return projection_onto_span(data, data.front().size());
}

/// Symmetric eigendecomposition restricted to the numerically nonzero part.
struct PsdFactor {
    Matrix vectors;  // d x r, orthonormal
    Vector values;   // r positive eigenvalues
};

inline PsdFactor psd_factor(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
    const Vector& ev = es.eigenvalues();
    const double emax = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (emax > 0.0 && ev[i] > tol::rank * emax) keep.push_back(i);
    }
    PsdFactor f{Matrix(m.rows(), static_cast<Eigen::Index>(keep.size())),
                Vector(static_cast<Eigen::Index>(keep.size()))};
    for (std::size_t j = 0; j < keep.size(); ++j) {
        f.vectors.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
        f.values[static_cast<Eigen::Index>(j)] = ev[keep[j]];
    }
    return f;
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix with relative cutoff tol::rank.
inline Matrix pseudo_inverse(const Matrix& m) {
    require_same_dim(m.rows(), m.cols(), "pseudo_inverse");
    const PsdFactor f = psd_factor(m);
    return f.vectors * f.values.cwiseInverse().asDiagonal() * f.vectors.transpose();
}

/// sqrt(max(x' M x, 0)).
inline double quad_norm(const Vector& x, const Matrix& m) {
    require_same_dim(x.size(), m.rows(), "quad_norm");
    require_same_dim(m.rows(), m.cols(), "quad_norm");
    return std::sqrt(std::max(x.dot(m * x), 0.0));
}

inline bool in_span(const Vector& x, const Matrix& projector) {
    require_same_dim(x.size(), projector.rows(), "in_span");
    const double residual = (x - projector * x).norm();
    return residual <= tol::span * std::max(x.norm(), 1.0);
}

/// Tracks span(data) for a growing data stream. Only vectors that enlarge the
/// span are kept, so the projector is an SVD of at most d stacked vectors and
/// equals the projector onto the full history.
class SpanTracker {
public:
    explicit SpanTracker(Eigen::Index d) : d_(d), projector_(Matrix::Zero(d, d)) {}

    Eigen::Index dim() const { return d_; }
    int rank() const { return static_cast<int>(basis_.size()); }
    const Matrix& projector() const { return projector_; }
    bool contains(const Vector& x) const { return in_span(x, projector_); }

    /// Adds x; returns true when the span grew.
    bool add(const Vector& x) {
        require_same_dim(x.size(), d_, "SpanTracker::add");
        if (contains(x)) return false;
        basis_.push_back(x);
        const Matrix b = span_basis(stack_columns(basis_, d_));
        if (b.cols() <= rank() - 1) {
            basis_.pop_back();
            return false;
        }
        projector_ = b * b.transpose();
        return true;
    }

private:
    Eigen::Index d_;
    std::vector<Vector> basis_;
    Matrix projector_;
};

/// Greedy pivoted Gram-Schmidt: indices of up to d vectors that span span(vectors).
inline std::vector<std::size_t> greedy_spanning_subset(std::span<const Vector> vectors, Eigen::Index d) {
    std::vector<std::size_t> chosen;
    std::vector<Vector> residual(vectors.begin(), vectors.end());
    double scale = 0.0;
    for (const auto& v : vectors) scale = std::max(scale, v.norm());
    while (static_cast<Eigen::Index>(chosen.size()) < d) {
        std::size_t best = residual.size();
        double best_norm = tol::rank * scale;
        for (std::size_t i = 0; i < residual.size(); ++i) {
            const double n = residual[i].norm();
            if (n > best_norm) {
                best_norm = n;
                best = i;
            }
        }
        if (best == residual.size()) break;
        chosen.push_back(best);
        const Vector q = residual[best] / best_norm;
        for (auto& r : residual) r -= q.dot(r) * q;
    }
    return chosen;
}

}  // namespace nsrlsvi
