#pragma once

// Deterministic finite-horizon LQR, x' = A x + B u, with quadratic features
//
//   phi(x, u) = 1/2 * ( vec(x x^T) / (dx xb^2), vec(u u^T) / (m ub^2),
//                       vec(x u^T) / (sqrt(dx m) xb ub), 1 )
//
// (column-major vec), so ||phi|| <= 1 whenever |x_i| <= xb and |u_j| <= ub.
// Rewards are 1 - (x^T Q x + u^T R u) / C with C large enough to keep them in [0,1].

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nsrlsvi/envs/environment.hpp"
#include "nsrlsvi/errors.hpp"

namespace nsrlsvi {

struct LqrParams {
    Matrix A, B, Q, R;
    int horizon = 3;
    double state_box = 1.0;
    double control_box = 1.0;
    double init_box = 0.5;  // initial states are uniform on [-init_box, init_box]^dx
    int grid_points = 41;   // per control coordinate, used when the closed form is unavailable
    int net_size = 256;
    std::uint64_t net_seed = 0;
    RewardNoise noise = RewardNoise::bernoulli;
};

class LqrEnv {
public:
    using State = Vector;
    using Action = Vector;

    explicit LqrEnv(LqrParams p) : p_(std::move(p)) {
        validate();
        dx_ = p_.A.rows();
        m_ = p_.B.cols();
        d_ = dx_ * dx_ + m_ * m_ + dx_ * m_ + 1;
        const double xb = p_.state_box, ub = p_.control_box;
        sxx_ = 0.5 / (static_cast<double>(dx_) * xb * xb);
        suu_ = 0.5 / (static_cast<double>(m_) * ub * ub);
        sxu_ = 0.5 / (std::sqrt(static_cast<double>(dx_ * m_)) * xb * ub);
        const double qmax = Eigen::SelfAdjointEigenSolver<Matrix>(p_.Q).eigenvalues().maxCoeff();
        const double rmax = Eigen::SelfAdjointEigenSolver<Matrix>(p_.R).eigenvalues().maxCoeff();
        cost_scale_ = qmax * static_cast<double>(dx_) * xb * xb + rmax * static_cast<double>(m_) * ub * ub;
        riccati();
        build_omega();
        build_net();
    }

    const LqrParams& params() const { return p_; }
    Eigen::Index dim() const { return d_; }
    Eigen::Index state_dim() const { return dx_; }
    Eigen::Index control_dim() const { return m_; }
    int horizon() const { return p_.horizon; }
    RewardNoise reward_noise() const { return p_.noise; }
    double bellman_error() const { return 0.0; }
    double cost_scale() const { return cost_scale_; }
    int lbc_layers() const { return p_.horizon; }

    Vector feature(int, const State& x, const Action& u) const {
        require_same_dim(x.size(), dx_, "LqrEnv::feature state");
        require_same_dim(u.size(), m_, "LqrEnv::feature control");
        Vector phi(d_);
        Eigen::Index k = 0;
        for (Eigen::Index j = 0; j < dx_; ++j)
            for (Eigen::Index i = 0; i < dx_; ++i) phi[k++] = sxx_ * x[i] * x[j];
        for (Eigen::Index j = 0; j < m_; ++j)
            for (Eigen::Index i = 0; i < m_; ++i) phi[k++] = suu_ * u[i] * u[j];
        for (Eigen::Index j = 0; j < m_; ++j)
            for (Eigen::Index i = 0; i < dx_; ++i) phi[k++] = sxu_ * x[i] * u[j];
        phi[k] = 0.5;
        return phi;
    }

    State next_state(int h, const State& x, const Action& u) const {
        check_control(u);
        State next = p_.A * x + p_.B * u;
        if (next.lpNorm<Eigen::Infinity>() > p_.state_box * (1.0 + 1e-9)) {
            throw EnvError("lqr: state left the state box after step " + std::to_string(h + 1));
        }
        return next;
    }

    double mean_reward(int, const State& x, const Action& u) const {
        return 1.0 - (x.dot(p_.Q * x) + u.dot(p_.R * u)) / cost_scale_;
    }

    double sample_reward(int h, const State& x, const Action& u, Rng& rng) const {
        return draw_reward(mean_reward(h, x, u), p_.noise, rng);
    }

    State sample_initial(Rng& rng) const { return uniform_box(dx_, p_.init_box, rng); }
    Action random_action(int, const State&, Rng& rng) const { return uniform_box(m_, p_.control_box, rng); }

    /// Maximizes <w, phi(x, u)> over the control box: closed form when the
    /// control block is negative definite and the maximizer is inside the box,
    /// otherwise a grid search (flagged).
    Greedy<Action> greedy(int h, const State& x, const Vector& w) const {
        require_same_dim(w.size(), d_, "LqrEnv::greedy");
        const Blocks b = blocks(w);
        Eigen::LLT<Matrix> neg(-b.uu);
        if (neg.info() == Eigen::Success) {
            const Action u = 0.5 * neg.solve(b.xu.transpose() * x);
            if (u.lpNorm<Eigen::Infinity>() <= p_.control_box * (1.0 + 1e-12)) {
                return {u, w.dot(feature(h, x, u)), false};
            }
        }
        return grid_greedy(h, x, w);
    }

    /// V*_1(x) from the Riccati recursion. Exact when the Riccati controls stay
    /// inside the control box (see riccati_in_box()).
    double optimal_value(const State& x) const { return optimal_value(0, x); }
    double optimal_value(int h, const State& x) const {
        return static_cast<double>(p_.horizon - h) - x.dot(P_[static_cast<std::size_t>(h)] * x) / cost_scale_;
    }
    Action optimal_action(int h, const State& x) const { return K_[static_cast<std::size_t>(h)] * x; }
    const Matrix& gain(int h) const { return K_.at(static_cast<std::size_t>(h)); }

    /// True when |K_h x|_inf <= control_box for every x in the state box and every h.
    bool riccati_in_box() const {
        for (const auto& K : K_) {
            const double worst = p_.state_box * K.cwiseAbs().rowwise().sum().maxCoeff();
            if (worst > p_.control_box * (1.0 + 1e-12)) return false;
        }
        return true;
    }

    Vector omega_star(int) const { return omega_; }
    std::vector<Vector> design_features() const { return net_; }
    std::optional<std::int64_t> key(int, const State&, const Action&) const { return std::nullopt; }

    /// Parameter of max_{u'} <theta, phi(A x + B u, u')> over unconstrained u'.
    /// Requires the control block of theta to be negative definite.
    Vector backup(int, const Vector& theta) const {
        require_same_dim(theta.size(), d_, "LqrEnv::backup");
        const Blocks b = blocks(theta);
        Eigen::LLT<Matrix> neg(-b.uu);
        if (neg.info() != Eigen::Success) {
            throw EnvError("lqr backup: control block of theta is not negative definite, the maximum is unbounded");
        }
        // max_u u^T S u + y^T M u = -1/4 y^T M S^{-1} M^T y, with S = uu, y = x'.
        const Matrix G = b.xx + 0.25 * b.xu * neg.solve(b.xu.transpose());
        const Matrix& A = p_.A;
        const Matrix& B = p_.B;
        const Matrix gxx = A.transpose() * G * A;
        const Matrix guu = B.transpose() * G * B;
        const Matrix gxu = 2.0 * A.transpose() * G * B;
        return pack(gxx, guu, gxu, b.c);
    }

    /// Random (x, u) inside the boxes.
    std::vector<std::pair<State, Action>> probe_pairs(int, Rng& rng, int count) const {
        std::vector<std::pair<State, Action>> out;
        for (int i = 0; i < count; ++i) {
            State x = uniform_box(dx_, p_.state_box, rng);
            Action u = uniform_box(m_, p_.control_box, rng);
            out.emplace_back(std::move(x), std::move(u));
        }
        return out;
    }

    /// Random theta whose control block is negative definite enough that the
    /// closed-form maximizer lies in the control box for every next state.
    Vector random_probe_theta(Rng& rng) const {
        Blocks b;
        const Matrix zx = Matrix::NullaryExpr(dx_, dx_, [&] { return standard_normal(1, rng)[0]; });
        b.xx = 0.5 * (zx + zx.transpose());
        b.xu = Matrix::NullaryExpr(dx_, m_, [&] { return standard_normal(1, rng)[0]; });
        const Matrix zu = Matrix::NullaryExpr(m_, m_, [&] { return standard_normal(1, rng)[0]; });
        const double mnorm = Eigen::JacobiSVD<Matrix>(b.xu).singularValues()(0);
        const double floor =
            1.01 * mnorm * std::sqrt(static_cast<double>(dx_)) * p_.state_box / (2.0 * p_.control_box) + 1e-3;
        b.uu = -(zu * zu.transpose() + floor * Matrix::Identity(m_, m_));
        b.c = standard_normal(1, rng)[0];
        return pack(b.xx, b.uu, b.xu, b.c);
    }

    /// Quadratic-form view of theta: <theta, phi(x,u)> = x'Xx + u'Uu + x'Mu + c.
    struct Blocks {
        Matrix xx, uu, xu;
        double c = 0.0;
    };

    Blocks blocks(const Vector& theta) const {
        Blocks b;
        Eigen::Index k = 0;
        b.xx = Eigen::Map<const Matrix>(theta.data() + k, dx_, dx_) * sxx_;
        k += dx_ * dx_;
        b.uu = Eigen::Map<const Matrix>(theta.data() + k, m_, m_) * suu_;
        k += m_ * m_;
        b.xu = Eigen::Map<const Matrix>(theta.data() + k, dx_, m_) * sxu_;
        k += dx_ * m_;
        b.c = 0.5 * theta[k];
        b.xx = 0.5 * (b.xx + b.xx.transpose()).eval();
        b.uu = 0.5 * (b.uu + b.uu.transpose()).eval();
        return b;
    }

    /// Inverse of blocks() for symmetric xx and uu.
    Vector pack(const Matrix& xx, const Matrix& uu, const Matrix& xu, double c) const {
        Vector theta(d_);
        Eigen::Index k = 0;
        Eigen::Map<Matrix>(theta.data() + k, dx_, dx_) = xx / sxx_;
        k += dx_ * dx_;
        Eigen::Map<Matrix>(theta.data() + k, m_, m_) = uu / suu_;
        k += m_ * m_;
        Eigen::Map<Matrix>(theta.data() + k, dx_, m_) = xu / sxu_;
        k += dx_ * m_;
        theta[k] = 2.0 * c;
        return theta;
    }

private:
    static Vector uniform_box(Eigen::Index n, double half, Rng& rng) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = (2.0 * uniform01(rng) - 1.0) * half;
        return v;
    }

    void check_control(const Action& u) const {
        require_same_dim(u.size(), p_.B.cols(), "LqrEnv control");
        if (u.lpNorm<Eigen::Infinity>() > p_.control_box * (1.0 + 1e-9)) {
            throw EnvError("lqr: control outside the control box");
        }
    }

    Greedy<Action> grid_greedy(int h, const State& x, const Vector& w) const {
        const int g = p_.grid_points;
        std::vector<int> idx(static_cast<std::size_t>(m_), 0);
        Greedy<Action> best{Action::Zero(m_), -std::numeric_limits<double>::infinity(), true};
        while (true) {
            Action u(m_);
            for (Eigen::Index j = 0; j < m_; ++j) {
                u[j] = -p_.control_box + 2.0 * p_.control_box * idx[static_cast<std::size_t>(j)] / (g - 1);
            }
            const double v = w.dot(feature(h, x, u));
            if (v > best.value) best = {u, v, true};
            std::size_t j = 0;
            while (j < idx.size() && ++idx[j] == g) idx[j++] = 0;
            if (j == idx.size()) break;
        }
        return best;
    }

    void validate() const {
        const auto& p = p_;
        const Eigen::Index n = p.A.rows();
        if (n < 1 || p.A.cols() != n) throw EnvError("lqr: A must be square and non-empty");
        if (p.B.rows() != n || p.B.cols() < 1) throw EnvError("lqr: B must have as many rows as A");
        if (p.Q.rows() != n || p.Q.cols() != n) throw EnvError("lqr: Q must be dx x dx");
        if (p.R.rows() != p.B.cols() || p.R.cols() != p.B.cols()) throw EnvError("lqr: R must be m x m");
        if ((p.Q - p.Q.transpose()).norm() > tol::sym * std::max(1.0, p.Q.norm()) ||
            Eigen::SelfAdjointEigenSolver<Matrix>(p.Q).eigenvalues().minCoeff() < -tol::psd) {
            throw EnvError("lqr: Q must be symmetric positive semidefinite");
        }
        if ((p.R - p.R.transpose()).norm() > tol::sym * std::max(1.0, p.R.norm()) ||
            Eigen::LLT<Matrix>(p.R).info() != Eigen::Success) {
            throw EnvError("lqr: R not positive definite");
        }
        if (p.horizon < 1) throw EnvError("lqr: horizon must be at least 1");
        if (!(p.state_box > 0.0) || !(p.control_box > 0.0)) throw EnvError("lqr: boxes must be positive");
        if (p.init_box < 0.0 || p.init_box > p.state_box) throw EnvError("lqr: init_box must lie in [0, state_box]");
        if (p.grid_points < 2) throw EnvError("lqr: grid_points must be at least 2");
        if (p.net_size < 1) throw EnvError("lqr: net_size must be positive");
    }

    void riccati() {
        const int H = p_.horizon;
        P_.assign(static_cast<std::size_t>(H) + 1, Matrix::Zero(dx_, dx_));
        K_.assign(static_cast<std::size_t>(H), Matrix::Zero(m_, dx_));
        for (int h = H - 1; h >= 0; --h) {
            const Matrix& Pn = P_[static_cast<std::size_t>(h) + 1];
            const Matrix S = p_.R + p_.B.transpose() * Pn * p_.B;
            const Matrix K = -S.llt().solve(p_.B.transpose() * Pn * p_.A);
            Matrix P = p_.Q + p_.A.transpose() * Pn * p_.A + p_.A.transpose() * Pn * p_.B * K;
            K_[static_cast<std::size_t>(h)] = K;
            P_[static_cast<std::size_t>(h)] = 0.5 * (P + P.transpose());
        }
    }

    void build_omega() {
        omega_ = pack(-p_.Q / cost_scale_, -p_.R / cost_scale_, Matrix::Zero(dx_, m_), 1.0);
    }

    void build_net() {
        Rng rng(splitmix64(p_.net_seed));
        net_.clear();
        for (int i = 0; i < p_.net_size; ++i) {
            const State x = uniform_box(dx_, p_.state_box, rng);
            const Action u = uniform_box(m_, p_.control_box, rng);
            net_.push_back(feature(0, x, u));
        }
    }

    LqrParams p_;
    Eigen::Index dx_ = 0, m_ = 0, d_ = 0;
    double sxx_ = 0, suu_ = 0, sxu_ = 0, cost_scale_ = 1;
    std::vector<Matrix> P_, K_;
    Vector omega_;
    std::vector<Vector> net_;
};

/// dx = 2, m = 1 fixture: a contraction (|A|_inf = 0.9) with a small input
/// gain so that every control in the box keeps the state in its box.
inline LqrParams default_lqr_params() {
    LqrParams p;
    p.A.resize(2, 2);
    p.A << 0.6, 0.3, -0.2, 0.7;
    p.B.resize(2, 1);
    p.B << 0.1, 0.05;
    p.Q = Matrix::Identity(2, 2);
    p.R = Matrix::Identity(1, 1) * 0.5;
    p.horizon = 3;
    p.state_box = 1.0;
    p.control_box = 1.0;
    p.init_box = 0.8;
    return p;
}

}  // namespace nsrlsvi
