#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "nsrlsvi/envs/environment.hpp"

namespace nsrlsvi {

struct LbcReport {
    double max_backup_residual = 0.0;
    double max_reward_residual = 0.0;
    double eps_b = 0.0;
    double bound = 1e-7;
    int probes = 0;
    int checks = 0;
    bool ok = true;
};

/// For `num_probes` random theta and every probed (s, a):
///   |<T theta, phi(s,a)> - max_a' <theta, phi(s', a')>|   (backup residual)
///   |<omega*_h, phi(s,a)> - r_h(s,a)|                      (reward residual)
/// The environment passes when both are at most eps_b + 1e-7.
template <class Env>
LbcReport verify_lbc(const Env& env, int num_probes, std::uint64_t seed, int pairs_per_probe = 16) {
    Rng rng = make_stream(seed, Stream::env_init);
    LbcReport rep;
    rep.eps_b = env.bellman_error();
    rep.bound = rep.eps_b + 1e-7;
    rep.probes = num_probes;

    for (int h = 0; h < env.horizon(); ++h) {
        const Vector omega = env.omega_star(h);
        for (const auto& [s, a] : env.probe_pairs(h, rng, pairs_per_probe)) {
            const double r = std::abs(omega.dot(env.feature(h, s, a)) - env.mean_reward(h, s, a));
            rep.max_reward_residual = std::max(rep.max_reward_residual, r);
        }
    }
    for (int p = 0; p < num_probes; ++p) {
        const Vector theta = env.random_probe_theta(rng);
        for (int h = 0; h < env.lbc_layers(); ++h) {
            const Vector backed = env.backup(h, theta);
            for (const auto& [s, a] : env.probe_pairs(h, rng, pairs_per_probe)) {
                const auto next = env.next_state(h, s, a);
                const double target = env.greedy(h + 1, next, theta).value;
                const double lhs = backed.dot(env.feature(h, s, a));
                rep.max_backup_residual = std::max(rep.max_backup_residual, std::abs(lhs - target));
                ++rep.checks;
            }
        }
    }
    rep.ok = rep.max_backup_residual <= rep.bound && rep.max_reward_residual <= rep.bound;
    return rep;
}

/// Assumption-4 constant: the largest 1 / sqrt(lambda) over nonzero
/// eigenvalues lambda of Gram matrices of at most d features, floored at 1.
/// Exhaustive over subsets; returns nullopt when there are more than
/// `max_subsets` of them.
inline std::optional<double> estimate_gamma(std::span<const Vector> features, long max_subsets = 200000) {
    if (features.empty()) return 1.0;
    const std::size_t n = features.size();
    const std::size_t d = static_cast<std::size_t>(features.front().size());
    const std::size_t kmax = std::min(n, d);

    // Count subsets first; binomials overflow quickly so stop once past the cap.
    long total = 0;
    for (std::size_t k = 1; k <= kmax && total <= max_subsets; ++k) {
        double c = 1.0;
        for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
        total += static_cast<long>(std::min(c, 1e12));
    }
    if (total > max_subsets) return std::nullopt;

    double lambda_min = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> pick;
    for (std::size_t k = 1; k <= kmax; ++k) {
        pick.resize(k);
        for (std::size_t i = 0; i < k; ++i) pick[i] = i;
        while (true) {
            Matrix f(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
            for (std::size_t i = 0; i < k; ++i) f.col(static_cast<Eigen::Index>(i)) = features[pick[i]];
            const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(f.transpose() * f).eigenvalues();
            const double emax = ev.maxCoeff();
            for (Eigen::Index i = 0; i < ev.size(); ++i) {
                if (ev[i] > tol::rank * std::max(emax, 1.0)) lambda_min = std::min(lambda_min, ev[i]);
            }
            std::size_t j = k;
            while (j > 0 && pick[j - 1] == n - k + (j - 1)) --j;
            if (j == 0) break;
            ++pick[j - 1];
            for (std::size_t i = j; i < k; ++i) pick[i] = pick[i - 1] + 1;
        }
    }
    if (!std::isfinite(lambda_min)) return 1.0;
    return std::max(1.0, 1.0 / std::sqrt(lambda_min));
}

}  // namespace nsrlsvi
