#pragma once

// Two states, one action, H = 1: phi(s1) = (eps, 0), phi(s2) = (1, 0) and
// s1 moves to s2. Backing up theta = (a, b) gives (a / eps, 0), so the backup
// norm grows like 1 / eps.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nsrlsvi/envs/environment.hpp"
#include "nsrlsvi/errors.hpp"

namespace nsrlsvi {

class AnisotropicEnv {
public:
    using State = int;   // 0 = s1, 1 = s2
    using Action = int;  // a single action, 0

    explicit AnisotropicEnv(double eps_scale, RewardNoise noise = RewardNoise::bernoulli)
        : eps_(eps_scale), noise_(noise) {
        if (!(eps_scale > 0.0 && eps_scale <= 1.0)) {
            throw EnvError("anisotropic: eps_scale must lie in (0, 1], got " + std::to_string(eps_scale));
        }
    }

    double eps_scale() const { return eps_; }
    Eigen::Index dim() const { return 2; }
    int horizon() const { return 1; }
    RewardNoise reward_noise() const { return noise_; }
    double bellman_error() const { return 0.0; }
    double gamma() const { return 1.0 / eps_; }
    int lbc_layers() const { return 1; }

    Vector feature(int, State s, Action a) const {
        check(s, a);
        return Vector::Unit(2, 0) * (s == 0 ? eps_ : 1.0);
    }
    State next_state(int, State s, Action a) const {
        check(s, a);
        return 1;
    }
    double mean_reward(int h, State s, Action a) const { return omega_star(h).dot(feature(h, s, a)); }
    double sample_reward(int h, State s, Action a, Rng& rng) const {
        return draw_reward(mean_reward(h, s, a), noise_, rng);
    }
    State sample_initial(Rng&) const { return 0; }
    Action random_action(int, State, Rng&) const { return 0; }
    Greedy<Action> greedy(int h, State s, const Vector& w) const {
        require_same_dim(w.size(), 2, "AnisotropicEnv::greedy");
        return {0, w.dot(feature(h, s, 0)), false};
    }
    double optimal_value(State s) const { return mean_reward(0, s, 0); }
    Vector omega_star(int) const { return Vector::Unit(2, 0) * 0.5; }
    std::vector<Vector> design_features() const { return {feature(0, 0, 0), feature(0, 1, 0)}; }
    std::optional<std::int64_t> key(int h, State s, Action) const { return 2 * h + s; }

    /// (a / eps, 0) for theta = (a, b).
    Vector backup(int, const Vector& theta) const {
        require_same_dim(theta.size(), 2, "AnisotropicEnv::backup");
        Vector out = Vector::Zero(2);
        out[0] = theta[0] / eps_;
        return out;
    }

    /// The backup identity is checked at s1 only.
    std::vector<std::pair<State, Action>> probe_pairs(int, Rng&, int) const { return {{0, 0}}; }
    Vector random_probe_theta(Rng& rng) const { return standard_normal(2, rng); }

private:
    static void check(State s, Action a) {
        if (s != 0 && s != 1) throw EnvError("anisotropic: state must be 0 or 1");
        if (a != 0) throw EnvError("anisotropic: the only action is 0");
    }

    double eps_;
    RewardNoise noise_;
};

}  // namespace nsrlsvi
