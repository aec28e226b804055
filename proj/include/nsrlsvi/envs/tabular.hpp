#pragma once

// Layered deterministic MDPs with one-hot features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nsrlsvi/envs/environment.hpp"
#include "nsrlsvi/errors.hpp"

namespace nsrlsvi {

/// One step of a tabular MDP. Entries are indexed by s * A + a.
struct TabularLayer {
    int num_states = 1;
    std::vector<int> feature_index;
    std::vector<int> next;  // ignored on the last layer
    std::vector<double> mean_reward;
};

class TabularEnv {
public:
    using State = int;
    using Action = int;

    /// `omega` may be empty, in which case omega*_h is read off the mean
    /// rewards (entries sharing a feature index are averaged).
    TabularEnv(int d, int num_actions, std::vector<TabularLayer> layers, std::vector<Vector> omega,
               std::vector<int> initial_states, RewardNoise noise = RewardNoise::bernoulli, double eps_b = 0.0)
        : d_(d),
          A_(num_actions),
          layers_(std::move(layers)),
          omega_(std::move(omega)),
          initial_(std::move(initial_states)),
          noise_(noise),
          eps_b_(eps_b) {
        validate();
        solve_dp();
    }

    Eigen::Index dim() const { return d_; }
    int horizon() const { return static_cast<int>(layers_.size()); }
    int num_actions() const { return A_; }
    int num_states(int h) const { return layers_.at(static_cast<std::size_t>(h)).num_states; }
    const TabularLayer& layer(int h) const { return layers_.at(static_cast<std::size_t>(h)); }
    const std::vector<int>& initial_states() const { return initial_; }
    RewardNoise reward_noise() const { return noise_; }
    double bellman_error() const { return eps_b_; }
    double gamma() const { return 1.0; }
    int lbc_layers() const { return horizon() - 1; }

    int feature_index(int h, State s, Action a) const { return layer(h).feature_index[entry(h, s, a)]; }

    Vector feature(int h, State s, Action a) const {
        Vector phi = Vector::Zero(d_);
        phi[feature_index(h, s, a)] = 1.0;
        return phi;
    }

    State next_state(int h, State s, Action a) const {
        if (h + 1 >= horizon()) return 0;
        return layer(h).next[entry(h, s, a)];
    }

    double mean_reward(int h, State s, Action a) const { return layer(h).mean_reward[entry(h, s, a)]; }

    double sample_reward(int h, State s, Action a, Rng& rng) const {
        return draw_reward(mean_reward(h, s, a), noise_, rng);
    }

    State sample_initial(Rng& rng) const {
        std::uniform_int_distribution<std::size_t> pick(0, initial_.size() - 1);
        return initial_[pick(rng)];
    }

    Action random_action(int, State, Rng& rng) const { return std::uniform_int_distribution<int>(0, A_ - 1)(rng); }

    /// argmax_a <w, phi(s, a)>, lowest index on ties.
    Greedy<Action> greedy(int h, State s, const Vector& w) const {
        require_same_dim(w.size(), d_, "TabularEnv::greedy");
        Greedy<Action> g{0, w[feature_index(h, s, 0)], false};
        for (int a = 1; a < A_; ++a) {
            const double v = w[feature_index(h, s, a)];
            if (v > g.value) g = {a, v, false};
        }
        return g;
    }

    /// V*_1(s) for a first-layer state.
    double optimal_value(State s) const { return optimal_value(0, s); }
    double optimal_value(int h, State s) const {
        check_state(h, s);
        return vstar_[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)];
    }
    Action optimal_action(int h, State s) const {
        check_state(h, s);
        return pistar_[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)];
    }

    Vector omega_star(int h) const { return omega_.at(static_cast<std::size_t>(h)); }

    /// All one-hot features used anywhere.
    std::vector<Vector> design_features() const {
        std::set<int> used;
        for (const auto& l : layers_) used.insert(l.feature_index.begin(), l.feature_index.end());
        std::vector<Vector> out;
        for (int i : used) out.push_back(Vector::Unit(d_, i));
        return out;
    }

    std::optional<std::int64_t> key(int h, State s, Action a) const {
        return (static_cast<std::int64_t>(h) * max_states_ + s) * A_ + a;
    }

    /// Backup at layer h: coordinate i holds max_a' <theta, phi(s', a')>
    /// averaged over the (s, a) of layer h with feature index i.
    Vector backup(int h, const Vector& theta) const {
        require_same_dim(theta.size(), d_, "TabularEnv::backup");
        Vector sum = Vector::Zero(d_);
        Vector count = Vector::Zero(d_);
        if (h + 1 >= horizon()) return sum;
        const auto& l = layer(h);
        for (int s = 0; s < l.num_states; ++s) {
            for (int a = 0; a < A_; ++a) {
                const int i = feature_index(h, s, a);
                sum[i] += greedy(h + 1, next_state(h, s, a), theta).value;
                count[i] += 1.0;
            }
        }
        for (Eigen::Index i = 0; i < d_; ++i) {
            if (count[i] > 0.0) sum[i] /= count[i];
        }
        return sum;
    }

    /// Every (s, a) of layer h; the count argument is ignored.
    std::vector<std::pair<State, Action>> probe_pairs(int h, Rng&, int) const {
        std::vector<std::pair<State, Action>> out;
        for (int s = 0; s < num_states(h); ++s) {
            for (int a = 0; a < A_; ++a) out.emplace_back(s, a);
        }
        return out;
    }

    Vector random_probe_theta(Rng& rng) const { return standard_normal(d_, rng); }

private:
    std::size_t entry(int h, State s, Action a) const {
        check_state(h, s);
        if (a < 0 || a >= A_) throw EnvError("tabular: action " + std::to_string(a) + " out of range");
        return static_cast<std::size_t>(s * A_ + a);
    }

    void check_state(int h, State s) const {
        if (h < 0 || h >= horizon()) throw EnvError("tabular: step " + std::to_string(h) + " out of range");
        if (s < 0 || s >= layer(h).num_states) {
            throw EnvError("tabular: state " + std::to_string(s) + " out of range at step " + std::to_string(h));
        }
    }

    void validate() {
        if (d_ < 1) throw EnvError("tabular: d must be positive");
        if (A_ < 1) throw EnvError("tabular: num_actions must be positive");
        if (layers_.empty()) throw EnvError("tabular: horizon must be at least 1");
        const int H = horizon();
        for (int h = 0; h < H; ++h) {
            const auto& l = layers_[static_cast<std::size_t>(h)];
            const std::size_t n = static_cast<std::size_t>(l.num_states) * static_cast<std::size_t>(A_);
            const std::string where = "tabular step " + std::to_string(h + 1);
            if (l.num_states < 1) throw EnvError(where + ": num_states must be positive");
            max_states_ = std::max(max_states_, l.num_states);
            if (l.feature_index.size() != n || l.mean_reward.size() != n) {
                throw EnvError(where + ": tables must have num_states * num_actions entries");
            }
            if (h + 1 < H && l.next.size() != n) throw EnvError(where + ": next-state table has wrong size");
            for (std::size_t k = 0; k < n; ++k) {
                if (l.feature_index[k] < 0 || l.feature_index[k] >= d_) {
                    throw EnvError(where + ": feature index out of range [0, d)");
                }
                const double r = l.mean_reward[k];
                if (!(r >= 0.0 && r <= 1.0)) {
                    throw EnvError(where + ": mean reward " + std::to_string(r) + " outside the bound [0,1]");
                }
                if (h + 1 < H && (l.next[k] < 0 || l.next[k] >= layers_[static_cast<std::size_t>(h) + 1].num_states)) {
                    throw EnvError(where + ": next state out of range");
                }
            }
        }
        if (initial_.empty()) throw EnvError("tabular: initial-state set is empty");
        for (int s : initial_) {
            if (s < 0 || s >= layers_.front().num_states) throw EnvError("tabular: initial state out of range");
        }

        if (omega_.empty()) {
            for (const auto& l : layers_) {
                Vector sum = Vector::Zero(d_), count = Vector::Zero(d_);
                for (std::size_t k = 0; k < l.mean_reward.size(); ++k) {
                    sum[l.feature_index[k]] += l.mean_reward[k];
                    count[l.feature_index[k]] += 1.0;
                }
                omega_.push_back(sum.cwiseQuotient(count.cwiseMax(1.0)));
            }
        }
        if (static_cast<int>(omega_.size()) != H) throw EnvError("tabular: need one reward parameter per step");
        for (int h = 0; h < H; ++h) {
            const auto& l = layers_[static_cast<std::size_t>(h)];
            require_same_dim(omega_[static_cast<std::size_t>(h)].size(), d_, "tabular reward parameter");
            for (std::size_t k = 0; k < l.mean_reward.size(); ++k) {
                const double dev = std::abs(omega_[static_cast<std::size_t>(h)][l.feature_index[k]] - l.mean_reward[k]);
                if (dev > eps_b_ + 1e-12) {
                    throw EnvError("tabular step " + std::to_string(h + 1) +
                                   ": mean reward differs from the linear reward by " + std::to_string(dev) +
                                   " > eps_b");
                }
            }
        }
    }

    void solve_dp() {
        const int H = horizon();
        vstar_.assign(static_cast<std::size_t>(H), {});
        pistar_.assign(static_cast<std::size_t>(H), {});
        for (int h = H - 1; h >= 0; --h) {
            const auto& l = layers_[static_cast<std::size_t>(h)];
            auto& v = vstar_[static_cast<std::size_t>(h)];
            auto& pi = pistar_[static_cast<std::size_t>(h)];
            v.assign(static_cast<std::size_t>(l.num_states), 0.0);
            pi.assign(static_cast<std::size_t>(l.num_states), 0);
            for (int s = 0; s < l.num_states; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < A_; ++a) {
                    const std::size_t k = static_cast<std::size_t>(s * A_ + a);
                    double q = l.mean_reward[k];
                    if (h + 1 < H) q += vstar_[static_cast<std::size_t>(h) + 1][static_cast<std::size_t>(l.next[k])];
                    if (q > best) {
                        best = q;
                        pi[static_cast<std::size_t>(s)] = a;
                    }
                }
                v[static_cast<std::size_t>(s)] = best;
            }
        }
    }

    int d_;
    int A_;
    std::vector<TabularLayer> layers_;
    std::vector<Vector> omega_;
    std::vector<int> initial_;
    RewardNoise noise_;
    double eps_b_;
    int max_states_ = 0;
    std::vector<std::vector<double>> vstar_;
    std::vector<std::vector<int>> pistar_;
};

/// Random layered MDP with S states per layer, A actions and d = S * A
/// (feature index s * A + a on every layer). Transitions and mean rewards are
/// drawn from `seed`; every first-layer state is an initial state.
inline TabularEnv build_tabular(int num_states_per_layer, int num_actions, int horizon, std::uint64_t seed,
                                RewardNoise noise = RewardNoise::bernoulli) {
    if (num_states_per_layer < 1 || num_actions < 1 || horizon < 1) {
        throw EnvError("build_tabular: sizes must be positive");
    }
    Rng rng(splitmix64(seed));
    std::uniform_int_distribution<int> next(0, num_states_per_layer - 1);
    const int n = num_states_per_layer * num_actions;
    std::vector<TabularLayer> layers;
    for (int h = 0; h < horizon; ++h) {
        TabularLayer l;
        l.num_states = num_states_per_layer;
        for (int k = 0; k < n; ++k) {
            l.feature_index.push_back(k);
            l.mean_reward.push_back(uniform01(rng));
            if (h + 1 < horizon) l.next.push_back(next(rng));
        }
        layers.push_back(std::move(l));
    }
    std::vector<int> init(static_cast<std::size_t>(num_states_per_layer));
    for (int s = 0; s < num_states_per_layer; ++s) init[static_cast<std::size_t>(s)] = s;
    return TabularEnv(n, num_actions, std::move(layers), {}, std::move(init), noise);
}

/// Two-step chain where S first-layer states (features e_1..e_S) all move to
/// one second-layer state (feature e_{S+1}) paying reward 1. The backed-up
/// parameter of the unit-norm second-layer value is (1, ..., 1, 0).
inline TabularEnv build_bellman_expansion_example(int S, RewardNoise noise = RewardNoise::none) {
    if (S < 1) throw EnvError("build_bellman_expansion_example: S must be positive");
    TabularLayer first;
    first.num_states = S;
    for (int s = 0; s < S; ++s) {
        first.feature_index.push_back(s);
        first.next.push_back(0);
        first.mean_reward.push_back(0.0);
    }
    TabularLayer second;
    second.num_states = 1;
    second.feature_index = {S};
    second.mean_reward = {1.0};
    std::vector<int> init(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) init[static_cast<std::size_t>(s)] = s;
    return TabularEnv(S + 1, 1, {first, second}, {}, std::move(init), noise);
}

/// S = 2, A = 2, H = 2, d = 4. The first action pays 0.5 now and 0.3 later;
/// the second pays nothing now but leads to a state where action 1 pays 1.
/// Greedy least squares never leaves the first path, since unseen features
/// are estimated at 0 and ties go to action 0.
inline TabularEnv build_hidden_reward(RewardNoise noise = RewardNoise::bernoulli) {
    TabularLayer first;
    first.num_states = 2;
    first.feature_index = {0, 1, 2, 3};
    first.next = {0, 1, 0, 0};
    first.mean_reward = {0.5, 0.0, 0.0, 0.0};
    TabularLayer second;
    second.num_states = 2;
    second.feature_index = {0, 1, 2, 3};
    second.mean_reward = {0.3, 0.2, 0.1, 1.0};
    return TabularEnv(4, 2, {first, second}, {}, {0}, noise);
}

/// S = 1, A = 2, H = 2, d = 2.
inline TabularEnv build_two_by_two(RewardNoise noise = RewardNoise::bernoulli) {
    TabularLayer first;
    first.num_states = 1;
    first.feature_index = {0, 1};
    first.next = {0, 0};
    first.mean_reward = {0.4, 0.6};
    TabularLayer second;
    second.num_states = 1;
    second.feature_index = {0, 1};
    second.mean_reward = {0.7, 0.2};
    return TabularEnv(2, 2, {first, second}, {}, {0}, noise);
}

/// Copy of `env` whose true mean rewards are moved by +-eps_b (clipped to
/// [0,1]) while the linear reward parameters stay put.
inline TabularEnv perturb_rewards(const TabularEnv& env, double eps_b, std::uint64_t seed) {
    Rng rng(splitmix64(seed));
    std::vector<TabularLayer> layers;
    std::vector<Vector> omega;
    for (int h = 0; h < env.horizon(); ++h) {
        TabularLayer l = env.layer(h);
        for (double& r : l.mean_reward) {
            const double shifted = r + (uniform01(rng) < 0.5 ? -eps_b : eps_b);
            r = std::clamp(shifted, 0.0, 1.0);
        }
        layers.push_back(std::move(l));
        omega.push_back(env.omega_star(h));
    }
    return TabularEnv(static_cast<int>(env.dim()), env.num_actions(), std::move(layers), std::move(omega),
                      env.initial_states(), env.reward_noise(), eps_b);
}

}  // namespace nsrlsvi
