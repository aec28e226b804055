#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <optional>
#include <vector>

#include "nsrlsvi/linalg.hpp"
#include "nsrlsvi/rng.hpp"

namespace nsrlsvi {

enum class RewardNoise { bernoulli, none };

/// Result of maximizing <w, phi(s, a)> over actions.
template <class Action>
struct Greedy {
    Action action{};
    double value = 0.0;
    bool fallback = false;  // true when the closed form was unavailable (indefinite block, grid used)
};

/// Bernoulli(clip(mean)) or the mean itself.
inline double draw_reward(double mean, RewardNoise noise, Rng& rng) {
    const double p = std::clamp(mean, 0.0, 1.0);
    if (noise == RewardNoise::none) return mean;
    if (p >= 1.0) return 1.0;
    if (p <= 0.0) return 0.0;
    return uniform01(rng) < p ? 1.0 : 0.0;
}

/// Steps are 0-based: step h in [0, H) is layer h + 1.
template <class E>
concept Environment = requires(const E& e, int h, const typename E::State& s, const typename E::Action& a,
                               const Vector& w, Rng& rng) {
    typename E::State;
    typename E::Action;
    { e.dim() } -> std::convertible_to<Eigen::Index>;
    { e.horizon() } -> std::convertible_to<int>;
    { e.feature(h, s, a) } -> std::convertible_to<Vector>;
    { e.next_state(h, s, a) } -> std::convertible_to<typename E::State>;
    { e.mean_reward(h, s, a) } -> std::convertible_to<double>;
    { e.sample_reward(h, s, a, rng) } -> std::convertible_to<double>;
    { e.sample_initial(rng) } -> std::convertible_to<typename E::State>;
    { e.random_action(h, s, rng) } -> std::convertible_to<typename E::Action>;
    { e.greedy(h, s, w) } -> std::convertible_to<Greedy<typename E::Action>>;
    { e.optimal_value(s) } -> std::convertible_to<double>;
    { e.omega_star(h) } -> std::convertible_to<Vector>;
    { e.design_features() } -> std::convertible_to<std::vector<Vector>>;
    { e.key(h, s, a) } -> std::convertible_to<std::optional<std::int64_t>>;
};

}  // namespace nsrlsvi
