#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace nsrlsvi {

using Rng = std::mt19937_64;

/// Named random streams derived from one master seed.
enum class Stream : std::uint64_t {
    agent_noise = 1,
    env_reward = 2,
    env_init = 3,
    walk = 4,
    policy = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based split: stream i of master m is seeded by mix(mix(m) + i).
/// Draws on one stream never shift another.
inline Rng make_stream(std::uint64_t master, Stream stream) {
    return Rng(splitmix64(splitmix64(master) + static_cast<std::uint64_t>(stream)));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(master) + 0x1000 + index));
}

inline Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = g(rng);
    return z;
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform point in the unit Euclidean ball.
inline Eigen::VectorXd uniform_in_ball(Eigen::Index n, Rng& rng) {
    Eigen::VectorXd z = standard_normal(n, rng);
    double norm = z.norm();
    while (norm == 0.0) {
        z = standard_normal(n, rng);
        norm = z.norm();
    }
    const double radius = std::pow(uniform01(rng), 1.0 / static_cast<double>(n));
    return z * (radius / norm);
}

}  // namespace nsrlsvi
