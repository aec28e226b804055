#pragma once

// JSON environment files and a variant holding any shipped environment kind.

#include <fstream>
#include <sstream>
#include <string>
#include <variant>

#include "json.hpp"
#include "nsrlsvi/envs/anisotropic.hpp"
#include "nsrlsvi/envs/lqr.hpp"
#include "nsrlsvi/envs/tabular.hpp"

namespace nsrlsvi {

using AnyEnv = std::variant<TabularEnv, AnisotropicEnv, LqrEnv>;
using json = nlohmann::json;

inline std::string env_kind(const AnyEnv& env) {
    switch (env.index()) {
        case 0: return "tabular";
        case 1: return "anisotropic";
        default: return "lqr";
    }
}

namespace detail {

inline RewardNoise parse_noise(const json& j) {
    const std::string s = j.value("reward_noise", std::string("bernoulli"));
    if (s == "bernoulli") return RewardNoise::bernoulli;
    if (s == "none") return RewardNoise::none;
    throw EnvError("env file: reward_noise must be \"bernoulli\" or \"none\", got \"" + s + "\"");
}

inline const char* noise_name(RewardNoise n) { return n == RewardNoise::none ? "none" : "bernoulli"; }

inline Matrix parse_matrix(const json& j, const char* field) {
    if (!j.contains(field)) throw EnvError(std::string("env file: missing field '") + field + "'");
    const json& rows = j.at(field);
    if (!rows.is_array() || rows.empty() || !rows.front().is_array()) {
        throw EnvError(std::string("env file: '") + field + "' must be a non-empty array of rows");
    }
    const std::size_t r = rows.size(), c = rows.front().size();
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c) throw EnvError(std::string("env file: ragged rows in '") + field + "'");
        for (std::size_t k = 0; k < c; ++k) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k].get<double>();
        }
    }
    return m;
}

inline json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(row);
    }
    return rows;
}

template <class T>
T required(const json& j, const char* field) {
    if (!j.contains(field)) throw EnvError(std::string("env file: missing field '") + field + "'");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw EnvError(std::string("env file: field '") + field + "' has the wrong type: " + e.what());
    }
}

inline TabularEnv parse_tabular(const json& j) {
    const RewardNoise noise = parse_noise(j);
    if (j.contains("generate")) {
        const json& g = j.at("generate");
        return build_tabular(required<int>(g, "states"), required<int>(g, "actions"), required<int>(g, "horizon"),
                             required<std::uint64_t>(g, "seed"), noise);
    }
    std::vector<TabularLayer> layers;
    if (!j.contains("layers") || !j.at("layers").is_array()) throw EnvError("env file: missing field 'layers'");
    for (const json& l : j.at("layers")) {
        TabularLayer layer;
        layer.num_states = required<int>(l, "num_states");
        layer.feature_index = required<std::vector<int>>(l, "feature_index");
        layer.mean_reward = required<std::vector<double>>(l, "mean_reward");
        if (l.contains("next")) layer.next = l.at("next").get<std::vector<int>>();
        layers.push_back(std::move(layer));
    }
    std::vector<Vector> omega;
    if (j.contains("omega")) {
        for (const auto& row : j.at("omega")) {
            const auto v = row.get<std::vector<double>>();
            omega.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
    }
    return TabularEnv(required<int>(j, "d"), required<int>(j, "num_actions"), std::move(layers), std::move(omega),
                      required<std::vector<int>>(j, "initial_states"), noise, j.value("eps_b", 0.0));
}

inline LqrEnv parse_lqr(const json& j) {
    LqrParams p;
    p.A = parse_matrix(j, "A");
    p.B = parse_matrix(j, "B");
    p.Q = parse_matrix(j, "Q");
    p.R = parse_matrix(j, "R");
    p.horizon = required<int>(j, "horizon");
    p.state_box = required<double>(j, "state_box");
    p.control_box = j.value("control_box", 1.0);
    p.init_box = j.value("init_box", 0.5 * p.state_box);
    p.grid_points = j.value("grid_points", 41);
    p.net_size = j.value("net_size", 256);
    p.net_seed = j.value("net_seed", std::uint64_t{0});
    p.noise = parse_noise(j);
    return LqrEnv(std::move(p));
}

}  // namespace detail

inline AnyEnv parse_env(const json& j) {
    const std::string kind = detail::required<std::string>(j, "kind");
    if (kind == "tabular") return detail::parse_tabular(j);
    if (kind == "anisotropic") return AnisotropicEnv(detail::required<double>(j, "eps_scale"), detail::parse_noise(j));
    if (kind == "lqr") return detail::parse_lqr(j);
    throw EnvError("env file: unknown kind \"" + kind + "\" (expected tabular, anisotropic or lqr)");
}

inline AnyEnv load_env(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EnvError("cannot open env file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw EnvError("env file " + path + ": " + e.what());
    }
    return parse_env(j);
}

inline json to_json(const TabularEnv& env) {
    json j;
    j["kind"] = "tabular";
    j["d"] = env.dim();
    j["num_actions"] = env.num_actions();
    j["reward_noise"] = detail::noise_name(env.reward_noise());
    j["eps_b"] = env.bellman_error();
    j["initial_states"] = env.initial_states();
    j["layers"] = json::array();
    j["omega"] = json::array();
    for (int h = 0; h < env.horizon(); ++h) {
        const auto& l = env.layer(h);
        json lj;
        lj["num_states"] = l.num_states;
        lj["feature_index"] = l.feature_index;
        if (h + 1 < env.horizon()) lj["next"] = l.next;
        lj["mean_reward"] = l.mean_reward;
        j["layers"].push_back(lj);
        const Vector w = env.omega_star(h);
        j["omega"].push_back(std::vector<double>(w.data(), w.data() + w.size()));
    }
    return j;
}

inline json to_json(const AnisotropicEnv& env) {
    return json{{"kind", "anisotropic"},
                {"eps_scale", env.eps_scale()},
                {"reward_noise", detail::noise_name(env.reward_noise())}};
}

inline json to_json(const LqrEnv& env) {
    const auto& p = env.params();
    return json{{"kind", "lqr"},
                {"A", detail::matrix_json(p.A)},
                {"B", detail::matrix_json(p.B)},
                {"Q", detail::matrix_json(p.Q)},
                {"R", detail::matrix_json(p.R)},
                {"horizon", p.horizon},
                {"state_box", p.state_box},
                {"control_box", p.control_box},
                {"init_box", p.init_box},
                {"grid_points", p.grid_points},
                {"net_size", p.net_size},
                {"net_seed", p.net_seed},
                {"reward_noise", detail::noise_name(p.noise)}};
}

inline json to_json(const AnyEnv& env) {
    return std::visit([](const auto& e) { return to_json(e); }, env);
}

}  // namespace nsrlsvi
