#pragma once

// Null-space randomized least-squares value iteration.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "nsrlsvi/design.hpp"
#include "nsrlsvi/envs/environment.hpp"
#include "nsrlsvi/envs/verify.hpp"
#include "nsrlsvi/errors.hpp"
#include "nsrlsvi/linalg.hpp"
#include "nsrlsvi/oracles.hpp"
#include "nsrlsvi/rng.hpp"

namespace nsrlsvi {

enum class OracleMode { exact, approximate };
enum class PolicyKind { nsrlsvi, greedy, random };

struct ScheduleInputs {
    Eigen::Index d = 1;
    int H = 1;
    double m = 1.0;  // design support size
    double gamma = 1.0;
    double eps1 = 0.0, eps2 = 0.0, eps_b = 0.0;
    long T = 1;
    double scale_override = 1.0;
};

/// Noise scales and constraint widths. Vectors are indexed by layer:
/// W[k] for k = 0..H+1, sigma[k] and bp_noise[k] for k = 1..H (entry 0 unused).
struct NoiseSchedule {
    double bp_err = 0.0, br_err = 0.0;
    double sigma_R = 0.0;        // theoretical value
    double br_noise = 0.0;
    std::vector<double> sigma;  // theoretical values
    std::vector<double> bp_noise;
    std::vector<double> W;
    double scale_override = 1.0;
    ScheduleInputs inputs;

    /// Noise scales actually used for sampling.
    double sigma_eff(int layer) const { return scale_override * sigma[static_cast<std::size_t>(layer)]; }
    double sigma_R_eff() const { return scale_override * sigma_R; }
    /// Optimism slack B^P_err * gamma * H.
    double optimism_slack() const { return bp_err * inputs.gamma * inputs.H; }
    /// Radius of the Gaussian-concentration event for the value noise.
    double concentration_radius(int layer) const {
        const double d = static_cast<double>(inputs.d), H = inputs.H, T = static_cast<double>(std::max(inputs.T, 1L));
        return sigma_eff(layer) * std::sqrt(2.0 * d * std::log(6.0 * d * H * H * T * T));
    }
};

inline NoiseSchedule compute_schedule(const ScheduleInputs& in) {
    if (in.d < 1 || in.H < 1 || !(in.m >= 1.0) || !(in.gamma >= 1.0) || in.eps1 < 0 || in.eps2 < 0 || in.eps_b < 0 ||
        in.T < 0 || !(in.scale_override >= 0.0)) {
        throw ConfigError("compute_schedule: need d, H, m >= 1, gamma >= 1, nonnegative errors and scale");
    }
    const double d = static_cast<double>(in.d), H = in.H, T = static_cast<double>(std::max(in.T, 1L));
    const double e1 = in.eps1, e2 = in.eps2, eb = in.eps_b;
    const double e = std::exp(1.0);

    NoiseSchedule s;
    s.inputs = in;
    s.scale_override = in.scale_override;
    s.bp_err = std::sqrt(2.0 * e1 * e1 + 4.0 * T * eb * eb);
    s.br_err = std::sqrt(1030.0 * std::pow(1.0 + e2, 4) * d * std::log(24.0 * (1.0 + e2) * e * e * T * T * T * H * H) +
                         4.0 * e1 * e1 + 16.0 * (1.0 + e2) * (1.0 + eb * T));
    s.sigma_R = std::sqrt(H) * s.br_err;
    s.br_noise = s.sigma_R * std::sqrt(2.0 * d * std::log(6.0 * d * H * T * T));

    const std::size_t n = static_cast<std::size_t>(in.H) + 2;
    s.W.assign(n, 0.0);
    s.sigma.assign(n, 0.0);
    s.bp_noise.assign(n, 0.0);
    s.W[n - 1] = 1.0;
    const double root2d = std::sqrt(2.0 * d);
    const double bp_log = std::sqrt(2.0 * d * std::log(6.0 * d * H * H * T * T));
    for (int h = in.H; h >= 0; --h) {
        const auto k = static_cast<std::size_t>(h);
        s.W[k] = s.W[k + 1] + 2.0 * e2 + root2d * s.bp_noise[k + 1] + root2d * s.br_noise + 1.0;
        if (h >= 1) {
            s.sigma[k] = std::sqrt(H) * (std::sqrt(3.0) * in.gamma * s.bp_err + std::sqrt(8.0 * in.m) * (s.W[k] + e2));
            s.bp_noise[k] = s.sigma[k] * bp_log;
        }
    }
    for (double v : s.W) {
        if (!std::isfinite(v)) {
            throw ConfigError("compute_schedule: widths overflow for H = " + std::to_string(in.H) +
                              "; use a smaller horizon");
        }
    }
    return s;
}

struct AgentOptions {
    OracleMode oracle = OracleMode::exact;
    PolicyKind policy = PolicyKind::nsrlsvi;
    bool known_reward = false;
    bool exact_fallback = true;  // constrained fallback when the min-norm solution leaves O(W)
    ApxOptions apx;
    double design_eps = 0.01;
    int design_max_iter = 100000;
    double eps1 = 0.0, eps2 = 0.0;
    std::optional<double> eps_b;  // default: the environment's
    std::optional<double> gamma;  // default: the environment's, else estimated, else 1
    double scale_override = 1.0;
    long T = 1;  // horizon of the run, used by the schedule
    bool timing = false;
};

template <class Env>
struct Step {
    typename Env::State state;
    typename Env::Action action;
    double reward = 0.0;
};

template <class Env>
struct EpisodeLog {
    long round = 0;
    std::vector<Step<Env>> steps;
    bool in_span = false;  // every feature of the trajectory was in the span of earlier data
    double v_star = 0.0, v_pi = 0.0, v_bar = 0.0;
    double regret = 0.0;
    bool optimistic = false;
    double residual_max = 0.0;         // value regression, over all h
    double reward_residual_max = 0.0;  // reward regression, over all h
    int fallbacks = 0;                 // oracle fallbacks plus grid-search greedy steps
    int concentration_exceed = 0;      // h with ||xi^P||_Lambda above the concentration radius
    double null_leak = 0.0;            // max_h ||P (theta_bar - theta_hat)||
    std::vector<double> potential;     // per h: min{1, ||phi||^2 in Sigma^{-1}}
    double wall_ms = 0.0;
};

/// Per-layer learner state.
struct HorizonState {
    Matrix Sigma;      // design moment plus data Gram
    Matrix Sigma_hat;  // data Gram
    Matrix P;          // projector onto the data span
    Matrix Lambda;     // P A P + (I-P) A (I-P), A the design moment
    Vector theta_hat, theta_bar, omega_hat, omega_bar;
    double W = 0.0, sigma = 0.0;
};

namespace detail {

template <class E>
concept HasGamma = requires(const E& e) {
    { e.gamma() } -> std::convertible_to<double>;
};

template <class E>
concept HasBellmanError = requires(const E& e) {
    { e.bellman_error() } -> std::convertible_to<double>;
};

/// Sampler for N(0, M^+) with M symmetric PSD.
struct GaussianFactor {
    Matrix root;  // d x r with root root^T = M^+
    void reset(const Matrix& m) {
        const PsdFactor f = psd_factor(m);
        root = f.vectors * f.values.cwiseSqrt().cwiseInverse().asDiagonal();
    }
    Vector draw(Rng& rng) const {
        const Vector z = standard_normal(root.rows(), rng);
        return root * z.head(root.cols());
    }
};

}  // namespace detail

template <Environment Env>
class Agent {
public:
    using State = typename Env::State;
    using Action = typename Env::Action;

    Agent(const Env& env, AgentOptions opt, std::uint64_t seed, std::optional<DesignMeasure> design = std::nullopt)
        : env_(env),
          opt_(std::move(opt)),
          d_(env.dim()),
          H_(env.horizon()),
          linopt_(env.design_features()),
          noise_rng_(make_stream(seed, Stream::agent_noise)),
          reward_rng_(make_stream(seed, Stream::env_reward)),
          init_rng_(make_stream(seed, Stream::env_init)),
          walk_rng_(make_stream(seed, Stream::walk)),
          policy_rng_(make_stream(seed, Stream::policy)) {
        const auto feats = env.design_features();
        if (design) {
            design_ = std::move(*design);
        } else {
            design_ = frank_wolfe_design_on_span(feats, opt_.design_eps, opt_.design_max_iter);
        }
        require_same_dim(design_.dim, d_, "Agent design");
        design_moment_ = design_.moment();

        ScheduleInputs in;
        in.d = d_;
        in.H = H_;
        in.m = static_cast<double>(design_.size());
        in.gamma = resolve_gamma(feats);
        in.eps1 = opt_.eps1;
        in.eps2 = opt_.eps2;
        if (opt_.eps_b) {
            in.eps_b = *opt_.eps_b;
        } else if constexpr (detail::HasBellmanError<Env>) {
            in.eps_b = env.bellman_error();
        }
        in.T = opt_.T;
        in.scale_override = opt_.policy == PolicyKind::nsrlsvi ? opt_.scale_override : 0.0;
        schedule_ = compute_schedule(in);

        layers_.resize(static_cast<std::size_t>(H_));
        for (int h = 0; h < H_; ++h) {
            Layer& L = layers_[static_cast<std::size_t>(h)];
            L.span = SpanTracker(d_);
            L.hs.Sigma_hat = Matrix::Zero(d_, d_);
            L.hs.Sigma = design_moment_;
            L.hs.P = Matrix::Zero(d_, d_);
            L.hs.W = schedule_.W[static_cast<std::size_t>(h) + 1];
            L.hs.sigma = schedule_.sigma_eff(h + 1);
            L.hs.theta_hat = L.hs.theta_bar = L.hs.omega_hat = L.hs.omega_bar = Vector::Zero(d_);
            refresh_lambda(L);
            refresh_sigma(L);
        }
    }

    const NoiseSchedule& schedule() const { return schedule_; }
    const DesignMeasure& design() const { return design_; }
    const HorizonState& horizon_state(int h) const { return layer(h).hs; }
    int span_rank(int h) const { return layer(h).span.rank(); }
    long rounds_played() const { return round_; }

    /// Q-parameter omega_bar + theta_bar of layer h from the last plan.
    Vector q_parameter(int h) const { return layer(h).hs.omega_bar + layer(h).hs.theta_bar; }

    /// Fits and perturbs every layer from h = H down to 1 using the data so far.
    void plan(EpisodeLog<Env>* log = nullptr) {
        for (int h = H_ - 1; h >= 0; --h) {
            try {
                plan_layer(h, log);
            } catch (const OracleFailure& e) {
                throw OracleFailure(annotate(e.what(), h));
            } catch (const EnvError& e) {
                throw EnvError(annotate(e.what(), h));
            } catch (const InvariantViolation& e) {
                throw InvariantViolation(annotate(e.what(), h));
            } catch (const Error& e) {
                throw Error(annotate(e.what(), h));
            }
        }
    }

    /// Greedy action for the current parameters; ties go to the lowest index.
    Greedy<Action> act(int h, const State& s) const { return env_.greedy(h, s, q_parameter(h)); }

    /// V_bar_h(s) = max_a <omega_bar + theta_bar, phi(s, a)>.
    double value(int h, const State& s) const { return act(h, s).value; }

    /// Adds one observed transition to the layer-h data (without touching
    /// Sigma; call commit_round() once the round is over).
    void record_step(int h, const State& s, const Action& a, double reward) {
        Layer& L = layer(h);
        const Vector phi = env_.feature(h, s, a);
        const auto key = env_.key(h, s, a);
        std::size_t idx = L.rows.size();
        if (key) {
            auto it = L.index.find(*key);
            if (it != L.index.end()) {
                idx = it->second;
            } else {
                L.index.emplace(*key, idx);
            }
        }
        if (idx == L.rows.size()) {
            L.rows.push_back(Row{phi, s, a, 0.0, 0.0, 0.0});
        }
        Row& row = L.rows[idx];
        row.count += 1.0;
        row.reward_sum += reward;
        row.reward_sq += reward * reward;
        L.hs.Sigma_hat.noalias() += phi * phi.transpose();
        L.pending.push_back(phi);
    }

    /// Sigma_{t+1,h} = Sigma_{t,h} + phi phi^T and the span update for the round just played.
    void commit_round() {
        for (auto& L : layers_) {
            bool grew = false;
            for (const auto& phi : L.pending) {
                L.hs.Sigma.noalias() += phi * phi.transpose();
                grew = L.span.add(phi) || grew;
            }
            L.pending.clear();
            if (grew) {
                L.hs.P = L.span.projector();
                refresh_lambda(L);
            }
            refresh_sigma(L);
        }
        ++round_;
    }

    /// Plans against the current statistics, then rolls out one episode and records it.
    EpisodeLog<Env> play_round() {
        const auto start = std::chrono::steady_clock::now();
        EpisodeLog<Env> log;
        log.round = round_ + 1;
        log.potential.assign(static_cast<std::size_t>(H_), 0.0);
        if (opt_.policy != PolicyKind::random) plan(&log);

        State s = env_.sample_initial(init_rng_);
        log.v_star = env_.optimal_value(s);
        log.v_bar = opt_.policy == PolicyKind::random ? 0.0 : value(0, s);
        log.in_span = true;
        double v_pi = 0.0;
        for (int h = 0; h < H_; ++h) {
            Action a;
            if (opt_.policy == PolicyKind::random) {
                a = env_.random_action(h, s, policy_rng_);
            } else {
                const Greedy<Action> g = act(h, s);
                if (g.fallback) ++log.fallbacks;
                a = g.action;
            }
            const Vector phi = env_.feature(h, s, a);
            Layer& L = layer(h);
            if (!L.span.contains(phi)) log.in_span = false;
            log.potential[static_cast<std::size_t>(h)] = std::min(1.0, L.sigma_inv_quad(phi));
            const double r = env_.sample_reward(h, s, a, reward_rng_);
            v_pi += env_.mean_reward(h, s, a);
            log.steps.push_back(Step<Env>{s, a, r});
            record_step(h, s, a, r);
            if (h + 1 < H_) s = env_.next_state(h, s, a);
        }
        commit_round();
        log.v_pi = v_pi;
        log.regret = log.v_star - log.v_pi;
        log.optimistic = opt_.policy != PolicyKind::random && log.v_star <= log.v_bar + schedule_.optimism_slack();
        if (opt_.timing) {
            log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
        return log;
    }

    /// Draw of xi^P = (I - P) zeta with zeta ~ N(0, sigma_h^2 Lambda^+), for layer h.
    Vector sample_null_noise(int h, Rng& rng) const {
        const Layer& L = layer(h);
        const Vector zeta = L.hs.sigma * L.lambda_factor.draw(rng);
        return zeta - L.hs.P * zeta;
    }

private:
    struct Row {
        Vector phi;
        State state;
        Action action;
        double count = 0.0;
        double reward_sum = 0.0;
        double reward_sq = 0.0;
    };

    struct Layer {
        SpanTracker span{1};
        std::vector<Row> rows;
        std::unordered_map<std::int64_t, std::size_t> index;
        std::vector<Vector> pending;
        HorizonState hs;
        detail::GaussianFactor lambda_factor;
        Eigen::LLT<Matrix> sigma_llt;
        bool sigma_pd = false;
        Matrix sigma_pinv;
        detail::GaussianFactor sigma_factor;

        double sigma_inv_quad(const Vector& phi) const {
            if (sigma_pd) return phi.dot(sigma_llt.solve(phi));
            return phi.dot(sigma_pinv * phi);
        }
    };

    Layer& layer(int h) {
        if (h < 0 || h >= H_) throw DimensionMismatch("agent: step out of range");
        return layers_[static_cast<std::size_t>(h)];
    }
    const Layer& layer(int h) const {
        if (h < 0 || h >= H_) throw DimensionMismatch("agent: step out of range");
        return layers_[static_cast<std::size_t>(h)];
    }

    std::string annotate(const char* what, int h) const {
        std::ostringstream msg;
        msg << what << " (round " << round_ + 1 << ", step " << h + 1 << ")";
        return msg.str();
    }

    double resolve_gamma(const std::vector<Vector>& feats) const {
        if (opt_.gamma) return *opt_.gamma;
        if constexpr (detail::HasGamma<Env>) {
            return env_.gamma();
        } else {
            return estimate_gamma(feats).value_or(1.0);
        }
    }

    void refresh_lambda(Layer& L) {
        const Matrix& P = L.hs.P;
        const Matrix Q = Matrix::Identity(d_, d_) - P;
        L.hs.Lambda = P * design_moment_ * P + Q * design_moment_ * Q;
        L.lambda_factor.reset(L.hs.Lambda);
    }

    void refresh_sigma(Layer& L) {
        L.sigma_llt.compute(L.hs.Sigma);
        L.sigma_pd = L.sigma_llt.info() == Eigen::Success &&
                     L.sigma_llt.matrixLLT().diagonal().minCoeff() >
                         std::sqrt(tol::rank * L.hs.Sigma.diagonal().maxCoeff());
        if (!L.sigma_pd) {
            L.sigma_pinv = pseudo_inverse(L.hs.Sigma);
            L.sigma_factor.reset(L.hs.Sigma);
        }
    }

    /// Draw from N(0, Sigma^{-1}) (pseudo-inverse when Sigma is singular).
    Vector sigma_noise(const Layer& L) {
        if (L.sigma_pd) {
            const Vector z = standard_normal(d_, noise_rng_);
            return L.sigma_llt.matrixU().solve(z);
        }
        return L.sigma_factor.draw(noise_rng_);
    }

    RegressionProblem value_problem(int h) const {
        const Layer& L = layer(h);
        RegressionProblem p;
        p.W = L.hs.W;
        p.features.reserve(L.rows.size());
        for (const Row& row : L.rows) {
            p.features.push_back(row.phi);
            p.weights.push_back(row.count);
            p.targets.push_back(h + 1 < H_ ? value(h + 1, env_.next_state(h, row.state, row.action)) : 0.0);
        }
        return p;
    }

    RegressionProblem reward_problem(int h) const {
        const Layer& L = layer(h);
        RegressionProblem p;
        p.W = 1.0;
        for (const Row& row : L.rows) {
            const double mean = row.reward_sum / row.count;
            p.features.push_back(row.phi);
            p.weights.push_back(row.count);
            p.targets.push_back(mean);
            p.offset += row.reward_sq - row.count * mean * mean;
        }
        p.offset = std::max(p.offset, 0.0);
        return p;
    }

    Vector regress(const RegressionProblem& p, bool reward, int& fallbacks) {
        if (opt_.oracle == OracleMode::approximate) {
            if (reward) return apx_reward_oracle(p, opt_.apx, linopt_, walk_rng_).omega;
            return apx_value_oracle(p, opt_.apx, linopt_, walk_rng_);
        }
        std::optional<ApxOptions> fb;
        if (opt_.exact_fallback) {
            fb = opt_.apx;
            fb->eps = std::min(fb->eps, 1e-4);
        }
        const LsqResult res = exact_lsq(p, linopt_, fb, &walk_rng_, reward);
        if (res.fallback || !res.in_class) ++fallbacks;
        return res.theta;
    }

    void plan_layer(int h, EpisodeLog<Env>* log) {
        Layer& L = layer(h);
        HorizonState& hs = L.hs;
        int fallbacks = 0;

        const RegressionProblem vp = value_problem(h);
        hs.theta_hat = regress(vp, false, fallbacks);
        const double residual = vp.max_residual(hs.theta_hat);

        double reward_residual = 0.0;
        if (opt_.known_reward) {
            hs.omega_hat = env_.omega_star(h);
        } else {
            const RegressionProblem rp = reward_problem(h);
            hs.omega_hat = regress(rp, true, fallbacks);
            reward_residual = rp.max_residual(hs.omega_hat);
        }

        Vector xi = Vector::Zero(d_);
        if (hs.sigma > 0.0 && L.span.rank() < d_) xi = sample_null_noise(h, noise_rng_);
        hs.theta_bar = hs.theta_hat + xi;

        if (opt_.known_reward) {
            hs.omega_bar = hs.omega_hat;
        } else {
            const double sr = schedule_.sigma_R_eff();
            hs.omega_bar = sr > 0.0 ? Vector(hs.omega_hat + sr * sigma_noise(L)) : hs.omega_hat;
        }

        if (log) {
            log->residual_max = std::max(log->residual_max, residual);
            log->reward_residual_max = std::max(log->reward_residual_max, reward_residual);
            log->fallbacks += fallbacks;
            log->null_leak = std::max(log->null_leak, (hs.P * xi).norm());
            if (quad_norm(xi, hs.Lambda) > schedule_.concentration_radius(h + 1)) ++log->concentration_exceed;
        }
    }

    const Env& env_;
    AgentOptions opt_;
    Eigen::Index d_;
    int H_;
    LinOpt linopt_;
    DesignMeasure design_;
    Matrix design_moment_;
    NoiseSchedule schedule_;
    std::vector<Layer> layers_;
    long round_ = 0;
    Rng noise_rng_, reward_rng_, init_rng_, walk_rng_, policy_rng_;
};

/// T rounds of the agent on `env`; deterministic given `seed`.
template <Environment Env>
std::vector<EpisodeLog<Env>> run_experiment(const Env& env, long T, AgentOptions opt, std::uint64_t seed,
                                            std::optional<DesignMeasure> design = std::nullopt) {
    if (T < 0) throw ConfigError("run_experiment: T must be nonnegative");
    opt.T = std::max(T, 1L);
    Agent<Env> agent(env, opt, seed, std::move(design));
    std::vector<EpisodeLog<Env>> logs;
    logs.reserve(static_cast<std::size_t>(T));
    for (long t = 0; t < T; ++t) logs.push_back(agent.play_round());
    return logs;
}

}  // namespace nsrlsvi
