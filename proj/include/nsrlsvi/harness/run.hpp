#pragma once

// One configured run: metrics.csv, summary.txt and schedule.txt.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "nsrlsvi/agent.hpp"
#include "nsrlsvi/envs/env_io.hpp"
#include "nsrlsvi/harness/config.hpp"

namespace nsrlsvi {

inline constexpr const char* kMetricsHeader = "round,regret_inst,regret_cum,span_event,optimism,residual_max,wall_ms";

/// Locale-independent shortest-ish decimal.
inline std::string fmt_num(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct RunOutcome {
    long T = 0;
    Eigen::Index d = 0;
    int H = 0;
    std::vector<double> regret_cum;  // one entry per round
    long span_events = 0;            // rounds whose trajectory left the data span
    long optimistic = 0;
    double residual_max = 0.0;
    double reward_residual_max = 0.0;
    long fallbacks = 0;
    long concentration_exceed = 0;
    double null_leak_max = 0.0;
    std::vector<double> potential;  // per h, summed over rounds
    double potential_bound = 0.0;   // 2 d log(T + 1)
    double in_span_value_gap = 0.0; // max |V_bar - V^pi| over rounds with the span event

    double final_regret() const { return regret_cum.empty() ? 0.0 : regret_cum.back(); }
    bool potential_ok() const {
        for (double p : potential) {
            if (p > potential_bound) return false;
        }
        return true;
    }
};

namespace detail {

inline void write_schedule(std::ostream& out, const NoiseSchedule& s, const DesignMeasure& design) {
    const auto& in = s.inputs;
    out << "d = " << in.d << "\nH = " << in.H << "\nm = " << fmt_num(in.m) << "\ngamma = " << fmt_num(in.gamma)
        << "\neps1 = " << fmt_num(in.eps1) << "\neps2 = " << fmt_num(in.eps2) << "\neps_b = " << fmt_num(in.eps_b)
        << "\nT = " << in.T << "\nscale_override = " << fmt_num(s.scale_override)
        << "\nbp_err = " << fmt_num(s.bp_err) << "\nbr_err = " << fmt_num(s.br_err)
        << "\nsigma_R = " << fmt_num(s.sigma_R) << "\nbr_noise = " << fmt_num(s.br_noise) << "\n";
    for (int h = 1; h <= in.H; ++h) {
        out << "sigma_" << h << " = " << fmt_num(s.sigma[static_cast<std::size_t>(h)]) << "\n";
        out << "bp_noise_" << h << " = " << fmt_num(s.bp_noise[static_cast<std::size_t>(h)]) << "\n";
    }
    for (int h = 0; h <= in.H + 1; ++h) out << "W_" << h << " = " << fmt_num(s.W[static_cast<std::size_t>(h)]) << "\n";
    out << "design_support = " << design.size() << "\n";
}

}  // namespace detail

/// Runs `cfg` on an already loaded environment. Writes into `outdir` when it is non-empty.
template <Environment Env>
RunOutcome run_on_env(const Env& env, const RunConfig& cfg, const std::filesystem::path& outdir) {
    Agent<Env> agent(env, cfg.agent_options(), cfg.seed);
    RunOutcome out;
    out.T = cfg.T;
    out.d = env.dim();
    out.H = env.horizon();
    out.potential.assign(static_cast<std::size_t>(out.H), 0.0);
    out.potential_bound = 2.0 * static_cast<double>(out.d) * std::log(static_cast<double>(cfg.T) + 1.0);
    const long budget = static_cast<long>(out.d) * out.H;

    std::ofstream metrics;
    if (!outdir.empty()) {
        std::filesystem::create_directories(outdir);
        std::ofstream sched(outdir / "schedule.txt");
        detail::write_schedule(sched, agent.schedule(), agent.design());
        metrics.open(outdir / "metrics.csv");
        if (!metrics) throw ConfigError("cannot write " + (outdir / "metrics.csv").string());
        metrics << kMetricsHeader << "\n";
    }

    double cum = 0.0;
    for (long t = 0; t < cfg.T; ++t) {
        const EpisodeLog<Env> log = agent.play_round();
        cum += log.regret;
        out.regret_cum.push_back(cum);
        if (!log.in_span) ++out.span_events;
        if (log.optimistic) ++out.optimistic;
        out.residual_max = std::max(out.residual_max, log.residual_max);
        out.reward_residual_max = std::max(out.reward_residual_max, log.reward_residual_max);
        out.fallbacks += log.fallbacks;
        out.concentration_exceed += log.concentration_exceed;
        out.null_leak_max = std::max(out.null_leak_max, log.null_leak);
        for (std::size_t h = 0; h < log.potential.size(); ++h) out.potential[h] += log.potential[h];
        if (log.in_span && cfg.policy != PolicyKind::random) {
            out.in_span_value_gap = std::max(out.in_span_value_gap, std::abs(log.v_bar - log.v_pi));
        }
        if (metrics.is_open()) {
            metrics << log.round << ',' << fmt_num(log.regret) << ',' << fmt_num(cum) << ',' << (log.in_span ? 0 : 1)
                    << ',' << (log.optimistic ? 1 : 0) << ',' << fmt_num(log.residual_max) << ','
                    << fmt_num(log.wall_ms) << '\n';
        }
        if (out.span_events > budget) {
            metrics.flush();
            throw InvariantViolation("span budget violated: " + std::to_string(out.span_events) +
                                     " span events exceed d*H = " + std::to_string(budget) + " at round " +
                                     std::to_string(log.round));
        }
    }

    if (!outdir.empty()) {
        std::ofstream sum(outdir / "summary.txt");
        const double T = static_cast<double>(std::max(cfg.T, 1L));
        sum << "env = " << cfg.env << "\nseed = " << cfg.seed << "\nrounds = " << cfg.T
            << "\nregret_cum = " << fmt_num(out.final_regret())
            << "\nregret_per_round = " << fmt_num(out.final_regret() / T) << "\nspan_events = " << out.span_events
            << "\nspan_budget = " << budget << "\noptimism_frequency = "
            << fmt_num(static_cast<double>(out.optimistic) / T) << "\noptimism_slack = "
            << fmt_num(agent.schedule().optimism_slack()) << "\nresidual_max = " << fmt_num(out.residual_max)
            << "\nreward_residual_max = " << fmt_num(out.reward_residual_max)
            << "\nin_span_value_gap = " << fmt_num(out.in_span_value_gap) << "\nfallbacks = " << out.fallbacks
            << "\nconcentration_exceed = " << out.concentration_exceed
            << "\nnull_leak_max = " << fmt_num(out.null_leak_max) << "\n";
        for (std::size_t h = 0; h < out.potential.size(); ++h) {
            sum << "potential_" << h + 1 << " = " << fmt_num(out.potential[h]) << "\n";
        }
        sum << "potential_bound = " << fmt_num(out.potential_bound) << "\n";
    }
    return out;
}

inline RunOutcome run_config(const RunConfig& cfg, const std::filesystem::path& outdir) {
    const AnyEnv env = load_env(cfg.env);
    return std::visit([&](const auto& e) { return run_on_env(e, cfg, outdir); }, env);
}

inline RunOutcome run_config(const RunConfig& cfg) { return run_config(cfg, cfg.output); }

}  // namespace nsrlsvi
