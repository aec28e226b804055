// Command line front end for the nsrlsvi library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nsrlsvi/agent.hpp"
#include "nsrlsvi/envs/env_io.hpp"
#include "nsrlsvi/harness/config.hpp"
#include "nsrlsvi/harness/run.hpp"
#include "nsrlsvi/harness/sweep.hpp"

namespace {

using namespace nsrlsvi;

constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;

// "3", "1-20" or "1,4,9-12".
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        const auto dash = part.find('-');
        try {
            if (dash == std::string::npos) {
                seeds.push_back(std::stoull(part));
            } else {
                const auto lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
                if (hi < lo) throw ConfigError("empty seed range " + part);
                for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("--seeds: cannot parse '" + part + "'");
        }
    }
    return seeds;
}

int cmd_design(const std::string& env_path, const std::string& out_path, double eps, int max_iter) {
    const AnyEnv env = load_env(env_path);
    const auto feats = std::visit([](const auto& e) { return e.design_features(); }, env);
    DesignTrace trace;
    const DesignMeasure design = frank_wolfe_design_on_span(feats, eps, max_iter, &trace);
    const double g = design_g_value_on_span(design, feats);

    nlohmann::json j;
    j["dim"] = design.dim;
    j["g"] = g;
    j["iterations"] = trace.iterations;
    j["support"] = nlohmann::json::array();
    for (std::size_t i = 0; i < design.size(); ++i) {
        const Vector& v = design.support[i];
        j["support"].push_back({{"weight", design.weights[i]}, {"phi", std::vector<double>(v.data(), v.data() + v.size())}});
    }
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        std::ofstream out(out_path);
        if (!out) throw ConfigError("cannot write " + out_path);
        out << text;
        std::cout << "design: support " << design.size() << ", g(rho) = " << fmt_num(g) << ", written to " << out_path
                  << "\n";
    }
    return 0;
}

int cmd_run(const std::string& cfg_path, const std::string& output) {
    RunConfig cfg = load_config(cfg_path);
    apply_seed_override(cfg);
    if (!output.empty()) cfg.output = output;
    const RunOutcome out = run_config(cfg);
    std::cout << "run: " << out.T << " rounds, seed " << cfg.seed << ", regret " << fmt_num(out.final_regret())
              << ", span events " << out.span_events << "/" << static_cast<long>(out.d) * out.H
              << ", output " << cfg.output << "\n";
    return 0;
}

int cmd_sweep(const std::vector<std::string>& cfg_paths, const std::string& seeds_text, int jobs,
              const std::string& output) {
    std::vector<SweepJob> work;
    const std::vector<std::uint64_t> seeds = seeds_text.empty() ? std::vector<std::uint64_t>{} : parse_seed_list(seeds_text);
    for (const auto& path : cfg_paths) {
        RunConfig cfg = load_config(path);
        apply_seed_override(cfg);
        if (seeds.empty()) {
            work.push_back({cfg, cfg.seed});
        } else {
            for (auto s : seeds) work.push_back({cfg, s});
        }
    }
    const SweepReport rep = run_sweep(work, jobs, output);
    std::cout << "sweep: " << rep.runs.size() << " runs, " << rep.failures() << " failed, output " << output << "\n";
    for (const auto& r : rep.runs) {
        if (!r.ok) std::cerr << "failed " << r.config << " seed " << r.seed << ": " << r.error << "\n";
    }
    return rep.failures() ? kExitFailure : 0;
}

template <class Env>
int verify_one(const Env& env, int probes, std::uint64_t seed) {
    const LbcReport rep = verify_lbc(env, probes, seed);
    const double worst = std::max(rep.max_backup_residual, rep.max_reward_residual);
    std::printf("kind = %s\nd = %ld\nH = %d\n", env_kind(AnyEnv(env)).c_str(), static_cast<long>(env.dim()),
                env.horizon());
    if (!rep.ok) {
        std::printf("LBC FAILED: max backup residual %.3g, max reward residual %.3g exceed %.3g\n",
                    rep.max_backup_residual, rep.max_reward_residual, rep.bound);
    } else if (worst <= 1e-9) {
        std::printf("LBC exact (max residual <= 1e-9)\n");
    } else if (worst <= 1e-6) {
        std::printf("LBC residual <= 1e-6 (max %.3g)\n", worst);
    } else {
        std::printf("LBC within eps_b = %.6g (max residual %.3g)\n", rep.eps_b, worst);
    }
    std::printf("backup checks = %d over %d probes, max backup residual = %.3g, max reward residual = %.3g\n",
                rep.checks, rep.probes, rep.max_backup_residual, rep.max_reward_residual);

    const auto feats = env.design_features();
    if constexpr (detail::HasGamma<Env>) {
        std::printf("gamma = %.12g\n", env.gamma());
    } else if (const auto g = estimate_gamma(feats)) {
        std::printf("gamma = %.12g (estimated)\n", *g);
    } else {
        std::printf("gamma = unknown (too many feature subsets; configure it)\n");
    }
    const DesignMeasure design = frank_wolfe_design_on_span(feats, 0.01, 100000);
    std::printf("design g(rho) = %.6f, support = %zu\n", design_g_value_on_span(design, feats), design.size());
    if (const auto rf = feature_radius(feats)) {
        std::printf("R_feat = %.12g\n", *rf);
    } else {
        std::printf("R_feat = unbounded (features do not span R^d)\n");
    }
    return rep.ok ? 0 : kExitFailure;
}

int cmd_verify(const std::string& env_path, int probes, std::uint64_t seed) {
    const AnyEnv env = load_env(env_path);
    return std::visit([&](const auto& e) { return verify_one(e, probes, seed); }, env);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Null-space randomized least-squares value iteration"};
    app.require_subcommand(1);

    std::string env_path, out_path, cfg_path, seeds_text, run_output, sweep_output;
    double eps = 0.01;
    int max_iter = 100000, jobs = 1, probes = 100;
    std::uint64_t verify_seed = 0;
    std::vector<std::string> cfg_paths;

    auto* design = app.add_subcommand("design", "Compute a D-optimal design for an environment's features");
    design->add_option("--env", env_path, "Environment file (JSON)")->required();
    design->add_option("--out", out_path, "Output file; stdout when omitted");
    design->add_option("--eps", eps, "Frank-Wolfe tolerance on g(rho)/d - 1");
    design->add_option("--max-iter", max_iter, "Frank-Wolfe iteration cap");

    auto* run = app.add_subcommand("run", "Run one configuration");
    run->add_option("config", cfg_path, "Config file")->required();
    run->add_option("--output", run_output, "Override the output directory");

    auto* sweep = app.add_subcommand("sweep", "Run configs across seeds concurrently");
    sweep->add_option("--configs,configs", cfg_paths, "Config files");
    sweep->add_option("--seeds", seeds_text, "Seeds, e.g. 1-20 or 1,3,5; default: each config's seed");
    sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sweep->add_option("--output", sweep_output, "Output directory")->default_val("sweep_out");

    auto* verify = app.add_subcommand("verify-env", "Check an environment file and report its constants");
    verify->add_option("env", env_path, "Environment file (JSON)")->required();
    verify->add_option("--probes", probes, "Random parameter probes");
    verify->add_option("--seed", verify_seed, "Probe seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*design) return cmd_design(env_path, out_path, eps, max_iter);
        if (*run) return cmd_run(cfg_path, run_output);
        if (*sweep) return cmd_sweep(cfg_paths, seeds_text, jobs, sweep_output);
        if (*verify) return cmd_verify(env_path, probes, verify_seed);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const EnvError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return 0;
}
