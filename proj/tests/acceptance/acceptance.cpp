// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 10).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "nsrlsvi/agent.hpp"
#include "nsrlsvi/design.hpp"
#include "nsrlsvi/envs/env_io.hpp"
#include "nsrlsvi/envs/tabular.hpp"
#include "nsrlsvi/feasibility.hpp"
#include "nsrlsvi/harness/config.hpp"
#include "nsrlsvi/harness/run.hpp"
#include "nsrlsvi/oracles.hpp"

using namespace nsrlsvi;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = NSRLSVI_SOURCE_DIR;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Potential-bound bookkeeping shared by every run the suite performs.
struct PotentialLedger {
    long runs = 0, violations = 0;
    double worst_ratio = 0.0;
    void add(const RunOutcome& o) {
        ++runs;
        if (!o.potential_ok()) ++violations;
        for (double p : o.potential) worst_ratio = std::max(worst_ratio, p / o.potential_bound);
    }
} potentials;

std::vector<fs::path> shipped_configs() {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(kSource / "configs")) {
        if (e.path().extension() == ".cfg") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

RunOutcome run_quiet(const RunConfig& cfg) {
    RunOutcome o = run_config(cfg, fs::path{});
    potentials.add(o);
    return o;
}

template <class Env>
RunOutcome run_quiet(const Env& env, const RunConfig& cfg) {
    RunOutcome o = run_on_env(env, cfg, fs::path{});
    potentials.add(o);
    return o;
}

Verdict span_budget() {
    const auto t0 = std::chrono::steady_clock::now();
    long runs = 0, violations = 0, worst_events = 0, worst_budget = 1;
    const auto record = [&](long events, long budget) {
        ++runs;
        if (events > budget) ++violations;
        if (events * worst_budget > worst_events * budget) {
            worst_events = events;
            worst_budget = budget;
        }
    };
    for (const auto& path : shipped_configs()) {
        RunConfig cfg = load_config(path.string());
        cfg.T = 2000;
        try {
            const RunOutcome o = run_quiet(cfg);
            record(o.span_events, static_cast<long>(o.d) * o.H);
        } catch (const InvariantViolation&) {
            ++runs;
            ++violations;
        }
    }
    Rng pick(2024);
    for (int i = 0; i < 50; ++i) {
        const int A = 2 + static_cast<int>(pick() % 3);
        const int S = 1 + static_cast<int>(pick() % static_cast<std::uint64_t>(16 / A));
        const int H = 1 + static_cast<int>(pick() % 4);
        const TabularEnv env = build_tabular(S, A, H, 1000 + static_cast<std::uint64_t>(i));
        RunConfig cfg;
        cfg.T = 2000;
        cfg.seed = static_cast<std::uint64_t>(i);
        cfg.scale_override = 1e-3;
        try {
            const RunOutcome o = run_quiet(env, cfg);
            record(o.span_events, static_cast<long>(o.d) * o.H);
        } catch (const InvariantViolation&) {
            ++runs;
            ++violations;
        }
    }
    const double secs = seconds_since(t0);
    return {violations == 0 && secs < 60.0,
            std::to_string(runs) + " runs, " + std::to_string(violations) + " violations, tightest " +
                std::to_string(worst_events) + "/" + std::to_string(worst_budget) + ", " + fmt("%.1f s", secs) +
                " (budget 60 s)"};
}

Verdict in_span_exactness() {
    double residual = 0.0, gap = 0.0;
    long runs = 0, in_span_runs = 0;
    const auto take = [&](const RunOutcome& o, bool known) {
        ++runs;
        residual = std::max({residual, o.residual_max, o.reward_residual_max});
        if (known) {
            gap = std::max(gap, o.in_span_value_gap);
            ++in_span_runs;
        }
    };
    std::vector<std::pair<TabularEnv, double>> envs{{build_two_by_two(RewardNoise::none), 1.0},
                                                    {build_hidden_reward(RewardNoise::none), 1.0}};
    for (std::uint64_t s = 0; s < 5; ++s) {
        envs.emplace_back(build_tabular(2, 2, 2, 300 + s, RewardNoise::none), 1.0);
        envs.emplace_back(build_tabular(3, 2, 3, 400 + s, RewardNoise::none), 1e-6);
        envs.emplace_back(build_tabular(4, 3, 4, 500 + s, RewardNoise::none), 1e-6);
    }
    for (std::size_t k = 0; k < envs.size(); ++k) {
        for (bool known : {true, false}) {
            RunConfig cfg;
            cfg.T = 500;
            cfg.seed = k;
            cfg.known_reward = known;
            cfg.scale_override = envs[k].second;
            take(run_quiet(envs[k].first, cfg), known);
        }
    }
    const AnyEnv lqr = load_env((kSource / "fixtures" / "lqr.json").string());
    RunConfig cfg;
    cfg.T = 300;
    cfg.seed = 1;
    cfg.known_reward = true;
    cfg.scale_override = 1e-6;
    cfg.gamma = 1.0;
    const RunOutcome o = std::visit([&](const auto& e) { return run_quiet(e, cfg); }, lqr);
    const double lqr_residual = o.residual_max;
    const double lqr_gap = o.in_span_value_gap;
    const bool ok = residual <= 1e-9 && gap <= 1e-6 && lqr_residual <= 1e-9 && lqr_gap <= 1e-6;
    return {ok, std::to_string(runs) + " tabular runs: max residual " + fmt("%.3g", residual) + ", max in-span gap " +
                    fmt("%.3g", gap) + " over " + std::to_string(in_span_runs) + " known-reward runs; LQR residual " +
                    fmt("%.3g", lqr_residual) + ", gap " + fmt("%.3g", lqr_gap)};
}

Verdict optimism_frequency() {
    RunConfig cfg = load_config((kSource / "configs" / "optimism_d2h2.cfg").string());
    cfg.T = 2000;
    long optimistic = 0, rounds = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        cfg.seed = seed;
        const RunOutcome o = run_quiet(cfg);
        optimistic += o.optimistic;
        rounds += o.T;
    }
    const double f = static_cast<double>(optimistic) / static_cast<double>(rounds);
    return {f >= 0.015, "frequency " + fmt("%.4f", f) + " over " + std::to_string(rounds) +
                            " rounds (threshold 0.015, scale_override " + fmt_num(cfg.scale_override) + ")"};
}

Verdict design_certificate() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(77);
    double worst = 0.0;
    bool ok = true;
    for (int i = 0; i < 20; ++i) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 9);
        const int n = static_cast<int>(d) + 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(200 - d));
        std::vector<Vector> f;
        for (int k = 0; k < n; ++k) f.push_back(standard_normal(d, rng).normalized());
        const DesignMeasure m = frank_wolfe_design(f, 0.01, 100000);
        const double g = design_g_value(m, f);
        worst = std::max(worst, g / static_cast<double>(d));
        ok = ok && g <= 1.01 * static_cast<double>(d) && m.size() <= static_cast<std::size_t>(d * (d + 1) / 2);
    }
    double basis_err = 0.0;
    for (Eigen::Index d = 1; d <= 10; ++d) {
        Matrix M(d, d);
        for (Eigen::Index j = 0; j < d; ++j) M.col(j) = standard_normal(d, rng);
        const Matrix Q = Eigen::HouseholderQR<Matrix>(M).householderQ();
        std::vector<Vector> f;
        for (Eigen::Index j = 0; j < d; ++j) f.push_back(Q.col(j));
        const DesignMeasure m = frank_wolfe_design(f, 0.01, 100000);
        basis_err = std::max(basis_err, std::abs(design_g_value(m, f) - static_cast<double>(d)));
        ok = ok && m.size() <= static_cast<std::size_t>(d * (d + 1) / 2);
    }
    const double secs = seconds_since(t0);
    ok = ok && basis_err <= 1e-9 && secs < 10.0;
    return {ok, "max g/d " + fmt("%.5f", worst) + " (limit 1.01), orthonormal |g - d| " + fmt("%.2g", basis_err) +
                    ", " + fmt("%.1f s", secs) + " (budget 10 s)"};
}

Verdict elliptical_potential() {
    return {potentials.runs > 0 && potentials.violations == 0,
            std::to_string(potentials.runs) + " logged runs, " + std::to_string(potentials.violations) +
                " violations, largest sum / bound " + fmt("%.3f", potentials.worst_ratio)};
}

Verdict feasibility() {
    const auto t0 = std::chrono::steady_clock::now();
    int success = 0, over_budget = 0, bad_points = 0;
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index d = 2 + t % 7;
        Rng rng = make_stream(5000 + static_cast<std::uint64_t>(t), 0);
        const double r = 0.05;
        Vector c(d), w(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            c[i] = (2.0 * uniform01(rng) - 1.0) * 0.9;
            w[i] = r * (1.0 + uniform01(rng));
        }
        std::vector<Vector> A;
        std::vector<double> b;
        for (Eigen::Index j = 0; j < 2 * d; ++j) {
            const Vector a = standard_normal(d, rng);
            A.push_back(a);
            b.push_back(a.dot(c) + r * a.lpNorm<1>() * (1.0 + uniform01(rng)));
        }
        ConvexProblem p;
        p.dim = d;
        p.r = r;
        p.R = 1.0;
        p.delta = 0.1;
        p.oracle = [&](const Vector& z) -> std::optional<Halfspace> {
            for (Eigen::Index i = 0; i < d; ++i) {
                if (z[i] - c[i] > w[i]) return Halfspace{Vector::Unit(d, i), c[i] + w[i]};
                if (c[i] - z[i] > w[i]) return Halfspace{-Vector::Unit(d, i), w[i] - c[i]};
            }
            for (std::size_t j = 0; j < A.size(); ++j) {
                if (A[j].dot(z) > b[j]) return Halfspace{A[j], b[j]};
            }
            return std::nullopt;
        };
        Rng walk = make_stream(static_cast<std::uint64_t>(t), Stream::walk);
        const FeasibilityResult res = solve_feasibility(p, WalkConfig{}, walk);
        const double limit = 2.0 * static_cast<double>(d) * std::log(p.R / (p.delta * p.r));
        if (res.oracle_calls > limit) ++over_budget;
        if (res.point) {
            if (p.oracle(*res.point)) {
                ++bad_points;
            } else {
                ++success;
            }
        }
    }
    const double secs = seconds_since(t0);
    return {success >= 90 && over_budget == 0 && bad_points == 0 && secs < 300.0,
            "success " + std::to_string(success) + "/100, over call budget " + std::to_string(over_budget) +
                ", unverified points " + std::to_string(bad_points) + ", " + fmt("%.1f s", secs) +
                " (budget 300 s)"};
}

Verdict oracle_equivalence() {
    Rng rng(31337);
    int failures = 0, broken = 0;
    double worst_sum_ratio = 0.0, worst_violation = 0.0, worst_gap = 0.0;
    const double eps = 1e-3;
    for (int k = 0; k < 50; ++k) {
        const Eigen::Index d = 2 + k % 5;
        std::vector<Vector> feats;
        for (Eigen::Index i = 0; i < 2 * d; ++i) feats.push_back(standard_normal(d, rng).normalized());
        const LinOpt lo(feats);
        const Vector theta_star = 0.5 * standard_normal(d, rng);
        RegressionProblem p;
        const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(2 * d));
        for (int i = 0; i < n; ++i) {
            const Vector& f = feats[rng() % feats.size()];
            p.features.push_back(f);
            p.targets.push_back(theta_star.dot(f));
        }
        p.W = lo.max_abs(theta_star);
        ApxOptions opt;
        opt.eps = eps;
        try {
            const Vector th = apx_value_oracle(p, opt, lo, rng);
            double abs_sum = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) abs_sum += std::abs(th.dot(p.features[i]) - p.targets[i]);
            const double violation = std::max(0.0, lo.max_abs(th) - p.W);
            const LsqResult exact = exact_lsq(p, lo);
            const double gap = p.objective(th) - p.objective(exact.theta);
            worst_sum_ratio = std::max(worst_sum_ratio, abs_sum / (static_cast<double>(n) * eps));
            worst_violation = std::max(worst_violation, violation);
            worst_gap = std::max(worst_gap, gap / (static_cast<double>(n) * eps));
            if (abs_sum > static_cast<double>(n) * eps || violation > eps || gap < -1e-12 ||
                gap > static_cast<double>(n) * eps || exact.theta.size() != d) {
                ++broken;
            }
        } catch (const OracleFailure&) {
            ++failures;
        }
    }
    return {failures == 0 && broken == 0,
            "50 systems, " + std::to_string(failures) + " oracle failures, " + std::to_string(broken) +
                " contract breaks; max residual sum / (n eps) " + fmt("%.3f", worst_sum_ratio) +
                ", max violation " + fmt("%.2g", worst_violation) + ", max objective gap / (n eps) " +
                fmt("%.2g", worst_gap)};
}

Verdict lqr_lbc() {
    const AnyEnv env = load_env((kSource / "fixtures" / "lqr.json").string());
    const LbcReport rep = std::visit([](const auto& e) { return verify_lbc(e, 100, 0); }, env);
    return {rep.max_backup_residual <= 1e-6 && rep.probes == 100,
            "max backup residual " + fmt("%.3g", rep.max_backup_residual) + " over " + std::to_string(rep.probes) +
                " probes, d = " + std::to_string(std::visit([](const auto& e) { return long(e.dim()); }, env))};
}

Verdict regret_behaviour() {
    RunConfig alg = load_config((kSource / "configs" / "hidden_reward.cfg").string());
    RunConfig greedy = load_config((kSource / "configs" / "hidden_reward_greedy.cfg").string());
    alg.T = greedy.T = 2000;
    const RunOutcome a = run_quiet(alg);
    const RunOutcome g = run_quiet(greedy);
    const double r500 = a.regret_cum[499], r2000 = a.final_regret();
    const bool sub = r2000 / 2000.0 <= 0.5 * r500 / 500.0;
    const bool below = r2000 < g.final_regret();
    return {sub && below, "scale_override " + fmt_num(alg.scale_override) + ": Reg_500 " + fmt("%.2f", r500) +
                              ", Reg_2000 " + fmt("%.2f", r2000) + " (per-round ratio " +
                              fmt("%.3f", (r2000 / 2000.0) / (r500 / 500.0)) + ", limit 0.5); greedy Reg_2000 " +
                              fmt("%.2f", g.final_regret())};
}

Verdict determinism() {
    const fs::path base = fs::temp_directory_path() / ("nsrlsvi_accept_" + std::to_string(::getpid()));
    int compared = 0, mismatched = 0;
    for (const auto& path : shipped_configs()) {
        RunConfig cfg = load_config(path.string());
        cfg.T = std::min(cfg.T, 500L);
        const fs::path a = base / (cfg.name + "_a"), b = base / (cfg.name + "_b");
        run_config(cfg, a);
        run_config(cfg, b);
        const auto bytes = [](const fs::path& p) {
            std::ifstream in(p / "metrics.csv", std::ios::binary);
            std::ostringstream s;
            s << in.rdbuf();
            return s.str();
        };
        ++compared;
        if (bytes(a) != bytes(b) || bytes(a).empty()) ++mismatched;
    }
    fs::remove_all(base);
    return {compared > 0 && mismatched == 0,
            std::to_string(compared) + " configs run twice, " + std::to_string(mismatched) + " differing metrics.csv"};
}

}  // namespace

int main() {
    struct Item {
        int id;
        const char* name;
        std::function<Verdict()> check;
    };
    // Criterion 5 reads the potential logged by earlier runs, so it goes last.
    const std::vector<Item> items{{1, "span budget", span_budget},
                                  {2, "in-span exactness", in_span_exactness},
                                  {3, "optimism frequency", optimism_frequency},
                                  {4, "D-optimal design certificate", design_certificate},
                                  {6, "feasibility solver", feasibility},
                                  {7, "oracle equivalence", oracle_equivalence},
                                  {8, "LQR linear Bellman completeness", lqr_lbc},
                                  {9, "regret behaviour", regret_behaviour},
                                  {10, "determinism", determinism},
                                  {5, "elliptical potential", elliptical_potential}};
    std::vector<std::string> lines(11);
    int failed = 0;
    for (const auto& item : items) {
        Verdict v;
        try {
            v = item.check();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        lines[static_cast<std::size_t>(item.id)] = "criterion " + std::to_string(item.id) + " " +
                                                   (v.pass ? "PASS" : "FAIL") + ": " + item.name + " (" + v.detail +
                                                   ")";
        std::fprintf(stderr, "[done %d]\n", item.id);
    }
    for (int i = 1; i <= 10; ++i) std::printf("%s\n", lines[static_cast<std::size_t>(i)].c_str());
    return std::min(failed, 10);
}
