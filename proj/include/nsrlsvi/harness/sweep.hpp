#pragma once

// Runs every config over a seed list concurrently and aggregates per config.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "nsrlsvi/harness/run.hpp"

namespace nsrlsvi {

struct SweepJob {
    RunConfig config;
    std::uint64_t seed = 0;
};

struct SweepRun {
    std::string config;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    RunOutcome outcome;
};

struct SweepReport {
    std::vector<SweepRun> runs;  // in job order
    long failures() const {
        long n = 0;
        for (const auto& r : runs) n += r.ok ? 0 : 1;
        return n;
    }
};

inline std::vector<SweepJob> expand_jobs(const std::vector<RunConfig>& configs, const std::vector<std::uint64_t>& seeds) {
    std::vector<SweepJob> jobs;
    for (const auto& c : configs) {
        for (auto s : seeds) jobs.push_back({c, s});
    }
    return jobs;
}

/// Runs every job with `jobs` worker threads. Each run writes under
/// out/<config>/seed_<seed>; failures are recorded and do not stop the sweep.
/// sweep.csv and sweep_summary.txt are written to `out`.
inline SweepReport run_sweep(const std::vector<SweepJob>& work, int jobs, const std::filesystem::path& out) {
    SweepReport report;
    report.runs.resize(work.size());
    std::filesystem::create_directories(out);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            SweepRun& r = report.runs[i];
            RunConfig cfg = work[i].config;
            cfg.seed = work[i].seed;
            r.config = cfg.name.empty() ? "config" + std::to_string(i) : cfg.name;
            r.seed = cfg.seed;
            try {
                r.outcome = run_config(cfg, out / r.config / ("seed_" + std::to_string(cfg.seed)));
                r.ok = true;
            } catch (const std::exception& e) {
                r.error = e.what();
            }
        }
    };
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(work.size(), 1))));
    std::vector<std::thread> pool;
    for (int k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    // Aggregate per config over successful runs, round by round.
    std::map<std::string, std::vector<const SweepRun*>> groups;
    std::vector<std::string> order;
    for (const auto& r : report.runs) {
        if (!groups.count(r.config)) order.push_back(r.config);
        groups[r.config];
        if (r.ok) groups[r.config].push_back(&r);
    }

    std::ofstream csv(out / "sweep.csv");
    csv << "config,seed,round,regret_cum,mean_regret_cum,stderr_regret_cum\n";
    std::ofstream summary(out / "sweep_summary.txt");
    for (const auto& name : order) {
        const auto& runs = groups[name];
        std::size_t rounds = 0;
        for (const auto* r : runs) rounds = std::max(rounds, r->outcome.regret_cum.size());
        std::vector<double> mean(rounds, 0.0), se(rounds, 0.0);
        for (std::size_t t = 0; t < rounds; ++t) {
            double s = 0.0, s2 = 0.0;
            std::size_t k = 0;
            for (const auto* r : runs) {
                if (t >= r->outcome.regret_cum.size()) continue;
                const double v = r->outcome.regret_cum[t];
                s += v;
                s2 += v * v;
                ++k;
            }
            mean[t] = s / static_cast<double>(k);
            if (k > 1) {
                const double var = std::max(0.0, (s2 - static_cast<double>(k) * mean[t] * mean[t]) / static_cast<double>(k - 1));
                se[t] = std::sqrt(var / static_cast<double>(k));
            }
        }
        for (const auto* r : runs) {
            for (std::size_t t = 0; t < r->outcome.regret_cum.size(); ++t) {
                csv << name << ',' << r->seed << ',' << t + 1 << ',' << fmt_num(r->outcome.regret_cum[t]) << ','
                    << fmt_num(mean[t]) << ',' << fmt_num(se[t]) << '\n';
            }
        }

        long optimistic = 0, rounds_total = 0, span_events = 0, potential_violations = 0, failed = 0;
        for (const auto& r : report.runs) {
            if (r.config == name && !r.ok) ++failed;
        }
        for (const auto* r : runs) {
            optimistic += r->outcome.optimistic;
            rounds_total += r->outcome.T;
            span_events += r->outcome.span_events;
            if (!r->outcome.potential_ok()) ++potential_violations;
        }
        summary << "[" << name << "]\nruns = " << runs.size() << "\nfailures = " << failed
                << "\noptimism_frequency = "
                << fmt_num(rounds_total ? static_cast<double>(optimistic) / static_cast<double>(rounds_total) : 0.0)
                << "\nspan_events_total = " << span_events << "\npotential_violations = " << potential_violations
                << "\nmean_final_regret = " << fmt_num(rounds ? mean.back() : 0.0)
                << "\nstderr_final_regret = " << fmt_num(rounds ? se.back() : 0.0) << "\n\n";
    }
    for (const auto& r : report.runs) {
        if (!r.ok) summary << "failed " << r.config << " seed " << r.seed << ": " << r.error << "\n";
    }
    return report;
}

}  // namespace nsrlsvi
