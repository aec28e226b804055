#pragma once

// Flat "key = value" run configuration.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <locale>
#include <optional>
#include <sstream>
#include <string>

#include "nsrlsvi/agent.hpp"
#include "nsrlsvi/errors.hpp"

namespace nsrlsvi {

struct RunConfig {
    std::string env;  // env file path, resolved against the config file's directory
    long T = 1000;
    std::uint64_t seed = 0;
    OracleMode oracle = OracleMode::exact;
    PolicyKind policy = PolicyKind::nsrlsvi;
    double eps1 = 0.0, eps2 = 0.0;
    std::optional<double> eps_b;
    std::optional<double> gamma;
    double scale_override = 1.0;
    bool known_reward = false;
    std::string output = "out";
    double oracle_eps = 1e-3;
    double oracle_delta = 0.1;
    double design_eps = 0.01;
    int design_max_iter = 100000;
    bool timing = false;
    std::string name;  // config file stem, used by sweeps

    AgentOptions agent_options() const {
        AgentOptions o;
        o.oracle = oracle;
        o.policy = policy;
        o.known_reward = known_reward;
        o.apx.eps = oracle_eps;
        o.apx.delta = oracle_delta;
        o.design_eps = design_eps;
        o.design_max_iter = design_max_iter;
        o.eps1 = eps1;
        o.eps2 = eps2;
        o.eps_b = eps_b;
        o.gamma = gamma;
        o.scale_override = scale_override;
        o.T = std::max(T, 1L);
        o.timing = timing;
        return o;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

class FieldParser {
public:
    FieldParser(std::string key, std::string value, int line)
        : key_(std::move(key)), value_(std::move(value)), line_(line) {}

    double real() const {
        std::istringstream in(value_);
        in.imbue(std::locale::classic());
        double v;
        if (!(in >> v) || !(in >> std::ws).eof()) fail("a real number");
        return v;
    }
    long integer() const {
        std::istringstream in(value_);
        long v;
        if (!(in >> v) || !(in >> std::ws).eof()) fail("an integer");
        return v;
    }
    std::uint64_t unsigned_integer() const {
        if (value_.empty() || value_[0] == '-') fail("a nonnegative integer");
        std::istringstream in(value_);
        std::uint64_t v;
        if (!(in >> v) || !(in >> std::ws).eof()) fail("a nonnegative integer");
        return v;
    }
    bool boolean() const {
        if (value_ == "true" || value_ == "1" || value_ == "yes") return true;
        if (value_ == "false" || value_ == "0" || value_ == "no") return false;
        fail("a boolean (true/false)");
        return false;
    }
    const std::string& text() const { return value_; }

    [[noreturn]] void fail(const std::string& expected) const {
        throw ConfigError("config line " + std::to_string(line_) + ": field '" + key_ + "' expects " + expected +
                          ", got '" + value_ + "'");
    }

private:
    std::string key_, value_;
    int line_;
};

}  // namespace detail

/// Parses config text. `base_dir` is prepended to a relative env path; the
/// output directory stays relative to the working directory.
inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
    RunConfig c;
    std::string line;
    int lineno = 0;
    bool have_env = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const detail::FieldParser f(key, detail::trim(line.substr(eq + 1)), lineno);
        if (key == "env") {
            std::filesystem::path p(f.text());
            c.env = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
            have_env = true;
        } else if (key == "T") {
            c.T = f.integer();
            if (c.T < 0) f.fail("a nonnegative integer");
        } else if (key == "seed") {
            c.seed = f.unsigned_integer();
        } else if (key == "oracle") {
            if (f.text() == "exact") c.oracle = OracleMode::exact;
            else if (f.text() == "approximate") c.oracle = OracleMode::approximate;
            else f.fail("exact or approximate");
        } else if (key == "policy") {
            if (f.text() == "nsrlsvi") c.policy = PolicyKind::nsrlsvi;
            else if (f.text() == "greedy") c.policy = PolicyKind::greedy;
            else if (f.text() == "random") c.policy = PolicyKind::random;
            else f.fail("nsrlsvi, greedy or random");
        } else if (key == "eps1") {
            c.eps1 = f.real();
        } else if (key == "eps2") {
            c.eps2 = f.real();
        } else if (key == "eps_b") {
            c.eps_b = f.real();
        } else if (key == "gamma") {
            c.gamma = f.real();
        } else if (key == "scale_override") {
            c.scale_override = f.real();
            if (!(c.scale_override >= 0.0)) f.fail("a nonnegative real");
        } else if (key == "known_reward") {
            c.known_reward = f.boolean();
        } else if (key == "output") {
            c.output = f.text();
        } else if (key == "oracle_eps") {
            c.oracle_eps = f.real();
            if (!(c.oracle_eps > 0.0)) f.fail("a positive real");
        } else if (key == "oracle_delta") {
            c.oracle_delta = f.real();
            if (!(c.oracle_delta > 0.0 && c.oracle_delta < 1.0)) f.fail("a real in (0,1)");
        } else if (key == "design_eps") {
            c.design_eps = f.real();
            if (!(c.design_eps > 0.0)) f.fail("a positive real");
        } else if (key == "design_max_iter") {
            c.design_max_iter = static_cast<int>(f.integer());
        } else if (key == "timing") {
            c.timing = f.boolean();
        } else {
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown field '" + key + "'");
        }
    }
    if (!have_env) throw ConfigError("config: missing required field 'env'");
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    const std::filesystem::path p(path);
    RunConfig c = parse_config(in, p.parent_path());
    c.name = p.stem().string();
    return c;
}

/// NSRLSVI_SEED, when set, replaces the configured seed.
inline void apply_seed_override(RunConfig& c) {
    if (const char* s = std::getenv("NSRLSVI_SEED"); s && *s) {
        c.seed = detail::FieldParser("NSRLSVI_SEED", s, 0).unsigned_integer();
    }
}

}  // namespace nsrlsvi
