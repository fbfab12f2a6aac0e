// config.hpp - flat "section.key = value" run configuration
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "evolve.hpp"
#include "model.hpp"
#include "trajectories.hpp"

namespace noisesync {

// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

enum class Engine { jw, reference, trajectories };

inline const char* to_string(Engine e) {
    switch (e) {
        case Engine::jw: return "jw";
        case Engine::reference: return "reference";
        case Engine::trajectories: return "trajectories";
    }
    return "?";
}

struct RunConfig {
    int n_sites = 5;
    double coupling = 1.0;
    double field = 1.0;
    std::vector<int> sites{3};
    double gamma = 0.2;
    NoiseCoupling noise_coupling = NoiseCoupling::shared;
    std::vector<double> populations;  // empty: one excitation on site 1
    double t_max = 200.0;
    double dt = 0.05;
    int n_points = 0;  // > 0 replaces dt by t_max / (n_points - 1)
    Engine engine = Engine::jw;
    double traj_dt = 1e-3;
    double traj_t_max = 10.0;
    long n_traj = 10000;
    Scheme scheme = Scheme::exponential_midpoint;
    int sample_every = 100;
    std::string diagnostics;
    double window = 4 * std::numbers::pi;
    std::vector<int> sweep_n{5, 8, 11, 14, 17, 20};
    double sweep_gamma_min = 1e-3;
    double sweep_gamma_max = 10.0;
    int sweep_gamma_points = 60;
    double tq_coupling = 1.0;
    double tq_gamma = 2.0;
    double tq_p1 = 1.0;
    double tq_p2 = 0.0;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    int workers = 0;

    bool operator==(const RunConfig&) const = default;

    ChainSpec chain() const { return {n_sites, coupling, field}; }
    NoiseSpec noise() const { return {sites, gamma, noise_coupling}; }
    std::vector<double> initial_populations() const {
        if (!populations.empty()) return populations;
        std::vector<double> p(n_sites, 0.0);
        p[0] = 1.0;
        return p;
    }
    InitialState initial() const { return InitialState::from_populations(initial_populations()); }
    std::vector<double> time_grid() const {
        if (n_points > 0) {
            std::vector<double> g(n_points);
            for (int i = 0; i < n_points; ++i) g[i] = n_points == 1 ? 0.0 : t_max * i / (n_points - 1);
            return g;
        }
        return uniform_grid(t_max, dt);
    }
    TrajectoryConfig trajectory() const {
        TrajectoryConfig t;
        t.dt = traj_dt;
        t.t_max = traj_t_max;
        t.n_traj = n_traj;
        t.seed = seed;
        t.scheme = scheme;
        t.sample_every = sample_every;
        t.workers = workers;
        return t;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError(key + ": expected a finite number, got '" + v + "'");
    return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
    Int out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
    return parts;
}

// Accepts "1,2", "[1, 2]" and the empty list.
inline std::vector<std::string> list_items(const std::string& key, std::string v) {
    v = trim(v);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') throw ConfigError(key + ": unterminated list '" + v + "'");
        v = trim(std::string_view(v).substr(1, v.size() - 2));
    }
    if (v.empty()) return {};
    auto items = split(v, ',');
    for (const auto& it : items)
        if (it.empty()) throw ConfigError(key + ": empty list element in '" + v + "'");
    return items;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F fmt) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

}  // namespace detail

inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "chain.n_sites",    "chain.coupling",     "chain.field",       "noise.sites",          "noise.gamma",
        "noise.coupling",   "initial.populations", "time.t_max",       "time.dt",              "time.n_points",
        "engine",           "traj.dt",            "traj.t_max",        "traj.n_traj",          "traj.scheme",
        "traj.sample_every", "diagnostics",       "diagnostics.window", "sweep.n_values",      "sweep.gamma_min",
        "sweep.gamma_max",  "sweep.gamma_points", "twoqubit.coupling", "twoqubit.gamma",       "twoqubit.p1",
        "twoqubit.p2",      "output.dir",         "seed",              "workers"};
    return keys;
}

// Field-level syntax only; cross-field bounds are checked by validate_config.
inline void set_key(RunConfig& c, const std::string& key, const std::string& raw) {
    using namespace detail;
    const std::string v = trim(raw);
    if (key == "chain.n_sites") c.n_sites = parse_int<int>(key, v);
    else if (key == "chain.coupling") c.coupling = parse_double(key, v);
    else if (key == "chain.field") c.field = parse_double(key, v);
    else if (key == "noise.sites") {
        c.sites.clear();
        for (const auto& s : list_items(key, v)) c.sites.push_back(parse_int<int>(key, s));
    } else if (key == "noise.gamma") c.gamma = parse_double(key, v);
    else if (key == "noise.coupling") {
        if (v == "shared") c.noise_coupling = NoiseCoupling::shared;
        else if (v == "independent") c.noise_coupling = NoiseCoupling::independent;
        else throw ConfigError(key + ": expected 'shared' or 'independent', got '" + v + "'");
    } else if (key == "initial.populations") {
        c.populations.clear();
        for (const auto& s : list_items(key, v)) c.populations.push_back(parse_double(key, s));
    } else if (key == "time.t_max") c.t_max = parse_double(key, v);
    else if (key == "time.dt") c.dt = parse_double(key, v);
    else if (key == "time.n_points") c.n_points = parse_int<int>(key, v);
    else if (key == "engine") {
        if (v == "jw") c.engine = Engine::jw;
        else if (v == "reference") c.engine = Engine::reference;
        else if (v == "trajectories") c.engine = Engine::trajectories;
        else throw ConfigError(key + ": expected jw | reference | trajectories, got '" + v + "'");
    } else if (key == "traj.dt") c.traj_dt = parse_double(key, v);
    else if (key == "traj.t_max") c.traj_t_max = parse_double(key, v);
    else if (key == "traj.n_traj") c.n_traj = parse_int<long>(key, v);
    else if (key == "traj.scheme") {
        std::string name = v;
        std::replace(name.begin(), name.end(), '_', '-');
        bool found = false;
        for (Scheme s : {Scheme::exponential_midpoint, Scheme::stratonovich_heun, Scheme::euler_maruyama})
            if (name == to_string(s)) c.scheme = s, found = true;
        if (!found)
            throw ConfigError(key + ": expected exponential-midpoint | stratonovich-heun | euler-maruyama, got '" + v + "'");
    } else if (key == "traj.sample_every") c.sample_every = parse_int<int>(key, v);
    else if (key == "diagnostics") c.diagnostics = v;
    else if (key == "diagnostics.window") c.window = parse_double(key, v);
    else if (key == "sweep.n_values") {
        c.sweep_n.clear();
        for (const auto& s : list_items(key, v)) c.sweep_n.push_back(parse_int<int>(key, s));
    } else if (key == "sweep.gamma_min") c.sweep_gamma_min = parse_double(key, v);
    else if (key == "sweep.gamma_max") c.sweep_gamma_max = parse_double(key, v);
    else if (key == "sweep.gamma_points") c.sweep_gamma_points = parse_int<int>(key, v);
    else if (key == "twoqubit.coupling") c.tq_coupling = parse_double(key, v);
    else if (key == "twoqubit.gamma") c.tq_gamma = parse_double(key, v);
    else if (key == "twoqubit.p1") c.tq_p1 = parse_double(key, v);
    else if (key == "twoqubit.p2") c.tq_p2 = parse_double(key, v);
    else if (key == "output.dir") {
        if (v.empty()) throw ConfigError(key + ": must not be empty");
        c.output_dir = v;
    } else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, v);
    else if (key == "workers") c.workers = parse_int<int>(key, v);
    else throw ConfigError("unknown configuration key '" + key + "'");
}

inline std::string get_key(const RunConfig& c, const std::string& key) {
    using detail::join;
    auto i2s = [](auto x) { return std::to_string(x); };
    if (key == "chain.n_sites") return i2s(c.n_sites);
    if (key == "chain.coupling") return format_double(c.coupling);
    if (key == "chain.field") return format_double(c.field);
    if (key == "noise.sites") return join(c.sites, i2s);
    if (key == "noise.gamma") return format_double(c.gamma);
    if (key == "noise.coupling") return to_string(c.noise_coupling);
    if (key == "initial.populations") return join(c.populations, format_double);
    if (key == "time.t_max") return format_double(c.t_max);
    if (key == "time.dt") return format_double(c.dt);
    if (key == "time.n_points") return i2s(c.n_points);
    if (key == "engine") return to_string(c.engine);
    if (key == "traj.dt") return format_double(c.traj_dt);
    if (key == "traj.t_max") return format_double(c.traj_t_max);
    if (key == "traj.n_traj") return i2s(c.n_traj);
    if (key == "traj.scheme") return to_string(c.scheme);
    if (key == "traj.sample_every") return i2s(c.sample_every);
    if (key == "diagnostics") return c.diagnostics;
    if (key == "diagnostics.window") return format_double(c.window);
    if (key == "sweep.n_values") return join(c.sweep_n, i2s);
    if (key == "sweep.gamma_min") return format_double(c.sweep_gamma_min);
    if (key == "sweep.gamma_max") return format_double(c.sweep_gamma_max);
    if (key == "sweep.gamma_points") return i2s(c.sweep_gamma_points);
    if (key == "twoqubit.coupling") return format_double(c.tq_coupling);
    if (key == "twoqubit.gamma") return format_double(c.tq_gamma);
    if (key == "twoqubit.p1") return format_double(c.tq_p1);
    if (key == "twoqubit.p2") return format_double(c.tq_p2);
    if (key == "output.dir") return c.output_dir;
    if (key == "seed") return i2s(c.seed);
    if (key == "workers") return i2s(c.workers);
    throw ConfigError("unknown configuration key '" + key + "'");
}

struct PairSelection {
    std::vector<std::pair<int, int>> pearson, concurrence;
};

// "pearson:1-4,2-3;concurrence:1-5"
inline PairSelection parse_diagnostics(const std::string& spec, int n_sites) {
    PairSelection sel;
    if (detail::trim(spec).empty()) return sel;
    for (const auto& group : detail::split(spec, ';')) {
        if (group.empty()) continue;
        const auto colon = group.find(':');
        if (colon == std::string::npos) throw ConfigError("diagnostics: expected name:i-j,... in '" + group + "'");
        const std::string name = detail::trim(group.substr(0, colon));
        std::vector<std::pair<int, int>>* target = nullptr;
        if (name == "pearson") target = &sel.pearson;
        else if (name == "concurrence") target = &sel.concurrence;
        else throw ConfigError("diagnostics: unknown diagnostic '" + name + "' (pearson | concurrence)");
        for (const auto& item : detail::list_items("diagnostics", group.substr(colon + 1))) {
            const auto dash = item.find('-');
            if (dash == std::string::npos) throw ConfigError("diagnostics: expected a site pair i-j, got '" + item + "'");
            const int i = detail::parse_int<int>("diagnostics", detail::trim(item.substr(0, dash)));
            const int j = detail::parse_int<int>("diagnostics", detail::trim(item.substr(dash + 1)));
            for (int s : {i, j})
                if (s < 1 || s > n_sites)
                    throw ConfigError("diagnostics: site index " + std::to_string(s) + " out of range [1," +
                                      std::to_string(n_sites) + "]");
            if (i == j) throw ConfigError("diagnostics: pair " + item + " needs two different sites");
            target->push_back({i, j});
        }
    }
    return sel;
}

inline void validate_config(const RunConfig& c) {
    auto fail = [](const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); };
    if (c.n_sites < 2) fail("chain.n_sites", "must be >= 2, got " + std::to_string(c.n_sites));
    if (!(c.coupling > 0)) fail("chain.coupling", "must be > 0, got " + format_double(c.coupling));
    for (std::size_t a = 0; a < c.sites.size(); ++a) {
        if (c.sites[a] < 1 || c.sites[a] > c.n_sites)
            fail("noise.sites", "site index " + std::to_string(c.sites[a]) + " out of range [1," +
                                    std::to_string(c.n_sites) + "]");
        for (std::size_t b = 0; b < a; ++b)
            if (c.sites[a] == c.sites[b]) fail("noise.sites", "duplicate site " + std::to_string(c.sites[a]));
    }
    if (!(c.gamma >= 0)) fail("noise.gamma", "must be >= 0, got " + format_double(c.gamma));
    if (!c.populations.empty()) {
        if (int(c.populations.size()) != c.n_sites)
            fail("initial.populations", "needs " + std::to_string(c.n_sites) + " entries, got " +
                                            std::to_string(c.populations.size()));
        for (double p : c.populations)
            if (p < 0 || p > 1) fail("initial.populations", "entries must lie in [0,1], got " + format_double(p));
    }
    if (!(c.t_max >= 0)) fail("time.t_max", "must be >= 0");
    if (!(c.dt > 0)) fail("time.dt", "must be > 0");
    if (c.n_points < 0 || c.n_points == 1) fail("time.n_points", "must be 0 (use dt) or >= 2");
    if (!(c.traj_dt > 0)) fail("traj.dt", "must be > 0");
    if (!(c.traj_t_max >= c.traj_dt)) fail("traj.t_max", "must be >= traj.dt");
    if (c.n_traj < 1) fail("traj.n_traj", "must be >= 1");
    if (c.sample_every < 1) fail("traj.sample_every", "must be >= 1");
    parse_diagnostics(c.diagnostics, c.n_sites);
    if (!(c.window > 0)) fail("diagnostics.window", "must be > 0");
    for (std::size_t i = 0; i < c.sweep_n.size(); ++i) {
        if (c.sweep_n[i] < 2) fail("sweep.n_values", "entries must be >= 2");
        if (i > 0 && c.sweep_n[i] <= c.sweep_n[i - 1]) fail("sweep.n_values", "must be strictly increasing");
    }
    if (!(c.sweep_gamma_min > 0)) fail("sweep.gamma_min", "must be > 0");
    if (!(c.sweep_gamma_max > c.sweep_gamma_min)) fail("sweep.gamma_max", "must exceed sweep.gamma_min");
    if (c.sweep_gamma_points < 3) fail("sweep.gamma_points", "must be >= 3");
    if (!(c.tq_coupling > 0)) fail("twoqubit.coupling", "must be > 0");
    if (!(c.tq_gamma >= 0)) fail("twoqubit.gamma", "must be >= 0");
    if (c.tq_p1 < 0 || c.tq_p1 > 1) fail("twoqubit.p1", "must lie in [0,1]");
    if (c.tq_p2 < 0 || c.tq_p2 > 1) fail("twoqubit.p2", "must lie in [0,1]");
    if (c.workers < 0) fail("workers", "must be >= 0");
}

// Lines "key = value"; '#' starts a comment; later lines override earlier ones.
inline void apply_config_text(RunConfig& c, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        set_key(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
    apply_config_text(base, text);
    validate_config(base);
    return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot read '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

inline std::string emit_config(const RunConfig& c) {
    std::string out;
    for (const auto& k : config_keys()) out += k + " = " + get_key(c, k) + "\n";
    return out;
}

}  // namespace noisesync
