// cli.hpp - subcommand implementations behind the noisesync executable
#pragma once

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "diagnostics.hpp"
#include "evolve.hpp"
#include "output.hpp"
#include "perturbation.hpp"
#include "reference.hpp"
#include "sweep.hpp"
#include "trajectories.hpp"

namespace noisesync::cli {

using nlohmann::json;

enum ExitCode { ok = 0, io_failure = 1, config_error = 2, precondition_error = 3, numerical_error = 4 };

inline constexpr const char* kOutputDirEnv = "NOISESYNC_OUTPUT_DIR";

inline std::string pair_label(const char* prefix, std::pair<int, int> p) {
    return std::string(prefix) + "_" + std::to_string(p.first) + "_" + std::to_string(p.second);
}

inline std::vector<std::string> site_header(const char* first, const char* prefix, int n) {
    std::vector<std::string> h{first};
    for (int j = 1; j <= n; ++j) h.push_back(prefix + std::to_string(j));
    return h;
}

inline json timing_json(const SyncTiming& t) {
    return {{"mu_s", t.mu_s}, {"r", t.r}, {"tau_s", t.tau_s}, {"r_unfiltered", t.r_unfiltered},
            {"tau_s_unfiltered", t.tau_s_unfiltered}};
}

// Synchronization timing where it exists; absent for gamma = 0 or fully damped spectra.
inline std::optional<SyncTiming> try_timing(const ChainSpec& chain, const NoiseSpec& noise) {
    if (noise.gamma == 0.0 || noise.sites.empty()) return std::nullopt;
    try {
        return sync_timing(chain, noise);
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

inline json run_modes(const RunConfig& cfg, OutputSet& out, std::ostream& os) {
    const auto table = mode_table(cfg.chain(), cfg.noise(), cfg.initial());
    CsvTable csv({"k", "l", "frequency", "degeneracy", "m", "m_exact", "partner_k", "partner_l", "amplitude_re",
                  "amplitude_im"});
    for (const auto& e : table.entries)
        csv.add_text_row({std::to_string(e.k), std::to_string(e.l), format_double(e.frequency), to_string(e.degeneracy),
                          format_double(e.decay), e.decay_exact ? e.decay_exact->str() : "",
                          e.partner ? std::to_string(e.partner->first) : "",
                          e.partner ? std::to_string(e.partner->second) : "", format_double(e.amplitude.real()),
                          format_double(e.amplitude.imag())});
    out.write("modes.csv", csv.str());
    os << "pairs: " << table.entries.size() << "\npartner classes: " << table.partner_classes
       << "\ndistinct frequencies: " << table.distinct_frequencies << "\n";
    for (const auto& e : table.entries)
        os << "  (" << e.k << "," << e.l << ") freq " << format_double(e.frequency) << "  m "
           << (e.decay_exact ? e.decay_exact->str() : format_double(e.decay)) << "  " << to_string(e.degeneracy) << "\n";
    return {{"pairs", table.entries.size()}, {"partner_classes", table.partner_classes},
            {"distinct_frequencies", table.distinct_frequencies}};
}

inline json run_sync_check(const RunConfig& cfg, OutputSet& out, std::ostream& os) {
    const auto rep = sync_condition(cfg.chain(), cfg.noise());
    json j{{"satisfied", rep.satisfied}, {"zero_modes", rep.zero_modes}, {"decay_gap", rep.decay_gap},
           {"admissible_sites", rep.admissible_sites}};
    os << "satisfied: " << (rep.satisfied ? "yes" : "no") << "\n";
    os << "zero-rate modes: " << rep.zero_modes << "\n";
    if (rep.surviving_pair) {
        j["surviving_pair"] = {rep.surviving_pair->first, rep.surviving_pair->second};
        os << "surviving pair: (" << rep.surviving_pair->first << "," << rep.surviving_pair->second << ")\n";
    }
    if (rep.stable_mode) {
        std::vector<double> v(rep.stable_mode->data(), rep.stable_mode->data() + rep.stable_mode->size());
        j["stable_mode"] = v;
        os << "stable mode:";
        for (double x : v) os << " " << format_double(x);
        os << "\n";
    }
    if (rep.frequency) {
        j["frequency"] = *rep.frequency;
        os << "frequency: " << format_double(*rep.frequency) << "\n";
    }
    if (rep.end_relation) {
        j["end_relation"] = to_string(*rep.end_relation);
        os << "end sites: " << to_string(*rep.end_relation) << "\n";
    }
    os << "decay gap (first order, per unit gamma): " << format_double(rep.decay_gap) << "\n";
    os << "admissible single sites:";
    for (int u : rep.admissible_sites) os << " " << u;
    os << "\n";
    if (const auto t = try_timing(cfg.chain(), cfg.noise())) {
        j["timing"] = timing_json(*t);
        os << "r: " << format_double(t->r) << "\ntau_s: " << format_double(t->tau_s) << "\n";
    }
    out.write_json("sync.json", j);
    return j;
}

struct SeriesOut {
    std::vector<double> time;
    Eigen::MatrixXd sz;                   // rows: time
    std::optional<Eigen::MatrixXd> error;  // trajectory standard errors
    Eigen::MatrixXd concurrence;          // rows: time, columns: selected pairs
};

inline SeriesOut evolve_series(const RunConfig& cfg, const PairSelection& sel, json& summary) {
    const ChainSpec chain = cfg.chain();
    const NoiseSpec noise = cfg.noise();
    const int n = chain.n_sites;
    SeriesOut s;
    switch (cfg.engine) {
        case Engine::jw: {
            s.time = cfg.time_grid();
            const auto p = propagate(JwGenerator(chain, noise), cfg.initial(), s.time);
            summary["propagation"] = to_string(p.method);
            summary["fallback"] = p.fallback;
            s.sz.resize(s.time.size(), n);
            s.concurrence.resize(s.time.size(), sel.concurrence.size());
            for (std::size_t t = 0; t < s.time.size(); ++t) {
                s.sz.row(t) = magnetizations(p.states[t].z).transpose();
                for (std::size_t q = 0; q < sel.concurrence.size(); ++q)
                    s.concurrence(t, q) =
                        concurrence_from_z(p.states[t].z, sel.concurrence[q].first, sel.concurrence[q].second);
            }
            break;
        }
        case Engine::reference: {
            s.time = cfg.time_grid();
            s.sz.resize(s.time.size(), n);
            s.concurrence.resize(s.time.size(), sel.concurrence.size());
            std::size_t t = 0;
            lindblad_evolve(chain, noise, product_state(cfg.initial_populations()), s.time, [&](const DensityMatrix& d) {
                s.sz.row(t) = spin_magnetizations(d.rho, n).transpose();
                for (std::size_t q = 0; q < sel.concurrence.size(); ++q)
                    s.concurrence(t, q) = concurrence_wootters(
                        reduced_two_qubit(d.rho, n, sel.concurrence[q].first, sel.concurrence[q].second));
                ++t;
            });
            break;
        }
        case Engine::trajectories: {
            if (!sel.concurrence.empty())
                throw PreconditionError("concurrence needs the averaged state; use --engine jw or reference");
            const auto e = ensemble_average(chain, noise, cfg.initial(), cfg.trajectory());
            s.time = e.grid;
            s.sz = e.mean;
            s.error = e.std_error;
            summary["warnings"] = e.warnings;
            summary["n_traj"] = cfg.n_traj;
            break;
        }
    }
    return s;
}

inline void write_series(const RunConfig& cfg, const SeriesOut& s, const PairSelection& sel, OutputSet& out) {
    const int n = cfg.n_sites;
    CsvTable mag(site_header("tau", "sz_", n));
    for (std::size_t t = 0; t < s.time.size(); ++t) {
        std::vector<std::optional<double>> row{s.time[t]};
        for (int j = 0; j < n; ++j) row.push_back(s.sz(t, j));
        mag.add_row(row);
    }
    out.write("magnetizations.csv", mag.str());
    if (s.error) {
        CsvTable err(site_header("tau", "stderr_", n));
        for (std::size_t t = 0; t < s.time.size(); ++t) {
            std::vector<std::optional<double>> row{s.time[t]};
            for (int j = 0; j < n; ++j) row.push_back((*s.error)(t, j));
            err.add_row(row);
        }
        out.write("magnetizations_stderr.csv", err.str());
    }
    if (!sel.pearson.empty()) {
        std::vector<std::string> header{"tau"};
        std::vector<PearsonSeries> series;
        std::vector<std::vector<double>> cols(n);
        for (int j = 0; j < n; ++j) cols[j].assign(s.sz.col(j).data(), s.sz.col(j).data() + s.time.size());
        for (auto p : sel.pearson) {
            header.push_back(pair_label("C", p));
            series.push_back(pearson({s.time, cols[p.first - 1]}, {s.time, cols[p.second - 1]}, cfg.window, p));
        }
        CsvTable csv(header);
        for (std::size_t t = 0; t < s.time.size(); ++t) {
            std::vector<std::optional<double>> row{s.time[t]};
            for (const auto& ps : series) row.push_back(ps.values[t]);
            csv.add_row(row);
        }
        out.write("pearson.csv", csv.str());
    }
    if (!sel.concurrence.empty()) {
        std::vector<std::string> header{"tau"};
        for (auto p : sel.concurrence) header.push_back(pair_label("concurrence", p));
        CsvTable csv(header);
        for (std::size_t t = 0; t < s.time.size(); ++t) {
            std::vector<std::optional<double>> row{s.time[t]};
            for (Eigen::Index q = 0; q < s.concurrence.cols(); ++q) row.push_back(s.concurrence(t, q));
            csv.add_row(row);
        }
        out.write("concurrence.csv", csv.str());
    }
}

inline json run_evolve(const RunConfig& cfg, OutputSet& out, std::ostream& os) {
    const auto sel = parse_diagnostics(cfg.diagnostics, cfg.n_sites);
    json summary{{"engine", to_string(cfg.engine)}};
    const auto s = evolve_series(cfg, sel, summary);
    write_series(cfg, s, sel, out);
    summary["points"] = s.time.size();
    if (const auto t = try_timing(cfg.chain(), cfg.noise())) summary["timing"] = timing_json(*t);
    os << "engine: " << to_string(cfg.engine) << "\npoints: " << s.time.size() << "\n";
    if (summary.contains("timing"))
        os << "r: " << format_double(summary["timing"]["r"].get<double>())
           << "\ntau_s: " << format_double(summary["timing"]["tau_s"].get<double>()) << "\n";
    if (summary.contains("warnings"))
        for (const auto& w : summary["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
    return summary;
}

inline json run_traj(RunConfig cfg, OutputSet& out, std::ostream& os) {
    cfg.engine = Engine::trajectories;
    return run_evolve(cfg, out, os);
}

inline json run_spectrum(const RunConfig& cfg, OutputSet& out, std::ostream& os) {
    const JwGenerator gen(cfg.chain(), cfg.noise());
    const auto spec = liouville_spectrum(gen, {false, true});
    CsvTable csv({"mu", "lambda", "sector", "magnetization_overlap"});
    for (const auto& m : spec.modes)
        csv.add_text_row({format_double(m.mu), format_double(m.lambda), m.sector == Sector::even ? "even" : "odd",
                          format_double(m.magnetization_overlap)});
    out.write("spectrum.csv", csv.str());
    json summary{{"modes", spec.modes.size()}};
    os << "modes: " << spec.modes.size() << "\n";
    if (cfg.gamma > 0 && !cfg.sites.empty()) {
        try {
            const auto t = extract_rate(spec);
            summary["timing"] = timing_json(t);
            os << "mu_s: " << format_double(t.mu_s) << "\nr: " << format_double(t.r)
               << "\ntau_s: " << format_double(t.tau_s) << "\n";
        } catch (const NumericalError& e) {
            summary["timing_error"] = e.what();
            std::cerr << "warning: " << e.what() << "\n";
        }
    }
    return summary;
}

inline SweepOptions sweep_options(const RunConfig& cfg) {
    SweepOptions o;
    o.workers = cfg.workers;
    return o;
}

inline std::string sweep_csv(const SweepResult& s) {
    CsvTable csv({"gamma", "r", "r_unfiltered"});
    for (std::size_t i = 0; i < s.gamma.size(); ++i) csv.add_row({s.gamma[i], s.r[i], s.r_unfiltered[i]});
    return csv.str();
}

inline json sweep_json(const SweepResult& s) {
    json flags = json::array();
    for (const auto& f : s.continuity_flags)
        flags.push_back({{"gamma_lo", f.gamma_lo}, {"gamma_hi", f.gamma_hi}, {"r_lo", f.r_lo}, {"r_mid", f.r_mid},
                         {"r_hi", f.r_hi}});
    return {{"n_sites", s.n_sites}, {"gamma_opt", s.gamma_opt}, {"r_max", s.r_max}, {"unimodal", s.unimodal},
            {"interior_optimum", s.interior_optimum}, {"refined", s.refined}, {"continuity_flags", flags}};
}

inline json run_sweep(const RunConfig& cfg, OutputSet& out, std::ostream& os) {
    const auto s = rate_curve(cfg.chain(), cfg.sites, log_grid(cfg.sweep_gamma_min, cfg.sweep_gamma_max, cfg.sweep_gamma_points),
                              sweep_options(cfg));
    out.write("sweep.csv", sweep_csv(s));
    os << "gamma_opt: " << format_double(s.gamma_opt) << "\nr_max: " << format_double(s.r_max)
       << "\nsingle optimum: " << (s.single_optimum() ? "yes" : "no") << "\ncontinuity flags: " << s.continuity_flags.size()
       << "\n";
    if (!s.single_optimum()) std::cerr << "warning: r(gamma) has no single interior optimum on this grid\n";
    return sweep_json(s);
}

inline json fit_json(const FitResult& f) {
    return {{"a", f.a}, {"b", f.b}, {"c", f.c}, {"R2", f.r_squared}, {"residual_norm", f.residual_norm},
            {"gradient_norm", f.gradient_norm}, {"restarts", f.restarts}, {"points", f.n_points}};
}

inline json run_fit(const RunConfig& cfg, OutputSet& out, std::ostream& os) {
    if (cfg.sites.size() != 1) throw PreconditionError("fit: the scaling study uses a single noisy site");
    const auto study = scaling_study(cfg.sweep_n, cfg.sites[0],
                                     log_grid(cfg.sweep_gamma_min, cfg.sweep_gamma_max, cfg.sweep_gamma_points),
                                     sweep_options(cfg), cfg.coupling, cfg.field);
    const auto lr = lieb_robinson_report(study, cfg.chain());
    CsvTable table({"N", "gamma_opt", "r_max", "single_optimum"});
    json curves = json::array();
    for (std::size_t i = 0; i < study.curves.size(); ++i) {
        const auto& c = study.curves[i];
        table.add_text_row({std::to_string(c.n_sites), format_double(c.gamma_opt), format_double(c.r_max),
                            c.single_optimum() ? "1" : "0"});
        out.write("sweep_N" + std::to_string(c.n_sites) + ".csv", sweep_csv(c));
        curves.push_back(sweep_json(c));
    }
    out.write("scaling.csv", table.str());
    json fit{{"r_max", fit_json(study.r_max_fit)},
             {"gamma_opt", fit_json(study.gamma_opt_fit)},
             {"lieb_robinson",
              {{"v_lr", lr.v_lr},
               {"loglog_slope", lr.slope},
               {"shifted_slope", lr.shifted_slope},
               {"gamma_opt_plateau", lr.gamma_opt_plateau},
               {"plateau_change", lr.plateau_change},
               {"gamma_opt_decreasing", lr.gamma_opt_decreasing}}}};
    out.write_json("fit.json", fit);
    os << "N   gamma_opt   r_max\n";
    for (std::size_t i = 0; i < study.curves.size(); ++i)
        os << study.n_values[i] << "  " << format_double(study.gamma_opt[i]) << "  " << format_double(study.r_max[i]) << "\n";
    const auto& f = study.r_max_fit;
    os << "r_max fit (N > 5): a=" << format_double(f.a) << " b=" << format_double(f.b) << " c=" << format_double(f.c)
       << " R2=" << format_double(f.r_squared) << "\n";
    os << "log-log slope: " << format_double(lr.slope) << "  shifted: " << format_double(lr.shifted_slope)
       << "\nv_LR: " << format_double(lr.v_lr) << "\ngamma_opt plateau: " << format_double(lr.gamma_opt_plateau) << "\n";
    fit["curves"] = curves;
    return fit;
}

inline json run_twoqubit(const RunConfig& cfg, OutputSet& out, std::ostream& os) {
    const auto grid = cfg.time_grid();
    const auto s = two_qubit_analytic(cfg.tq_coupling, cfg.tq_gamma, cfg.tq_p1, cfg.tq_p2, grid);
    CsvTable csv({"t", "sz_1", "sz_2"});
    for (std::size_t i = 0; i < grid.size(); ++i) csv.add_row({s.time[i], s.sz1[i], s.sz2[i]});
    out.write("twoqubit.csv", csv.str());
    os << "regime: " << to_string(s.regime) << "\n";
    return {{"regime", to_string(s.regime)}, {"points", grid.size()}};
}

struct Overrides {
    std::vector<std::pair<std::string, std::string>> items;
};

// Every named flag maps to one config key; values go through the same parser as files.
inline void add_config_options(CLI::App* sub, Overrides& ov, std::string& config_path, bool twoqubit) {
    sub->add_option("--config", config_path, "Configuration file (key = value lines)");
    sub->add_option_function<std::vector<std::string>>(
        "--set",
        [&ov](const std::vector<std::string>& kv) {
            for (const auto& s : kv) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw ConfigError("--set: expected key=value, got '" + s + "'");
                ov.items.push_back({detail::trim(s.substr(0, eq)), s.substr(eq + 1)});
            }
        },
        "Override any config key, e.g. --set noise.gamma=0.3");
    auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(
            name, [&ov, key](const std::string& v) { ov.items.push_back({key, v}); }, help + " [" + key + "]");
    };
    flag("--N", "chain.n_sites", "Number of sites");
    flag("--field", "chain.field", "Transverse field h");
    if (twoqubit) {
        flag("--J", "twoqubit.coupling", "Coupling J");
        flag("--Gamma", "twoqubit.gamma", "Dephasing rate on qubit 1");
        flag("--p1", "twoqubit.p1", "Initial excitation probability of qubit 1");
        flag("--p2", "twoqubit.p2", "Initial excitation probability of qubit 2");
    } else {
        flag("--J", "chain.coupling", "Coupling J");
    }
    flag("--sites", "noise.sites", "Noisy sites, comma separated");
    flag("--gamma", "noise.gamma", "Noise strength gamma = Gamma/J");
    flag("--noise-coupling", "noise.coupling", "shared | independent");
    flag("--populations", "initial.populations", "Initial site populations");
    flag("--t-max", "time.t_max", "Final time");
    flag("--dt", "time.dt", "Output spacing");
    flag("--n-points", "time.n_points", "Number of output points (overrides --dt)");
    flag("--engine", "engine", "jw | reference | trajectories");
    flag("--diagnostics", "diagnostics", "e.g. pearson:1-4,2-3;concurrence:1-5");
    flag("--window", "diagnostics.window", "Trailing Pearson window");
    flag("--n-traj", "traj.n_traj", "Number of trajectories");
    flag("--traj-dt", "traj.dt", "Trajectory step");
    flag("--traj-t-max", "traj.t_max", "Trajectory final time");
    flag("--scheme", "traj.scheme", "exponential-midpoint | stratonovich-heun | euler-maruyama");
    flag("--sample-every", "traj.sample_every", "Record every k-th trajectory step");
    flag("--n-values", "sweep.n_values", "Chain lengths for the scaling study");
    flag("--gamma-min", "sweep.gamma_min", "Smallest gamma of the sweep grid");
    flag("--gamma-max", "sweep.gamma_max", "Largest gamma of the sweep grid");
    flag("--gamma-points", "sweep.gamma_points", "Number of log-spaced sweep points");
    flag("--out", "output.dir", "Output directory");
    flag("--seed", "seed", "Random seed");
    flag("--workers", "workers", "Worker threads (0: all cores)");
}

// Defaults, then the environment's output directory, then the config file, then flags.
inline RunConfig resolve_config(const std::string& config_path, const Overrides& ov) {
    RunConfig cfg;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output_dir = env;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw ConfigError("config: cannot read '" + config_path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        apply_config_text(cfg, ss.str());
    }
    for (const auto& [k, v] : ov.items) set_key(cfg, k, v);
    validate_config(cfg);
    return cfg;
}

inline int run(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
    CLI::App app{"noisesync: noise-induced synchronization in the XY spin chain"};
    app.require_subcommand(1);
    app.footer("Configuration keys and defaults:\n" + emit_config(RunConfig{}) + "\nEnvironment: " + kOutputDirEnv +
               " sets the default output directory.\nExit codes: 0 ok, 1 I/O failure, 2 config error, "
               "3 precondition error, 4 numerical failure.");

    using Handler = json (*)(const RunConfig&, OutputSet&, std::ostream&);
    struct Command {
        const char* name;
        const char* help;
        Handler handler;
    };
    static const Command commands[] = {
        {"modes", "First-order mode table (modes.csv)", run_modes},
        {"sync-check", "Synchronization condition and stable mode (sync.json)", run_sync_check},
        {"evolve", "Magnetizations and diagnostics over time", run_evolve},
        {"spectrum", "Liouvillian spectrum of the averaged dynamics (spectrum.csv)", run_spectrum},
        {"traj", "Stochastic trajectory ensemble", [](const RunConfig& c, OutputSet& o, std::ostream& s) { return run_traj(c, o, s); }},
        {"sweep", "Rate r(gamma) for one chain (sweep.csv)", run_sweep},
        {"fit", "Scaling study over N and inverse-square fit (fit.json)", run_fit},
        {"twoqubit", "Exact two-qubit solution (twoqubit.csv)", run_twoqubit},
    };
    Overrides ov;
    std::string config_path;
    for (const auto& c : commands) add_config_options(app.add_subcommand(c.name, c.help), ov, config_path,
                                                      std::string(c.name) == "twoqubit");

    auto report = [&](const char* kind, const std::exception& e, int code) {
        es << "noisesync: " << kind << " error: " << e.what() << "\n";
        return code;
    };
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, os, es);
    } catch (const CLI::ParseError& e) {
        app.exit(e, os, es);
        return config_error;
    } catch (const ConfigError& e) {
        return report("config", e, config_error);
    }

    try {
        const RunConfig cfg = resolve_config(config_path, ov);
        for (const auto& c : commands) {
            if (!app.got_subcommand(c.name)) continue;
            OutputSet out(cfg.output_dir);
            const json summary = c.handler(cfg, out, os);
            out.write_manifest(cfg, c.name, summary);
            os << "outputs: " << out.dir().string() << "\n";
        }
        return ok;
    } catch (const ConfigError& e) {
        return report("config", e, config_error);
    } catch (const PreconditionError& e) {
        return report("precondition", e, precondition_error);
    } catch (const NumericalError& e) {
        return report("numerical", e, numerical_error);
    } catch (const std::exception& e) {
        return report("I/O", e, io_failure);
    }
}

}  // namespace noisesync::cli
