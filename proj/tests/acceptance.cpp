// Acceptance run: one PASS/FAIL line per criterion.
//
// Some criteria are known not to hold as stated; their outcome is recorded
// below. The exit status is nonzero only when an outcome differs from the
// record, so an unexpected pass is reported as loudly as a regression.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <noisesync/diagnostics.hpp>
#include <noisesync/evolve.hpp>
#include <noisesync/perturbation.hpp>
#include <noisesync/reference.hpp>
#include <noisesync/sweep.hpp>
#include <noisesync/trajectories.hpp>

using namespace noisesync;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

std::vector<double> shifted_grid(double start, double length, double dt) {
    std::vector<double> g{0.0};
    for (long k = 1; start + k * dt <= start + length + 1e-9; ++k) g.push_back(start + k * dt);
    return g;
}

Outcome check_decay_table() {
    const auto table = mode_table({5, 1, 1}, {{3}, 0.2}, InitialState::excitation_on(1, 5));
    const std::map<std::pair<int, int>, double> expected{{{1, 2}, 2.0 / 3}, {{1, 4}, 2.0 / 3}, {{2, 3}, 2.0 / 3},
                                                         {{1, 3}, 4.0 / 9}, {{1, 5}, 8.0 / 9}, {{2, 4}, 0.0}};
    double worst = 0;
    for (const auto& [kl, m] : expected) worst = std::max(worst, std::abs(table.at(kl.first, kl.second).decay - m));
    return {worst < 1e-12, "N=5 u=3 m12 m14 m23 m13 m15 m24 max error " + fmt(worst, 2)};
}

Outcome check_sync_condition_check() {
    const std::vector<std::pair<int, int>> yes{{5, 3}, {8, 3}, {8, 6}, {11, 3}}, no{{4, 2}, {5, 2}, {6, 3}, {7, 3}};
    bool ok = true;
    std::string detail;
    auto check = [&](std::pair<int, int> nu, bool expect) {
        const ChainSpec c{nu.first, 1, 1};
        const NoiseSpec n{{nu.second}, 0.1};
        const bool sat = sync_condition(c, n).satisfied;
        // zero scan: every (k,l) whose first-order rate vanishes
        int zeros = 0;
        for (const auto& e : mode_table(c, n, InitialState::excitation_on(1, nu.first)).entries)
            if (e.decay <= 1e-12) ++zeros;
        const bool scan = zeros == 1;
        ok = ok && sat == expect && scan == expect;
        detail += " (" + std::to_string(nu.first) + "," + std::to_string(nu.second) + ")" + (sat ? "+" : "-") +
                  std::to_string(zeros);
    };
    for (auto p : yes) check(p, true);
    for (auto p : no) check(p, false);
    return {ok, "satisfied(+)/not(-) with zero-rate count:" + detail};
}

// Best single frequency for a + b cos(w t) + c sin(w t) by least squares.
double dominant_frequency(const std::vector<double>& t, const std::vector<double>& y, double lo, double hi) {
    auto residual = [&](double w) {
        Eigen::MatrixXd a(t.size(), 3);
        Eigen::VectorXd b(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            a(i, 0) = 1;
            a(i, 1) = std::cos(w * t[i]);
            a(i, 2) = std::sin(w * t[i]);
            b(i) = y[i];
        }
        const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
        return (a * x - b).squaredNorm();
    };
    double best = lo, best_r = residual(lo);
    const double step = 1e-3;
    for (double w = lo; w <= hi; w += step)
        if (const double r = residual(w); r < best_r) best = w, best_r = r;
    return golden_section_maximize([&](double w) { return -residual(w); }, best - step, best + step, 1e-9).x;
}

Outcome check_stable_mode() {
    const ChainSpec c{5, 1, 1};
    const NoiseSpec n{{3}, 0.2};
    const JwGenerator gen(c, n);
    const double tau_s = sync_timing(c, n).tau_s;
    const auto grid = shifted_grid(tau_s, 300.0, 0.01);
    const auto p = propagate(gen, InitialState::excitation_on(1, 5), grid);
    double d15 = 0, d24 = 0, slope3 = 0;
    std::vector<double> tw, s1;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const auto m = magnetizations(p.states[i].z);
        d15 = std::max(d15, std::abs(m(0) - m(4)));
        d24 = std::max(d24, std::abs(m(1) - m(3)));
        slope3 = std::max(slope3, std::abs(2.0 * gen.apply(p.states[i].z)(2, 2).real()));
        if (grid[i] <= tau_s + 10 * std::numbers::pi + 1e-9) {
            tw.push_back(grid[i]);
            s1.push_back(m(0));
        }
    }
    const double w = dominant_frequency(tw, s1, 0.2, 5.0);
    const bool ok = d15 < 1e-3 && d24 < 1e-3 && slope3 < 1e-3 && std::abs(w - 2.0) <= 0.02;
    return {ok, "tau_s=" + fmt(tau_s) + " max|sz1-sz5|=" + fmt(d15, 2) + " max|sz2-sz4|=" + fmt(d24, 2) +
                    " max|dsz3/dtau|=" + fmt(slope3, 2) + " frequency=" + fmt(w, 6)};
}

Outcome check_oracle_equivalence() {
    double worst = 0;
    std::string where;
    const auto grid = uniform_grid(200.0, 0.1);
    for (int nsites = 2; nsites <= 6; ++nsites)
        for (double gamma : {0.0, 0.05, 0.2, 1.0}) {
            const ChainSpec c{nsites, 1, 1};
            const NoiseSpec n{{std::min(3, nsites)}, gamma};
            const auto jw = propagate(JwGenerator(c, n), InitialState::excitation_on(1, nsites), grid);
            std::vector<double> p(nsites, 0.0);
            p[0] = 1;
            std::size_t t = 0;
            lindblad_evolve(c, n, product_state(p), grid, [&](const DensityMatrix& d) {
                const double e =
                    (spin_magnetizations(d.rho, nsites) - magnetizations(jw.states[t].z)).cwiseAbs().maxCoeff();
                if (e > worst) worst = e, where = "N=" + std::to_string(nsites) + " gamma=" + fmt(gamma);
                ++t;
            });
        }
    return {worst < 1e-6, "N=2..6 x gamma {0,0.05,0.2,1} over tau in [0,200]: sup error " + fmt(worst, 2) + " at " + where};
}

Outcome check_perturbation_consistency() {
    const double gamma = 0.01;
    double worst = 0;
    bool counts_ok = true;
    std::string detail;
    for (int nsites : {5, 8, 11}) {
        const ChainSpec c{nsites, 1, 1};
        const NoiseSpec n{{3}, gamma};
        const auto clusters = perturbation_clusters(c, n);
        const auto spec = liouville_spectrum(JwGenerator(c, n), {false, true});
        std::vector<std::vector<double>> mus(clusters.size());
        for (const auto& m : spec.modes) {
            if (m.lambda <= 1e-6) continue;
            std::size_t best = 0;
            for (std::size_t q = 1; q < clusters.size(); ++q)
                if (std::abs(clusters[q].frequency - m.lambda) < std::abs(clusters[best].frequency - m.lambda)) best = q;
            mus[best].push_back(m.mu);
        }
        double local = 0;
        for (std::size_t q = 0; q < clusters.size(); ++q) {
            auto& mu = mus[q];
            std::sort(mu.begin(), mu.end());
            if (mu.size() != clusters[q].rates.size()) {
                counts_ok = false;
                continue;
            }
            for (std::size_t i = 0; i < mu.size(); ++i) {
                const double first = gamma * clusters[q].rates[i];
                const double err = std::abs(mu[i] - first) / std::max(first, 1e-10 / 0.05);
                local = std::max(local, err);
            }
        }
        worst = std::max(worst, local);
        detail += " N=" + std::to_string(nsites) + ":" + fmt(local, 2);
    }
    return {counts_ok && worst <= 0.05,
            "gamma=0.01 u=3, max relative error per N:" + detail + (counts_ok ? "" : " (mode count mismatch)")};
}

// Half range of y over the trailing window ending at index i.
double trailing_amplitude(const std::vector<double>& t, const std::vector<double>& y, std::size_t i, double window) {
    double lo = y[i], hi = y[i];
    for (std::size_t s = i; s-- > 0 && t[s] >= t[i] - window;) lo = std::min(lo, y[s]), hi = std::max(hi, y[s]);
    return 0.5 * (hi - lo);
}

Outcome check_pearson_convergence() {
    const ChainSpec c{4, 1, 1};
    const NoiseSpec n{{2, 3}, 0.2};
    const double tau_s = sync_timing(c, n).tau_s;
    const auto grid = uniform_grid(400.0, 0.05);
    const auto p = propagate(JwGenerator(c, n), InitialState::excitation_on(1, 4), grid);
    std::vector<std::vector<double>> sz(4);
    for (const auto& st : p.states) {
        const auto m = magnetizations(st.z);
        for (int j = 0; j < 4; ++j) sz[j].push_back(m(j));
    }
    const double window = 4 * std::numbers::pi;
    bool ok = true;
    std::string detail = "N=4 sites {2,3} gamma=0.2 tau_s=" + fmt(tau_s);
    for (auto [i, j] : {std::pair{1, 4}, std::pair{2, 3}}) {
        const auto cs = pearson({grid, sz[i - 1]}, {grid, sz[j - 1]}, window, {i, j});
        double lowest = 1, highest = -1, end = grid.back();
        for (std::size_t t = 0; t < grid.size(); ++t) {
            if (grid[t] <= tau_s) continue;
            if (trailing_amplitude(grid, sz[i - 1], t, window) < 1e-6 &&
                trailing_amplitude(grid, sz[j - 1], t, window) < 1e-6) {
                end = grid[t];
                break;
            }
            if (!cs.values[t]) {
                ok = false;
                continue;
            }
            lowest = std::min(lowest, *cs.values[t]);
            highest = std::max(highest, *cs.values[t]);
        }
        ok = ok && lowest > 0.99;
        detail += " C" + std::to_string(i) + std::to_string(j) + " in [" + fmt(lowest, 6) + "," + fmt(highest, 6) +
                  "] up to tau=" + fmt(end);
    }
    return {ok, detail};
}

Outcome check_concurrence_behavior() {
    std::string detail;
    // synchronized run
    const ChainSpec c5{5, 1, 1};
    const NoiseSpec n5{{3}, 0.2};
    const double tau_s = sync_timing(c5, n5).tau_s;
    const double period = std::numbers::pi;  // stable frequency 2
    const auto grid = shifted_grid(tau_s, 10 * period, 0.005);
    const auto p = propagate(JwGenerator(c5, n5), InitialState::excitation_on(1, 5), grid);
    std::vector<double> conc(grid.size());
    double path_gap = 0;
    for (std::size_t t = 0; t < grid.size(); ++t) {
        conc[t] = concurrence_from_z(p.states[t].z, 1, 5);
        path_gap = std::max(path_gap, std::abs(conc[t] - concurrence_wootters(pair_state_from_z(p.states[t].z, 1, 5))));
    }
    double peak_first = 0, peak_last = 0;
    for (std::size_t t = 1; t < grid.size(); ++t) {
        if (grid[t] <= tau_s + period) peak_first = std::max(peak_first, conc[t]);
        if (grid[t] > tau_s + 9 * period) peak_last = std::max(peak_last, conc[t]);
    }
    // Sampling misses isolated zeros, so each period's minimum is refined on the
    // continuous solution. Values at round-off level count as zero.
    const JwGenerator gen5(c5, n5);
    auto c15 = [&](double tau) {
        const std::vector<double> g{0.0, tau};
        return concurrence_from_z(propagate(gen5, InitialState::excitation_on(1, 5), g).states[1].z, 1, 5);
    };
    const double roundoff = 1e-12;
    double lowest = 1;
    int zero_periods = 0;
    for (int k = 0; k < 10; ++k) {
        std::size_t at = 0;
        for (std::size_t t = 1; t < grid.size(); ++t)
            if (grid[t] > tau_s + k * period && grid[t] <= tau_s + (k + 1) * period && (at == 0 || conc[t] < conc[at]))
                at = t;
        const double h = grid[2] - grid[1];
        const double m = -golden_section_maximize([&](double tau) { return -c15(tau); }, grid[at] - h, grid[at] + h, 1e-13).fx;
        lowest = std::min(lowest, m);
        if (m <= roundoff) ++zero_periods;
    }
    const double drift = std::abs(peak_last - peak_first) / peak_first;
    const bool steady = zero_periods == 0 && drift < 0.01;
    detail += "N=5: refined min C15 after tau_s " + fmt(lowest, 3) + " (" + std::to_string(zero_periods) +
              "/10 periods reach zero), peak drift over 10 periods " + fmt(drift, 3);

    // the same run in the full Hilbert space
    const auto coarse = uniform_grid(tau_s + 10 * period, 0.25);
    const auto pc = propagate(JwGenerator(c5, n5), InitialState::excitation_on(1, 5), coarse);
    double ref_gap = 0;
    std::size_t t = 0;
    lindblad_evolve(c5, n5, product_state({1, 0, 0, 0, 0}), coarse, [&](const DensityMatrix& d) {
        const double r = concurrence_wootters(reduced_two_qubit(d.rho, 5, 1, 5));
        ref_gap = std::max(ref_gap, std::abs(r - concurrence_from_z(pc.states[t].z, 1, 5)));
        ++t;
    });
    detail += "; fast vs Wootters " + fmt(path_gap, 2) + "; vs reference " + fmt(ref_gap, 2);

    // transient run
    const ChainSpec c4{4, 1, 1};
    const NoiseSpec n4{{2, 3}, 0.2};
    const double tau_s4 = sync_timing(c4, n4).tau_s;
    const auto g4 = shifted_grid(3 * tau_s4, 200.0, 0.05);
    const auto p4 = propagate(JwGenerator(c4, n4), InitialState::excitation_on(1, 4), g4);
    double c14 = 0;
    for (std::size_t i = 1; i < g4.size(); ++i) c14 = std::max(c14, concurrence_from_z(p4.states[i].z, 1, 4));
    detail += "; N=4: max C14 after 3 tau_s " + fmt(c14, 3);
    return {steady && path_gap <= 1e-10 && ref_gap <= 1e-6 && c14 < 1e-3, detail};
}

Outcome check_trajectory_consistency() {
    const ChainSpec c{5, 1, 1};
    const NoiseSpec n{{3}, 0.2};
    const auto init = InitialState::excitation_on(1, 5);
    TrajectoryConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 10;
    cfg.n_traj = 10000;
    cfg.seed = 2024;
    cfg.sample_every = 100;
    const auto small = ensemble_average(c, n, init, cfg);
    cfg.n_traj = 40000;
    const auto large = ensemble_average(c, n, init, cfg);
    const auto exact = propagate(JwGenerator(c, n), init, small.grid);
    long inside = 0, total = 0;
    double se_small = 0, se_large = 0;
    for (std::size_t g = 0; g < small.grid.size(); ++g) {
        const auto m = magnetizations(exact.states[g].z);
        for (int j = 0; j < 5; ++j) {
            ++total;
            if (std::abs(small.mean(g, j) - m(j)) <= 3 * small.std_error(g, j)) ++inside;
            se_small += small.std_error(g, j);
            se_large += large.std_error(g, j);
        }
    }
    const double frac = double(inside) / double(total);
    const double ratio = se_large / se_small;
    return {frac >= 0.99 && ratio >= 0.45 && ratio <= 0.55,
            "M=1e4: " + fmt(100 * frac, 4) + "% of (tau, site) within 3 stderr; stderr ratio M=4e4/1e4 " + fmt(ratio, 4)};
}

// The closed form exactly as printed for p1, p2 and the three regimes.
double printed_difference(double J, double G, double p1, double p2, double t) {
    const double d = p1 - p2;
    if (2 * J > G) {
        const double w = std::sqrt(4 * J * J - G * G);
        return std::exp(-G * t) * ((-4 * J + G * d) / w * std::sin(w * t) + d * std::cos(w * t));
    }
    if (2 * J == G) return std::exp(-G * t) * (2 * J * t * (d - 2) + d);
    const double w = std::sqrt(G * G - 4 * J * J);
    return std::exp(-G * t) * ((-4 * J + G * d) / w * std::sinh(w * t) + d * std::cosh(w * t));
}

Outcome check_two_qubit() {
    const double J = 1;
    const auto grid = uniform_grid(10.0, 0.05);
    std::string detail;
    bool ok = true;
    for (double ratio : {0.5, 1.0, 2.0}) {
        const double G = 2 * J * ratio;
        const auto fixed = two_qubit_analytic(J, G, 1, 0, grid);
        double printed_err = 0, fixed_err = 0;
        std::size_t t = 0;
        lindblad_evolve({2, J, 1}, {{1}, G / J}, product_state({1, 0}), grid, [&](const DensityMatrix& d) {
            const auto m = spin_magnetizations(d.rho, 2);
            const double printed = printed_difference(J, G, 1, 0, grid[t]);
            printed_err = std::max({printed_err, std::abs(m(0) - printed), std::abs(m(1) + printed)});
            fixed_err = std::max({fixed_err, std::abs(m(0) - fixed.sz1[t]), std::abs(m(1) - fixed.sz2[t])});
            ++t;
        });
        ok = ok && printed_err < 1e-8;
        detail += " Gamma/2J=" + fmt(ratio) + ": printed form error " + fmt(printed_err, 3) + " (oscillator form " +
                  fmt(fixed_err, 2) + ")";
    }
    return {ok, "p1=1 p2=0;" + detail};
}

Outcome check_scaling() {
    const std::vector<int> ns{5, 8, 11, 14, 17, 20};
    const auto s = scaling_study(ns, 3, default_gamma_grid());
    const auto lr = lieb_robinson_report(s, {20, 1, 1});
    bool single = true;
    for (const auto& c : s.curves) single = single && c.single_optimum() && c.continuity_flags.empty();
    const double g_last = s.gamma_opt.back(), g_prev = s.gamma_opt[s.gamma_opt.size() - 2];
    const bool plateau = g_last > 0.05 && std::abs(g_last - g_prev) / g_last < 0.10;
    const bool slope_ok = lr.slope >= -2.3 && lr.slope <= -1.7;
    const auto& f = s.r_max_fit;
    const auto& fg = s.gamma_opt_fit;
    std::string detail = "single optimum each N: " + std::string(single ? "yes" : "no") + "; log-log slope " +
                         fmt(lr.slope) + " (shifted by fitted c: " + fmt(lr.shifted_slope) + "); gamma_opt " +
                         (lr.gamma_opt_decreasing ? "decreasing" : "not decreasing") + ", last step " +
                         fmt(100 * std::abs(g_last - g_prev) / g_last, 3) + "%; r_max fit a=" + fmt(f.a) + " b=" +
                         fmt(f.b) + " c=" + fmt(f.c) + " R2=" + fmt(f.r_squared, 6) +
                         " [reference a=-0.008 b=1.357 c=-4.289]; gamma_opt fit a=" + fmt(fg.a) + " b=" + fmt(fg.b) +
                         " c=" + fmt(fg.c) + " [reference a=0.182 b=12.289 c=-0.660]; v_LR=" + fmt(lr.v_lr);
    return {single && slope_ok && lr.gamma_opt_decreasing && plateau && f.r_squared >= 0.99, detail};
}

struct Criterion {
    int id;
    const char* name;
    bool expected_pass;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "decay-constant table", true, check_decay_table},
        {2, "synchronization condition", true, check_sync_condition_check},
        {3, "stable-mode reproduction", false, check_stable_mode},
        {4, "oracle equivalence", true, check_oracle_equivalence},
        {5, "perturbation-spectrum consistency", true, check_perturbation_consistency},
        {6, "Pearson convergence", false, check_pearson_convergence},
        {7, "concurrence behavior", false, check_concurrence_behavior},
        {8, "trajectory consistency", true, check_trajectory_consistency},
        {9, "two-qubit exact solution", false, check_two_qubit},
        {10, "scaling study", false, check_scaling},
    };
    std::string report_path;
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--report") == 0 && i + 1 < argc) report_path = argv[++i];
        else only.push_back(std::atoi(argv[i]));
    }

    std::ostringstream log;
    int passed = 0, failed = 0, surprises = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        (o.pass ? passed : failed)++;
        std::string tag;
        if (o.pass != c.expected_pass) {
            ++surprises;
            tag = o.pass ? " [UNEXPECTED PASS]" : " [UNEXPECTED FAIL]";
        } else if (!o.pass) {
            tag = " [known]";
        }
        std::ostringstream line;
        line << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << tag << "  " << c.name << ": " << o.detail
             << "  (" << fmt(secs, 3) << " s)\n";
        std::cout << line.str() << std::flush;
        log << line.str();
    }
    std::ostringstream summary;
    summary << "summary: " << passed << " pass, " << failed << " fail, " << surprises << " differ from the recorded outcome\n";
    std::cout << summary.str();
    log << summary.str();
    if (!report_path.empty()) std::ofstream(report_path) << log.str();
    return surprises == 0 ? 0 : 1;
}
