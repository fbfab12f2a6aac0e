// sweep.hpp - r(gamma) curves, optimum location, scaling with N, inverse-square fit
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "evolve.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace noisesync {

inline std::vector<double> log_grid(double lo, double hi, int points) {
    if (!(lo > 0) || !(hi > lo) || points < 2) throw PreconditionError("grid: need 0 < lo < hi and at least 2 points");
    std::vector<double> g(points);
    const double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < points; ++i) g[i] = std::exp(a + (b - a) * i / (points - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

inline std::vector<double> default_gamma_grid() { return log_grid(1e-3, 10.0, 60); }

struct GoldenResult {
    double x = 0.0, fx = 0.0;
    int evaluations = 0;
};

// Maximizes a unimodal f on [lo, hi] until the bracket is narrower than tol.
inline GoldenResult golden_section_maximize(const std::function<double(double)>& f, double lo, double hi, double tol) {
    if (!(hi > lo) || !(tol > 0)) throw PreconditionError("golden: need lo < hi and tol > 0");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    int evals = 2;
    while (hi - lo > tol) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
        ++evals;
    }
    return f1 >= f2 ? GoldenResult{x1, f1, evals} : GoldenResult{x2, f2, evals};
}

struct SweepOptions {
    RateOptions rate{};
    double refine_tol = 1e-4;  // relative, on gamma
    bool check_continuity = true;
    double continuity_jump = 0.2;
    int workers = 0;
};

struct ContinuityFlag {
    double gamma_lo = 0.0, gamma_hi = 0.0, r_lo = 0.0, r_mid = 0.0, r_hi = 0.0;
};

struct SweepResult {
    int n_sites = 0;
    std::vector<int> sites;
    std::vector<double> gamma, r, r_unfiltered;
    double gamma_opt = 0.0, r_max = 0.0;
    std::size_t grid_argmax = 0;
    bool unimodal = true;
    bool interior_optimum = true;
    bool refined = false;
    int refine_evaluations = 0;
    std::vector<ContinuityFlag> continuity_flags;

    bool single_optimum() const { return unimodal && interior_optimum; }
};

inline SyncTiming rate_at(const ChainSpec& chain, const std::vector<int>& sites, double gamma, const RateOptions& opt) {
    if (gamma == 0.0) return SyncTiming{0.0, 0.0, std::numeric_limits<double>::infinity(), 0.0, 0.0,
                                        std::numeric_limits<double>::infinity(), opt.filter};
    return sync_timing(chain, NoiseSpec{sites, gamma}, opt);
}

// True when r rises to its maximum and falls afterwards, ties allowed.
inline bool is_unimodal(const std::vector<double>& r, std::size_t peak) {
    const double slack = 1e-14 * r[peak];
    for (std::size_t i = 1; i <= peak; ++i)
        if (r[i] < r[i - 1] - slack) return false;
    for (std::size_t i = peak + 1; i < r.size(); ++i)
        if (r[i] > r[i - 1] + slack) return false;
    return true;
}

// mid[i] is r at the geometric midpoint of gamma[i], gamma[i+1] (NaN: skipped).
// A smooth curve sits near the log-log interpolation of its neighbours there.
inline std::vector<ContinuityFlag> find_discontinuities(const std::vector<double>& gamma, const std::vector<double>& r,
                                                        const std::vector<double>& mid, double jump) {
    std::vector<ContinuityFlag> flags;
    for (std::size_t i = 0; i + 1 < r.size() && i < mid.size(); ++i) {
        if (std::isnan(mid[i])) continue;
        const double expect = std::sqrt(r[i] * r[i + 1]);
        if (std::abs(mid[i] - expect) > jump * std::max(mid[i], expect))
            flags.push_back({gamma[i], gamma[i + 1], r[i], mid[i], r[i + 1]});
    }
    return flags;
}

// r is recomputed independently at every gamma; the optimum is refined by a
// golden-section search in log(gamma) inside the bracketing grid interval.
inline SweepResult rate_curve(const ChainSpec& chain, const std::vector<int>& sites, std::vector<double> gamma_grid,
                              const SweepOptions& opt = {}) {
    chain.validate();
    NoiseSpec{sites, 0.0}.validate(chain);
    if (gamma_grid.size() < 3) throw PreconditionError("sweep: gamma grid needs at least 3 points");
    for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
        if (!(gamma_grid[i] >= 0)) throw PreconditionError("sweep: gamma values must be >= 0");
        if (i > 0 && !(gamma_grid[i] > gamma_grid[i - 1]))
            throw PreconditionError("sweep: gamma grid must be strictly increasing");
    }

    SweepResult res;
    res.n_sites = chain.n_sites;
    res.sites = sites;
    res.gamma = std::move(gamma_grid);
    const long m = long(res.gamma.size());
    res.r.assign(m, 0.0);
    res.r_unfiltered.assign(m, 0.0);
    parallel_for(m, opt.workers, [&](long i) {
        const auto t = rate_at(chain, sites, res.gamma[i], opt.rate);
        res.r[i] = t.r;
        res.r_unfiltered[i] = t.r_unfiltered;
    });

    res.grid_argmax = std::size_t(std::max_element(res.r.begin(), res.r.end()) - res.r.begin());
    res.gamma_opt = res.gamma[res.grid_argmax];
    res.r_max = res.r[res.grid_argmax];
    res.unimodal = is_unimodal(res.r, res.grid_argmax);
    res.interior_optimum = res.grid_argmax > 0 && res.grid_argmax + 1 < res.r.size();

    if (opt.check_continuity) {
        std::vector<double> mid(m - 1, std::numeric_limits<double>::quiet_NaN());
        parallel_for(m - 1, opt.workers, [&](long i) {
            if (res.gamma[i] > 0) mid[i] = rate_at(chain, sites, std::sqrt(res.gamma[i] * res.gamma[i + 1]), opt.rate).r;
        });
        res.continuity_flags = find_discontinuities(res.gamma, res.r, mid, opt.continuity_jump);
    }

    if (res.single_optimum()) {
        const double lo = res.gamma[res.grid_argmax - 1], hi = res.gamma[res.grid_argmax + 1];
        auto r_of = [&](double g) { return rate_at(chain, sites, g, opt.rate).r; };
        GoldenResult g;
        if (lo > 0) {
            g = golden_section_maximize([&](double x) { return r_of(std::exp(x)); }, std::log(lo), std::log(hi),
                                        opt.refine_tol);
            g.x = std::exp(g.x);
        } else {
            g = golden_section_maximize(r_of, lo, hi, opt.refine_tol * hi);
        }
        res.refine_evaluations = g.evaluations;
        if (g.fx >= res.r_max) {
            res.gamma_opt = g.x;
            res.r_max = g.fx;
        }
        res.refined = true;
    }
    return res;
}

// f(N) = a + b / (N + c)^2
struct FitResult {
    double a = 0.0, b = 0.0, c = 0.0;
    double residual_norm = 0.0;
    double r_squared = 0.0;
    double gradient_norm = 0.0;
    int restarts = 0;
    int n_points = 0;

    double operator()(double n) const { return a + b / ((n + c) * (n + c)); }
};

namespace detail {

struct InverseSquareFunctor {
    const std::vector<double>& x;
    const std::vector<double>& y;

    int inputs() const { return 3; }
    int values() const { return int(x.size()); }

    double min_shift(const Eigen::VectorXd& p) const { return *std::min_element(x.begin(), x.end()) + p(2); }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        // outside the domain N + c > 0 the residual is made huge so the step is refused
        if (min_shift(p) <= 0) {
            f.setConstant(1e150);
            return 0;
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = x[i] + p(2);
            f(i) = p(0) + p(1) / (s * s) - y[i];
        }
        return 0;
    }
    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = x[i] + p(2);
            j(i, 0) = 1.0;
            j(i, 1) = 1.0 / (s * s);
            j(i, 2) = -2.0 * p(1) / (s * s * s);
        }
        return 0;
    }
};

}  // namespace detail

// Damped Gauss-Newton (MINPACK lmder) from a = 0, c = 0 and b taken from the
// two largest-x points; singular Jacobians or stalled runs restart from a
// perturbed guess, at most 5 times.
inline FitResult fit_inverse_square(const std::vector<double>& x, const std::vector<double>& y,
                                    std::optional<Eigen::Vector3d> guess = std::nullopt) {
    if (x.size() != y.size()) throw PreconditionError("fit: x and y differ in length");
    if (x.size() < 3) throw PreconditionError("fit: need at least 3 points for 3 parameters");
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto p, auto q) { return x[p] > x[q]; });
    Eigen::Vector3d start;
    if (guess) {
        start = *guess;
    } else {
        const double b0 = 0.5 * (y[order[0]] * x[order[0]] * x[order[0]] + y[order[1]] * x[order[1]] * x[order[1]]);
        start << 0.0, b0, 0.0;
    }

    detail::InverseSquareFunctor fn{x, y};
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    const double x_min = *std::min_element(x.begin(), x.end());
    Eigen::Vector3d p0 = start;
    for (int attempt = 0; attempt <= 5; ++attempt) {
        if (attempt > 0) {
            p0 = start;
            p0(0) += 0.1 * jitter(rng) * std::abs(y[order[0]]);
            p0(1) *= 1.0 + jitter(rng);
            p0(2) = std::max(p0(2) + 2.0 * jitter(rng), -0.5 * x_min);
        }
        if (fn.min_shift(p0) <= 0) continue;
        Eigen::VectorXd p = p0;
        Eigen::LevenbergMarquardt<detail::InverseSquareFunctor> lm(fn);
        lm.parameters.xtol = 1e-10;
        lm.parameters.ftol = 0.0;
        lm.parameters.gtol = 0.0;
        lm.parameters.maxfev = 4000;
        const auto status = lm.minimize(p);
        using S = Eigen::LevenbergMarquardtSpace::Status;
        if (status == S::ImproperInputParameters || status == S::TooManyFunctionEvaluation || status == S::UserAsked)
            continue;
        if (!p.allFinite() || fn.min_shift(p) <= 0) continue;
        Eigen::MatrixXd jac(x.size(), 3);
        Eigen::VectorXd res(x.size());
        fn.df(p, jac);
        fn(p, res);
        if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(jac).rank() < 3) continue;

        FitResult out;
        out.a = p(0);
        out.b = p(1);
        out.c = p(2);
        out.residual_norm = res.norm();
        out.gradient_norm = (jac.transpose() * res).norm();
        double mean = 0;
        for (double v : y) mean += v;
        mean /= double(y.size());
        double ss_tot = 0;
        for (double v : y) ss_tot += (v - mean) * (v - mean);
        out.r_squared = ss_tot > 0 ? 1.0 - res.squaredNorm() / ss_tot : 1.0;
        out.restarts = attempt;
        out.n_points = int(x.size());
        return out;
    }
    throw NumericalError("fit: no converged, full-rank solution after 5 restarts");
}

// The smallest chains sit before the asymptotic regime and are left out of the fits.
inline constexpr int kFitMinSites = 5;

struct ScalingStudy {
    std::vector<SweepResult> curves;
    std::vector<int> n_values;
    std::vector<double> r_max, gamma_opt;
    FitResult r_max_fit, gamma_opt_fit;  // on N > kFitMinSites only
};

inline ScalingStudy scaling_study(const std::vector<int>& n_values, int site = 3,
                                  const std::vector<double>& gamma_grid = default_gamma_grid(),
                                  const SweepOptions& opt = {}, double coupling = 1.0, double field = 1.0) {
    if (n_values.empty()) throw PreconditionError("scaling: empty N list");
    ScalingStudy s;
    for (int n : n_values) {
        if ((n + 1) % 3 != 0)
            throw PreconditionError("scaling: N=" + std::to_string(n) + " is outside the family with (N+1)/3 integer");
        if (!s.n_values.empty() && n <= s.n_values.back())
            throw PreconditionError("scaling: N list must be strictly increasing");
        auto curve = rate_curve(ChainSpec{n, coupling, field}, {site}, gamma_grid, opt);
        s.n_values.push_back(n);
        s.r_max.push_back(curve.r_max);
        s.gamma_opt.push_back(curve.gamma_opt);
        s.curves.push_back(std::move(curve));
    }
    std::vector<double> x, yr, yg;
    for (std::size_t i = 0; i < s.n_values.size(); ++i)
        if (s.n_values[i] > kFitMinSites) {
            x.push_back(s.n_values[i]);
            yr.push_back(s.r_max[i]);
            yg.push_back(s.gamma_opt[i]);
        }
    if (x.size() < 3) throw PreconditionError("scaling: need at least 3 values of N > " + std::to_string(kFitMinSites) + " to fit");
    s.r_max_fit = fit_inverse_square(x, yr);
    s.gamma_opt_fit = fit_inverse_square(x, yg);
    return s;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw PreconditionError("slope: need at least 2 paired points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw PreconditionError("slope: log-log regression needs positive values");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

struct LiebRobinsonReport {
    double v_lr = 2.0;
    double slope = 0.0;          // d log r_max / d log N over all N
    double shifted_slope = 0.0;  // d log(r_max - a) / d log(N + c) with the fitted a, c, over the fitted N
    double gamma_opt_plateau = 0.0;
    double plateau_change = 0.0;  // |gamma_opt(N_max) - gamma_opt(N_prev)| / gamma_opt(N_max)
    bool gamma_opt_decreasing = true;
    std::vector<double> tau_s_min;   // 5 / r_max(N)
    std::vector<double> light_cone;  // N / v_lr
};

inline LiebRobinsonReport lieb_robinson_report(const ScalingStudy& s, const ChainSpec& chain) {
    LiebRobinsonReport rep;
    rep.v_lr = 2.0 * chain.coupling;
    std::vector<double> n(s.n_values.begin(), s.n_values.end());
    rep.slope = loglog_slope(n, s.r_max);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n.size(); ++i)
        if (n[i] > kFitMinSites && n[i] + s.r_max_fit.c > 0 && s.r_max[i] - s.r_max_fit.a > 0) {
            xs.push_back(n[i] + s.r_max_fit.c);
            ys.push_back(s.r_max[i] - s.r_max_fit.a);
        }
    rep.shifted_slope = xs.size() >= 2 ? loglog_slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
    const std::size_t m = s.gamma_opt.size();
    if (m >= 2) {
        rep.gamma_opt_plateau = 0.5 * (s.gamma_opt[m - 1] + s.gamma_opt[m - 2]);
        rep.plateau_change = std::abs(s.gamma_opt[m - 1] - s.gamma_opt[m - 2]) / s.gamma_opt[m - 1];
    } else {
        rep.gamma_opt_plateau = s.gamma_opt.front();
        rep.plateau_change = std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t i = 1; i < m; ++i)
        if (!(s.gamma_opt[i] < s.gamma_opt[i - 1])) rep.gamma_opt_decreasing = false;
    for (std::size_t i = 0; i < m; ++i) {
        rep.tau_s_min.push_back(5.0 / s.r_max[i]);
        rep.light_cone.push_back(n[i] / rep.v_lr);
    }
    return rep;
}

}  // namespace noisesync
