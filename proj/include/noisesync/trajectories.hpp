// trajectories.hpp - single noise realizations and ensemble averages
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "evolve.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace noisesync {

enum class Scheme { exponential_midpoint, stratonovich_heun, euler_maruyama };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::exponential_midpoint: return "exponential-midpoint";
        case Scheme::stratonovich_heun: return "stratonovich-heun";
        case Scheme::euler_maruyama: return "euler-maruyama";
    }
    return "?";
}

struct TrajectoryConfig {
    double dt = 1e-3;
    double t_max = 10.0;
    long n_traj = 10000;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::exponential_midpoint;
    int sample_every = 100;  // record every k-th step
    int workers = 0;         // 0: hardware concurrency

    void validate() const {
        if (!(dt > 0.0)) throw PreconditionError("traj: dt must be > 0");
        if (!(t_max >= dt)) throw PreconditionError("traj: t_max must be >= dt");
        if (n_traj < 1) throw PreconditionError("traj: n_traj must be >= 1");
        if (sample_every < 1) throw PreconditionError("traj: sample_every must be >= 1");
        if (workers < 0) throw PreconditionError("traj: workers must be >= 0");
    }

    long n_steps() const { return std::lround(std::floor(t_max / dt + 1e-9)); }
};

// SplitMix64 evaluated at (key, counter): stream content depends only on
// (seed, trajectory index), never on scheduling.
class CounterRng {
public:
    using result_type = std::uint64_t;
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

struct Trajectory {
    std::vector<CorrelationMatrix> states;
    std::vector<std::string> warnings;
};

struct EnsembleResult {
    std::vector<double> grid;
    Eigen::MatrixXd mean;    // rows: grid points, columns: sites
    Eigen::MatrixXd std_error;  // standard error of the mean
    TrajectoryConfig config;
    std::vector<std::string> warnings;
};

namespace detail {

// Z = sum_i p_i chi_i chi_i^dag with d chi = i (Omega dtau + 2 Y o dW) chi.
class StochasticChain {
public:
    StochasticChain(const ChainSpec& chain, const NoiseSpec& noise, const InitialState& initial)
        : n_(chain.n_sites), diag_(chain.n_sites), sites_(noise.sites), sigma_(std::sqrt(noise.gamma)),
          independent_(noise.coupling == NoiseCoupling::independent) {
        chain.validate();
        noise.validate(chain);
        initial.validate(n_);
        diag_.setConstant(2.0 * chain.field / chain.coupling);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(initial.correlation);
        for (int i = 0; i < n_; ++i) {
            const double p = es.eigenvalues()(i);
            if (p > 1e-14) {
                weights_.push_back(p);
                components_.push_back(es.eigenvectors().col(i));
            }
        }
        spectral_radius_ = diag_.cwiseAbs().maxCoeff() + 2.0;
    }

    int n() const { return n_; }
    double spectral_radius() const { return spectral_radius_; }
    int n_noises() const { return independent_ ? int(sites_.size()) : (sites_.empty() ? 0 : 1); }
    const std::vector<Eigen::VectorXcd>& components() const { return components_; }
    const std::vector<double>& weights() const { return weights_; }

    // Effective field on each site for one step: Omega dt on the tridiagonal part
    // and 2 dW on the noisy diagonal entries.
    void step_diagonal(Eigen::VectorXd& d, double dt, std::span<const double> dw) const {
        d = diag_ * dt;
        for (std::size_t s = 0; s < sites_.size(); ++s) d(sites_[s] - 1) += 2.0 * (independent_ ? dw[s] : dw[0]);
    }

    // out = A v, A tridiagonal with diagonal d and off-diagonal off.
    void apply(const Eigen::VectorXd& d, double off, const Eigen::VectorXcd& v, Eigen::VectorXcd& out) const {
        for (int j = 0; j < n_; ++j) {
            cplx acc = d(j) * v(j);
            if (j > 0) acc += off * v(j - 1);
            if (j + 1 < n_) acc += off * v(j + 1);
            out(j) = acc;
        }
    }

    // Per-realization work vectors, so one chain can serve many threads.
    struct Scratch {
        Eigen::VectorXd d;
        Eigen::VectorXcd term, tmp, f0, pred;
    };

    // chi <- exp(i A) chi by Taylor series to machine precision.
    void exponential_step(Eigen::VectorXcd& chi, double dt, std::span<const double> dw, Scratch& w) const {
        step_diagonal(w.d, dt, dw);
        w.term = chi;
        w.tmp.resize(n_);
        for (int k = 1; k <= 40; ++k) {
            apply(w.d, dt, w.term, w.tmp);
            w.term = w.tmp * cplx(0, 1.0 / k);
            chi += w.term;
            if (w.term.cwiseAbs2().maxCoeff() < 1e-34) break;
        }
    }

    // Heun predictor-corrector for the Stratonovich equation.
    void heun_step(Eigen::VectorXcd& chi, double dt, std::span<const double> dw, Scratch& w) const {
        step_diagonal(w.d, dt, dw);
        w.tmp.resize(n_);
        apply(w.d, dt, chi, w.tmp);
        w.f0 = cplx(0, 1) * w.tmp;
        w.pred = chi + w.f0;
        apply(w.d, dt, w.pred, w.tmp);
        chi += 0.5 * (w.f0 + cplx(0, 1) * w.tmp);
    }

    // Naive Euler-Maruyama: the Ito reading of the same equation, no drift correction.
    void euler_step(Eigen::VectorXcd& chi, double dt, std::span<const double> dw, Scratch& w) const {
        step_diagonal(w.d, dt, dw);
        w.tmp.resize(n_);
        apply(w.d, dt, chi, w.tmp);
        chi += cplx(0, 1) * w.tmp;
    }

    void step(Scheme s, Eigen::VectorXcd& chi, double dt, std::span<const double> dw, Scratch& w) const {
        switch (s) {
            case Scheme::exponential_midpoint: exponential_step(chi, dt, dw, w); break;
            case Scheme::stratonovich_heun: heun_step(chi, dt, dw, w); break;
            case Scheme::euler_maruyama: euler_step(chi, dt, dw, w); break;
        }
    }

    double sigma() const { return sigma_; }

private:
    int n_;
    Eigen::VectorXd diag_;
    std::vector<int> sites_;
    double sigma_;
    bool independent_;
    double spectral_radius_ = 0.0;
    std::vector<double> weights_;
    std::vector<Eigen::VectorXcd> components_;
};

inline std::vector<double> sample_grid(const TrajectoryConfig& cfg) {
    std::vector<double> g;
    const long steps = cfg.n_steps();
    for (long s = 0; s <= steps; s += cfg.sample_every) g.push_back(double(s) * cfg.dt);
    return g;
}

inline std::vector<std::string> step_warnings(const StochasticChain& sc, const TrajectoryConfig& cfg) {
    std::vector<std::string> w;
    if (sc.spectral_radius() * cfg.dt > 0.5)
        w.push_back("traj: spectral radius * dt = " + std::to_string(sc.spectral_radius() * cfg.dt) +
                    " exceeds 0.5; reduce dt");
    return w;
}

// Runs one realization; calls sample(index, components) at every recorded step.
template <class Sample>
void run_realization(const StochasticChain& sc, const TrajectoryConfig& cfg, std::uint64_t traj_index,
                     Sample&& sample) {
    CounterRng rng(cfg.seed, traj_index);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXcd> chi = sc.components();
    StochasticChain::Scratch work;
    std::vector<double> dw(std::max(1, sc.n_noises()), 0.0);
    const double scale = sc.sigma() * std::sqrt(cfg.dt);
    const long steps = cfg.n_steps();
    sample(0, chi);
    for (long s = 1; s <= steps; ++s) {
        for (int q = 0; q < sc.n_noises(); ++q) dw[q] = scale * normal(rng);
        for (auto& c : chi) sc.step(cfg.scheme, c, cfg.dt, dw, work);
        if (s % cfg.sample_every == 0) {
            for (const auto& c : chi)
                if (!c.allFinite())
                    throw NumericalError("traj: NaN at step " + std::to_string(s) + " of trajectory " +
                                         std::to_string(traj_index));
            sample(s / cfg.sample_every, chi);
        }
    }
}

// Neumaier compensated sum.
struct Compensated {
    double sum = 0.0, c = 0.0;
    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            c += (sum - t) + x;
        else
            c += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + c; }
};

}  // namespace detail

inline Trajectory integrate_single(const ChainSpec& chain, const NoiseSpec& noise, const InitialState& initial,
                                   const TrajectoryConfig& cfg, long traj_index) {
    cfg.validate();
    if (traj_index < 0 || traj_index >= cfg.n_traj)
        throw PreconditionError("traj: index " + std::to_string(traj_index) + " outside [0, n_traj)");
    detail::StochasticChain sc(chain, noise, initial);
    Trajectory out;
    out.warnings = detail::step_warnings(sc, cfg);
    const auto& w = sc.weights();
    detail::run_realization(sc, cfg, std::uint64_t(traj_index), [&](long idx, const std::vector<Eigen::VectorXcd>& chi) {
        Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(sc.n(), sc.n());
        for (std::size_t i = 0; i < chi.size(); ++i) z += w[i] * chi[i] * chi[i].adjoint();
        out.states.push_back({std::move(z), double(idx) * cfg.sample_every * cfg.dt});
    });
    return out;
}

// Trajectories are processed in fixed chunks; each chunk is summed in index
// order and chunks are folded in order, so the result is bitwise independent
// of the worker count.
inline EnsembleResult ensemble_average(const ChainSpec& chain, const NoiseSpec& noise, const InitialState& initial,
                                       const TrajectoryConfig& cfg) {
    cfg.validate();
    detail::StochasticChain sc(chain, noise, initial);
    EnsembleResult res;
    res.config = cfg;
    res.grid = detail::sample_grid(cfg);
    res.warnings = detail::step_warnings(sc, cfg);
    const int n = sc.n();
    const std::size_t npts = res.grid.size();
    const long chunk = 64;
    const long n_chunks = (cfg.n_traj + chunk - 1) / chunk;

    struct Partial {
        std::vector<detail::Compensated> s1, s2;
    };
    std::vector<Partial> partials(n_chunks);
    parallel_for(n_chunks, cfg.workers, [&](long c) {
        std::vector<double> m(npts * n);
        Partial p{std::vector<detail::Compensated>(npts * n), std::vector<detail::Compensated>(npts * n)};
        for (long t = c * chunk; t < std::min(cfg.n_traj, (c + 1) * chunk); ++t) {
            detail::run_realization(sc, cfg, std::uint64_t(t), [&](long idx, const std::vector<Eigen::VectorXcd>& chi) {
                for (int j = 0; j < n; ++j) {
                    double z = 0.0;
                    for (std::size_t i = 0; i < chi.size(); ++i) z += sc.weights()[i] * std::norm(chi[i](j));
                    m[idx * n + j] = 2.0 * z - 1.0;
                }
            });
            for (std::size_t q = 0; q < m.size(); ++q) {
                p.s1[q].add(m[q]);
                p.s2[q].add(m[q] * m[q]);
            }
        }
        partials[c] = std::move(p);
    });

    res.mean.resize(npts, n);
    res.std_error.resize(npts, n);
    const double m_count = double(cfg.n_traj);
    for (std::size_t g = 0; g < npts; ++g)
        for (int j = 0; j < n; ++j) {
            detail::Compensated s1, s2;
            for (const auto& p : partials) {
                s1.add(p.s1[g * n + j].value());
                s2.add(p.s2[g * n + j].value());
            }
            const double mean = s1.value() / m_count;
            res.mean(g, j) = mean;
            if (cfg.n_traj > 1) {
                const double var = std::max(0.0, (s2.value() - m_count * mean * mean) / (m_count - 1.0));
                res.std_error(g, j) = std::sqrt(var / m_count);
            } else {
                res.std_error(g, j) = 0.0;
            }
        }
    return res;
}

}  // namespace noisesync
